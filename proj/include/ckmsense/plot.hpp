// SPDX-License-Identifier: Apache-2.0
//
// ckmsense - environment-aware NLoS sensing with channel angle-delay maps
// Copyright (C) 2026 The ckmsense Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CKMSENSE_PLOT_HPP
#define CKMSENSE_PLOT_HPP

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ckmsense::plot
{

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // source line of each row, 1-based

    std::size_t column(const std::string &name) const
    {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw FormatError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
    bool has_column(const std::string &name) const
    {
        return std::find(header.begin(), header.end(), name) != header.end();
    }

    double number(std::size_t row, std::size_t col) const
    {
        const std::string &s = rows[row][col];
        const char *b = s.c_str();
        char *e = nullptr;
        const double v = std::strtod(b, &e);
        if (s.empty() || e != b + s.size())
            throw FormatError("line " + std::to_string(line_numbers[row]) + ": '" + s + "' is not a number");
        return v;
    }
};

namespace detail
{
inline std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line)
    {
        if (c == ',')
        {
            out.push_back(cur);
            cur.clear();
        }
        else if (c != '\r')
            cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}
} // namespace detail

/// Reads a header row and comma separated records. Every record must have as
/// many fields as the header; an empty body is an error.
inline CsvTable parse_csv(std::istream &in)
{
    CsvTable t;
    std::string line;
    std::size_t ln = 0;
    bool have_header = false;
    while (std::getline(in, line))
    {
        ++ln;
        if (line.empty() || line == "\r")
            continue;
        auto fields = detail::split(line);
        if (!have_header)
        {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw FormatError("line " + std::to_string(ln) + ": expected " + std::to_string(t.header.size()) +
                              " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(ln);
    }
    if (!have_header)
        throw FormatError("no data: missing header row");
    if (t.rows.empty())
        throw FormatError("no data: CSV has a header but no records");
    return t;
}

inline CsvTable parse_csv_string(const std::string &s)
{
    std::istringstream in(s);
    return parse_csv(in);
}

struct Series
{
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct Chart
{
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

namespace detail
{
inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string escape(const std::string &s)
{
    std::string o;
    for (char c : s)
    {
        if (c == '<')
            o += "&lt;";
        else if (c == '>')
            o += "&gt;";
        else if (c == '&')
            o += "&amp;";
        else
            o += c;
    }
    return o;
}

inline const char *colour(std::size_t i)
{
    static const char *pal[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    return pal[i % 7];
}
} // namespace detail

/// Line chart with linear x and logarithmic y axis. Points with non-positive
/// or non-finite y are dropped.
inline std::string render_svg(const Chart &c)
{
    constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto &s : c.series)
        for (auto [x, y] : s.points)
        {
            if (!std::isfinite(x) || !std::isfinite(y) || y <= 0.0)
                continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!std::isfinite(xmin))
        throw FormatError("no data: nothing plottable on a log axis");
    if (xmax == xmin)
    {
        xmin -= 0.5;
        xmax += 0.5;
    }
    const double dlo = std::floor(std::log10(ymin)), dhi = std::max(dlo + 1.0, std::ceil(std::log10(ymax)));
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return T + (dhi - std::log10(y)) / (dhi - dlo) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << detail::num(W / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(c.title) << "</text>\n";
    // axes and grid
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double d = dlo; d <= dhi + 0.5; d += 1.0)
    {
        const double y = py(std::pow(10.0, d));
        o << "<line x1=\"" << L << "\" y1=\"" << detail::num(y) << "\" x2=\"" << W - R << "\" y2=\"" << detail::num(y)
          << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << detail::num(y + 4) << "\" text-anchor=\"end\">1e"
          << static_cast<int>(d) << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i)
    {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        o << "<text x=\"" << detail::num(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
          << detail::tick(xv) << "</text>\n";
    }
    o << "<text x=\"" << detail::num(L + (W - L - R) / 2) << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << detail::escape(c.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << detail::num(T + (H - T - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << detail::num(T + (H - T - B) / 2) << ")\">" << detail::escape(c.y_label) << "</text>\n";

    for (std::size_t i = 0; i < c.series.size(); ++i)
    {
        const auto &s = c.series[i];
        std::string pts;
        for (auto [x, y] : s.points)
        {
            if (!std::isfinite(x) || !std::isfinite(y) || y <= 0.0)
                continue;
            if (!pts.empty())
                pts += ' ';
            pts += detail::num(px(x)) + "," + detail::num(py(y));
        }
        if (!pts.empty())
            o << "<polyline fill=\"none\" stroke=\"" << detail::colour(i) << "\" stroke-width=\"2\" points=\"" << pts
              << "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(i);
        o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << detail::num(ly) << "\" x2=\"" << W - R + 30 << "\" y2=\""
          << detail::num(ly) << "\" stroke=\"" << detail::colour(i) << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 35 << "\" y=\"" << detail::num(ly + 4) << "\">" << detail::escape(s.label)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// One chart per sweep found in a sweep CSV (y = rmse) or CRLB CSV
/// (y = trace_crlb). Returns (sweep name, chart) pairs in order of first
/// appearance.
inline std::vector<std::pair<std::string, Chart>> charts_from_csv(const CsvTable &t)
{
    std::string metric, ylabel, what;
    if (t.has_column("rmse"))
    {
        metric = "rmse";
        ylabel = "RMSE (m)";
        what = "Localization RMSE";
    }
    else if (t.has_column("trace_crlb"))
    {
        metric = "trace_crlb";
        ylabel = "trace CRLB (m^2)";
        what = "CRLB";
    }
    else
        throw FormatError("CSV has neither an rmse nor a trace_crlb column");
    const auto c_sweep = t.column("sweep"), c_method = t.column("method"), c_st = t.column("sigma_theta"),
               c_tau = t.column("sigma_tau"), c_y = t.column(metric);

    std::vector<std::pair<std::string, Chart>> charts;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
    {
        const std::string &sw = t.rows[r][c_sweep];
        if (sw != "angle" && sw != "delay")
            throw FormatError("line " + std::to_string(t.line_numbers[r]) + ": unknown sweep '" + sw + "'");
        auto it = std::find_if(charts.begin(), charts.end(), [&](const auto &p) { return p.first == sw; });
        if (it == charts.end())
        {
            Chart c;
            c.title = what + (sw == "angle" ? " vs angle error" : " vs delay error");
            c.x_label = sw == "angle" ? "sigma_theta (rad)" : "sigma_tau (ns)";
            c.y_label = ylabel;
            charts.emplace_back(sw, c);
            it = std::prev(charts.end());
        }
        const double x = sw == "angle" ? t.number(r, c_st) : t.number(r, c_tau) * 1e9;
        const double y = t.number(r, c_y);
        auto &series = it->second.series;
        const std::string &m = t.rows[r][c_method];
        auto sit = std::find_if(series.begin(), series.end(), [&](const Series &s) { return s.label == m; });
        if (sit == series.end())
        {
            series.push_back({m, {}});
            sit = std::prev(series.end());
        }
        sit->points.emplace_back(x, y);
    }
    for (auto &[name, c] : charts)
        for (auto &s : c.series)
            std::stable_sort(s.points.begin(), s.points.end(),
                             [](const auto &a, const auto &b) { return a.first < b.first; });
    return charts;
}

} // namespace ckmsense::plot

#endif
