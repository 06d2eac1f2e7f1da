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

#include <catch_amalgamated.hpp>

#include <ckmsense/plot.hpp>

using namespace ckmsense;
using Catch::Matchers::ContainsSubstring;

namespace
{
const char *kSweep = "sweep,method,sigma_theta,sigma_tau,rmse,n_trials,mean_iters,failure_count\n"
                     "angle,geo-nlos,0.10000000000000001,2e-08,25.5,10,0,0\n"
                     "angle,ckm-nlos,0.10000000000000001,2e-08,0.5,10,31,0\n"
                     "angle,geo-nlos,0.5,2e-08,40,10,0,0\n"
                     "angle,ckm-nlos,0.5,2e-08,1.25,10,40,1\n"
                     "delay,ckm-nlos,0.10000000000000001,2.0000000000000001e-09,0.3,10,30,0\n"
                     "delay,ckm-nlos,0.10000000000000001,6e-08,2,10,30,0\n";
}

TEST_CASE("CSV parsing keeps header and rows")
{
    const auto t = plot::parse_csv_string(kSweep);
    CHECK(t.header.size() == 8);
    CHECK(t.rows.size() == 6);
    CHECK(t.column("rmse") == 4);
    CHECK(t.number(1, 4) == 0.5);
    CHECK(t.line_numbers[0] == 2);
}

TEST_CASE("Malformed CSV is reported with its line number")
{
    std::string bad = kSweep;
    bad.insert(bad.find("angle,geo-nlos,0.5"), "angle,ckm-nlos,0.3\n");
    CHECK_THROWS_WITH(plot::parse_csv_string(bad), ContainsSubstring("line 4"));
    std::string nan_field = kSweep;
    nan_field.replace(nan_field.find("25.5"), 4, "x25");
    const auto t = plot::parse_csv_string(nan_field);
    CHECK_THROWS_WITH(plot::charts_from_csv(t), ContainsSubstring("line 2"));
}

TEST_CASE("Empty CSV body is a no-data error")
{
    CHECK_THROWS_WITH(plot::parse_csv_string(""), ContainsSubstring("no data"));
    CHECK_THROWS_WITH(plot::parse_csv_string("sweep,method,rmse\n"), ContainsSubstring("no data"));
}

TEST_CASE("Charts group rows by sweep and method")
{
    const auto charts = plot::charts_from_csv(plot::parse_csv_string(kSweep));
    REQUIRE(charts.size() == 2);
    CHECK(charts[0].first == "angle");
    REQUIRE(charts[0].second.series.size() == 2);
    CHECK(charts[0].second.series[0].label == "geo-nlos");
    CHECK(charts[0].second.series[1].points.back() == std::pair<double, double>{0.5, 1.25});
    CHECK(charts[1].first == "delay");
    CHECK(charts[1].second.x_label == "sigma_tau (ns)");
    CHECK_THAT(charts[1].second.series[0].points[0].first, Catch::Matchers::WithinRel(2.0, 1e-12));
}

TEST_CASE("SVG output is deterministic and log-scaled")
{
    const auto charts = plot::charts_from_csv(plot::parse_csv_string(kSweep));
    const auto a = plot::render_svg(charts[0].second);
    const auto b = plot::render_svg(plot::charts_from_csv(plot::parse_csv_string(kSweep))[0].second);
    CHECK(a == b);
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK_THAT(a, ContainsSubstring("1e-1"));
    CHECK_THAT(a, ContainsSubstring("1e2"));
    CHECK_THAT(a, ContainsSubstring("ckm-nlos"));
    plot::Chart empty;
    empty.series.push_back({"x", {{1.0, 0.0}, {2.0, -1.0}}});
    CHECK_THROWS_WITH(plot::render_svg(empty), ContainsSubstring("no data"));
}
