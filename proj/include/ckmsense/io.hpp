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

#ifndef CKMSENSE_IO_HPP
#define CKMSENSE_IO_HPP

#include "cadm.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "sensing.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

// Human-readable text formats. Every file starts with a `format <name> <version>`
// record; `#` starts a comment line. Numbers are written with 17 significant
// digits so a write/read cycle is exact.
//
// Scene (ckmsense-scene 1):
//   format ckmsense-scene 1
//   bs <x> <y>
//   bounds <width> <height>
//   los_blocked <0|1>
//   scatterers <n>
//   <x> <y> <reflectivity>          (n records)
//
// Training set (ckmsense-trainset 2):
//   format ckmsense-trainset 2
//   bounds <width> <height>
//   l_prime <L'>
//   slot_order <gain|aod|delay>
//   samples <n>
//   <x> <y> then L' x (<aod_rad> <delay_s> <gain>)   (n records)
//
// Observation (ckmsense-observation 2):
//   format ckmsense-observation 2
//   l_prime <L'>
//   slot_order <gain|aod|delay>
//   reciprocal_only <0|1>
//   <l> <aod_rad> <aoa_rad> <delay_s>  (L'^2 or L' records, l is 1-based)

namespace ckmsense::io
{

inline constexpr int kSceneVersion = 1;
inline constexpr int kTrainingSetVersion = 2;
inline constexpr int kObservationVersion = 2;

inline std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail
{

// Line reader that skips blank and comment lines and tracks line numbers.
class RecordReader
{
  public:
    RecordReader(std::istream &in, std::string what) : in_(in), what_(std::move(what)) {}

    std::istringstream next()
    {
        std::string line;
        while (std::getline(in_, line))
        {
            ++line_no_;
            const auto p = line.find_first_not_of(" \t\r");
            if (p == std::string::npos || line[p] == '#')
                continue;
            return std::istringstream(line);
        }
        fail("unexpected end of file");
    }

    bool has_more()
    {
        std::string line;
        std::streampos pos = in_.tellg();
        while (std::getline(in_, line))
        {
            const auto p = line.find_first_not_of(" \t\r");
            if (p != std::string::npos && line[p] != '#')
                return true;
        }
        in_.clear();
        in_.seekg(pos);
        return false;
    }

    [[noreturn]] void fail(const std::string &msg) const
    {
        throw FormatError(what_ + " line " + std::to_string(line_no_) + ": " + msg);
    }

    template <class T>
    T read(std::istringstream &ss, const char *field)
    {
        T v{};
        if (!(ss >> v))
            fail(std::string("cannot parse ") + field);
        return v;
    }

    void expect_end(std::istringstream &ss)
    {
        std::string extra;
        if (ss >> extra)
            fail("unexpected trailing field '" + extra + "'");
    }

    void expect_key(std::istringstream &ss, const char *key)
    {
        std::string k;
        if (!(ss >> k) || k != key)
            fail(std::string("expected '") + key + "'");
    }

    void expect_format(const char *name, int version)
    {
        auto ss = next();
        expect_key(ss, "format");
        const auto n = read<std::string>(ss, "format name");
        if (n != name)
            fail("expected format '" + std::string(name) + "', found '" + n + "'");
        const int v = read<int>(ss, "format version");
        if (v != version)
            fail("unsupported " + n + " version " + std::to_string(v) + " (expected " + std::to_string(version) + ")");
        expect_end(ss);
    }

  private:
    std::istream &in_;
    std::string what_;
    std::size_t line_no_ = 0;
};

} // namespace detail

// ---- Scene --------------------------------------------------------------

inline void write_scene(const geom::Environment &env, std::ostream &out)
{
    out << "format ckmsense-scene " << kSceneVersion << "\n";
    out << "bs " << fmt_double(env.bs.x) << " " << fmt_double(env.bs.y) << "\n";
    out << "bounds " << fmt_double(env.bounds.width) << " " << fmt_double(env.bounds.height) << "\n";
    out << "los_blocked " << (env.los_blocked ? 1 : 0) << "\n";
    out << "scatterers " << env.scatterers.size() << "\n";
    out << "# x y reflectivity\n";
    for (const auto &s : env.scatterers)
        out << fmt_double(s.position.x) << " " << fmt_double(s.position.y) << " " << fmt_double(s.reflectivity)
            << "\n";
}

inline geom::Environment read_scene(std::istream &in)
{
    detail::RecordReader rr(in, "scene");
    rr.expect_format("ckmsense-scene", kSceneVersion);
    geom::Environment env;
    {
        auto ss = rr.next();
        rr.expect_key(ss, "bs");
        env.bs.x = rr.read<double>(ss, "bs x");
        env.bs.y = rr.read<double>(ss, "bs y");
        rr.expect_end(ss);
    }
    {
        auto ss = rr.next();
        rr.expect_key(ss, "bounds");
        env.bounds.width = rr.read<double>(ss, "width");
        env.bounds.height = rr.read<double>(ss, "height");
        rr.expect_end(ss);
    }
    {
        auto ss = rr.next();
        rr.expect_key(ss, "los_blocked");
        const int b = rr.read<int>(ss, "los_blocked");
        if (b != 0 && b != 1)
            rr.fail("los_blocked must be 0 or 1");
        env.los_blocked = b == 1;
        rr.expect_end(ss);
    }
    std::size_t n = 0;
    {
        auto ss = rr.next();
        rr.expect_key(ss, "scatterers");
        n = rr.read<std::size_t>(ss, "scatterer count");
        rr.expect_end(ss);
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        auto ss = rr.next();
        geom::Scatterer s;
        s.position.x = rr.read<double>(ss, "scatterer x");
        s.position.y = rr.read<double>(ss, "scatterer y");
        s.reflectivity = rr.read<double>(ss, "reflectivity");
        rr.expect_end(ss);
        env.scatterers.push_back(s);
    }
    if (rr.has_more())
        rr.fail("more scatterer records than declared");
    try
    {
        env.validate();
    }
    catch (const ConfigError &e)
    {
        throw FormatError(std::string("scene: ") + e.what());
    }
    return env;
}

namespace detail
{
inline geom::SlotOrder read_slot_order(RecordReader &rr)
{
    auto ss = rr.next();
    rr.expect_key(ss, "slot_order");
    const auto name = rr.read<std::string>(ss, "slot_order");
    rr.expect_end(ss);
    try
    {
        return geom::parse_slot_order(name);
    }
    catch (const ConfigError &e)
    {
        rr.fail(e.what());
    }
}
} // namespace detail

// ---- Training set -------------------------------------------------------

inline void write_training_set(const cadm::TrainingSet &data, std::ostream &out)
{
    out << "format ckmsense-trainset " << kTrainingSetVersion << "\n";
    out << "bounds " << fmt_double(data.bounds.width) << " " << fmt_double(data.bounds.height) << "\n";
    out << "l_prime " << data.l_prime << "\n";
    out << "slot_order " << geom::to_string(data.slot_order) << "\n";
    out << "samples " << data.samples.size() << "\n";
    out << "# x y then l_prime x (aod_rad delay_s gain)\n";
    for (const auto &s : data.samples)
    {
        out << fmt_double(s.location.x) << " " << fmt_double(s.location.y);
        for (const auto &p : s.truth.paths)
            out << " " << fmt_double(p.aod_rad) << " " << fmt_double(p.delay_s) << " " << fmt_double(p.gain);
        out << "\n";
    }
}

inline cadm::TrainingSet read_training_set(std::istream &in)
{
    detail::RecordReader rr(in, "training set");
    rr.expect_format("ckmsense-trainset", kTrainingSetVersion);
    cadm::TrainingSet data;
    {
        auto ss = rr.next();
        rr.expect_key(ss, "bounds");
        data.bounds.width = rr.read<double>(ss, "width");
        data.bounds.height = rr.read<double>(ss, "height");
        rr.expect_end(ss);
    }
    {
        auto ss = rr.next();
        rr.expect_key(ss, "l_prime");
        data.l_prime = rr.read<std::size_t>(ss, "l_prime");
        rr.expect_end(ss);
    }
    data.slot_order = detail::read_slot_order(rr);
    std::size_t n = 0;
    {
        auto ss = rr.next();
        rr.expect_key(ss, "samples");
        n = rr.read<std::size_t>(ss, "sample count");
        rr.expect_end(ss);
    }
    data.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        auto ss = rr.next();
        cadm::TrainingSample s;
        s.location.x = rr.read<double>(ss, "x");
        s.location.y = rr.read<double>(ss, "y");
        for (std::size_t k = 0; k < data.l_prime; ++k)
        {
            geom::CommPath p;
            p.aod_rad = rr.read<double>(ss, "aod");
            p.delay_s = rr.read<double>(ss, "delay");
            p.gain = rr.read<double>(ss, "gain");
            s.truth.paths.push_back(p);
        }
        s.truth.order = data.slot_order;
        rr.expect_end(ss);
        data.samples.push_back(std::move(s));
    }
    if (rr.has_more())
        rr.fail("more sample records than declared");
    try
    {
        data.validate();
    }
    catch (const ConfigError &e)
    {
        throw FormatError(std::string("training set: ") + e.what());
    }
    return data;
}

// ---- Observation --------------------------------------------------------

inline void write_observation(const sensing::SensingObservation &obs, std::ostream &out)
{
    out << "format ckmsense-observation " << kObservationVersion << "\n";
    out << "l_prime " << obs.l_prime << "\n";
    out << "slot_order " << geom::to_string(obs.slot_order) << "\n";
    out << "reciprocal_only " << (obs.reciprocal_only ? 1 : 0) << "\n";
    out << "# l aod_rad aoa_rad delay_s\n";
    for (std::size_t i = 0; i < obs.triples.size(); ++i)
    {
        const auto &t = obs.triples[i];
        out << (i + 1) << " " << fmt_double(t.aod_rad) << " " << fmt_double(t.aoa_rad) << " " << fmt_double(t.delay_s)
            << "\n";
    }
}

inline sensing::SensingObservation read_observation(std::istream &in)
{
    detail::RecordReader rr(in, "observation");
    rr.expect_format("ckmsense-observation", kObservationVersion);
    sensing::SensingObservation obs;
    {
        auto ss = rr.next();
        rr.expect_key(ss, "l_prime");
        obs.l_prime = rr.read<std::size_t>(ss, "l_prime");
        rr.expect_end(ss);
    }
    obs.slot_order = detail::read_slot_order(rr);
    {
        auto ss = rr.next();
        rr.expect_key(ss, "reciprocal_only");
        const int b = rr.read<int>(ss, "reciprocal_only");
        if (b != 0 && b != 1)
            rr.fail("reciprocal_only must be 0 or 1");
        obs.reciprocal_only = b == 1;
        rr.expect_end(ss);
    }
    for (std::size_t i = 0; i < obs.expected_size(); ++i)
    {
        auto ss = rr.next();
        const auto l = rr.read<std::size_t>(ss, "l");
        if (l != i + 1)
            rr.fail("composite indices must be consecutive from 1");
        sensing::ObservationTriple t;
        t.aod_rad = rr.read<double>(ss, "aod");
        t.aoa_rad = rr.read<double>(ss, "aoa");
        t.delay_s = rr.read<double>(ss, "delay");
        rr.expect_end(ss);
        obs.triples.push_back(t);
    }
    if (rr.has_more())
        rr.fail("more observation records than l_prime implies");
    return obs;
}

// ---- File helpers -------------------------------------------------------

template <class Writer, class T>
void write_file(const std::string &path, const T &value, Writer writer)
{
    std::ofstream f(path);
    if (!f)
        throw FormatError("cannot open " + path + " for writing");
    writer(value, f);
    if (!f)
        throw FormatError("failed writing " + path);
}

template <class Reader>
auto read_file(const std::string &path, Reader reader)
{
    std::ifstream f(path);
    if (!f)
        throw FormatError("cannot open " + path);
    return reader(f);
}

} // namespace ckmsense::io

#endif
