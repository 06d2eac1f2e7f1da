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

#ifndef CKMSENSE_GEOMETRY_HPP
#define CKMSENSE_GEOMETRY_HPP

#include "common.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

// Deterministic 2-D propagation geometry: the LoS angle/delay mapping and its
// inverse, single-bounce multipath synthesis, and composite (forward x reverse)
// path enumeration for mono-static sensing.

namespace ckmsense::geom
{

struct Scatterer
{
    Point2 position;
    double reflectivity = 1.0; // in (0, 1]
};

struct Environment
{
    Point2 bs{50.0, 0.0};
    std::vector<Scatterer> scatterers;
    Bounds bounds;
    bool los_blocked = true;

    /// Throws ConfigError when a structural invariant is violated.
    void validate() const
    {
        if (!(bounds.width > 0.0) || !(bounds.height > 0.0))
            throw ConfigError("environment bounds must be positive");
        if (!bs.finite() || !bounds.contains(bs))
            throw ConfigError("base station must lie inside the scene bounds");
        for (std::size_t i = 0; i < scatterers.size(); ++i)
        {
            const auto &s = scatterers[i];
            if (!s.position.finite() || !bounds.contains(s.position))
                throw ConfigError("scatterer " + std::to_string(i) + " lies outside the scene bounds");
            if (!(s.reflectivity > 0.0) || s.reflectivity > 1.0)
                throw ConfigError("scatterer " + std::to_string(i) + " reflectivity must be in (0, 1]");
        }
    }

    /// Number of candidate one-way paths at any location.
    std::size_t candidate_count() const { return scatterers.size() + (los_blocked ? 0 : 1); }
};

inline constexpr int kDirectPath = -1;

/// One-way BS <-> location path.
struct CommPath
{
    double aod_rad = 0.0; // angle at the BS toward the first hop, (-pi, pi]
    double delay_s = 0.0;
    double gain = 0.0;
    int scatterer = kDirectPath; // index into Environment::scatterers, or kDirectPath
};

/// How the L' selected paths are assigned to map slots.
enum class SlotOrder
{
    Gain,  // strongest first
    Aod,   // ascending departure angle
    Delay  // shortest first
};

/// The L' dominant one-way paths at a location, laid out in `order`.
struct CommChannelKnowledge
{
    std::vector<CommPath> paths;
    SlotOrder order = SlotOrder::Gain;

    std::size_t l_prime() const { return paths.size(); }
};

struct CompositePath
{
    double aod_rad = 0.0; // departure angle of the forward constituent
    double aoa_rad = 0.0; // arrival angle of the reverse constituent
    double delay_s = 0.0; // forward + reverse delay
    std::size_t forward_slot = 0; // 0-based
    std::size_t reverse_slot = 0; // 0-based
};

/// Full-quadrant direction and round-trip delay from `bs` to a reflecting `target`.
inline std::pair<double, double> los_angle_delay(Point2 bs, Point2 target)
{
    const Point2 d = target - bs;
    const double r = d.norm();
    if (!(r > 0.0))
        throw DegenerateGeometryError("BS and target coincide");
    return {wrap_angle(std::atan2(d.y, d.x)), 2.0 * r / kSpeedOfLight};
}

/// Closed-form position from a round-trip LoS angle/delay pair.
inline Point2 invert_los(double angle_rad, double delay_s, Point2 bs)
{
    if (!(delay_s > 0.0) || !std::isfinite(delay_s))
        throw InvalidObservationError("LoS inversion requires a positive finite delay");
    const double range = 0.5 * delay_s * kSpeedOfLight;
    return {range * std::cos(angle_rad) + bs.x, range * std::sin(angle_rad) + bs.y};
}

namespace detail
{
// Points closer than this are treated as coincident.
inline constexpr double kCoincidentTol = 1e-9;
} // namespace detail

/// Enumerates every single-bounce path (plus the direct path when LoS is not
/// blocked) from the BS to `loc`, unsorted, in candidate order [direct, s0, s1, ...].
inline std::vector<CommPath> all_single_bounce_paths(const Environment &env, Point2 loc)
{
    if (!loc.finite())
        throw DegenerateGeometryError("location is not finite");
    std::vector<CommPath> out;
    out.reserve(env.candidate_count());

    const double d_direct = distance(env.bs, loc);
    if (d_direct < detail::kCoincidentTol)
        throw DegenerateGeometryError("location coincides with the BS");
    if (!env.los_blocked)
    {
        const Point2 d = loc - env.bs;
        out.push_back({wrap_angle(std::atan2(d.y, d.x)), d_direct / kSpeedOfLight, 1.0 / (d_direct * d_direct),
                       kDirectPath});
    }
    for (std::size_t i = 0; i < env.scatterers.size(); ++i)
    {
        const auto &s = env.scatterers[i];
        const double d1 = distance(env.bs, s.position);
        const double d2 = distance(s.position, loc);
        if (d1 < detail::kCoincidentTol)
            throw DegenerateGeometryError("scatterer " + std::to_string(i) + " coincides with the BS");
        if (d2 < detail::kCoincidentTol)
            throw DegenerateGeometryError("location coincides with scatterer " + std::to_string(i));
        const Point2 d = s.position - env.bs;
        out.push_back({wrap_angle(std::atan2(d.y, d.x)), (d1 + d2) / kSpeedOfLight, s.reflectivity / (d1 * d2),
                       static_cast<int>(i)});
    }
    return out;
}

/// The `l_prime` strongest one-way paths at `loc`, sorted by descending gain;
/// ties go to the shorter delay, then to candidate order.
inline CommChannelKnowledge single_bounce_paths(const Environment &env, Point2 loc, std::size_t l_prime)
{
    if (l_prime == 0)
        throw ConfigError("l_prime must be at least 1");
    if (!env.bounds.contains(loc))
        throw OutOfBoundsError("location lies outside the scene bounds");
    if (env.candidate_count() < l_prime)
        throw ConfigError("environment has fewer candidate paths than l_prime");

    auto paths = all_single_bounce_paths(env, loc);
    std::stable_sort(paths.begin(), paths.end(), [](const CommPath &a, const CommPath &b) {
        if (a.gain != b.gain)
            return a.gain > b.gain;
        return a.delay_s < b.delay_s;
    });
    paths.resize(l_prime);
    return {std::move(paths)};
}

inline const char *to_string(SlotOrder o)
{
    switch (o)
    {
    case SlotOrder::Gain: return "gain";
    case SlotOrder::Aod: return "aod";
    case SlotOrder::Delay: return "delay";
    }
    return "?";
}

inline SlotOrder parse_slot_order(const std::string &s)
{
    if (s == "gain")
        return SlotOrder::Gain;
    if (s == "aod")
        return SlotOrder::Aod;
    if (s == "delay")
        return SlotOrder::Delay;
    throw ConfigError("unknown slot order '" + s + "' (expected gain, aod or delay)");
}

/// Reorders already-selected paths in place. Gain order is the selection order
/// and is left untouched.
inline void order_paths(CommChannelKnowledge &w, SlotOrder order)
{
    auto &p = w.paths;
    w.order = order;
    if (order == SlotOrder::Aod)
        std::stable_sort(p.begin(), p.end(), [](const CommPath &a, const CommPath &b) { return a.aod_rad < b.aod_rad; });
    else if (order == SlotOrder::Delay)
        std::stable_sort(p.begin(), p.end(), [](const CommPath &a, const CommPath &b) { return a.delay_s < b.delay_s; });
}

/// The `l_prime` strongest paths at `loc`, laid out in `order`.
inline CommChannelKnowledge dominant_paths(const Environment &env, Point2 loc, std::size_t l_prime, SlotOrder order)
{
    auto w = single_bounce_paths(env, loc, l_prime);
    order_paths(w, order);
    return w;
}

/// Maps a 1-based composite index l in [1, l_prime^2] to the 1-based
/// (forward, reverse) constituent pair.
inline std::pair<std::size_t, std::size_t> composite_index(std::size_t l, std::size_t l_prime)
{
    if (l_prime == 0 || l < 1 || l > l_prime * l_prime)
        throw std::out_of_range("composite index out of range");
    return {(l - 1) / l_prime + 1, (l - 1) % l_prime + 1};
}

/// Inverse of composite_index (1-based in, 1-based out).
inline std::size_t composite_linear_index(std::size_t l_t, std::size_t l_r, std::size_t l_prime)
{
    if (l_t < 1 || l_t > l_prime || l_r < 1 || l_r > l_prime)
        throw std::out_of_range("constituent index out of range");
    return l_prime * (l_t - 1) + l_r;
}

/// The (forward, reverse) 0-based slot pairs observed in a sensing snapshot,
/// in composite-index order. Reciprocal-only keeps the diagonal pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> composite_slots(std::size_t l_prime, bool reciprocal_only)
{
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    if (reciprocal_only)
    {
        slots.reserve(l_prime);
        for (std::size_t k = 0; k < l_prime; ++k)
            slots.emplace_back(k, k);
        return slots;
    }
    slots.reserve(l_prime * l_prime);
    for (std::size_t l = 1; l <= l_prime * l_prime; ++l)
    {
        auto [t, r] = composite_index(l, l_prime);
        slots.emplace_back(t - 1, r - 1);
    }
    return slots;
}

/// Cascades forward and reverse one-way paths into round-trip composites.
inline std::vector<CompositePath> enumerate_composite_paths(const CommChannelKnowledge &w, bool reciprocal_only = false)
{
    std::vector<CompositePath> out;
    for (auto [t, r] : composite_slots(w.l_prime(), reciprocal_only))
    {
        const auto &fwd = w.paths[t];
        const auto &rev = w.paths[r];
        out.push_back({wrap_angle(fwd.aod_rad), wrap_angle(rev.aod_rad), fwd.delay_s + rev.delay_s, t, r});
    }
    return out;
}

} // namespace ckmsense::geom

#endif
