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

#ifndef CKMSENSE_CHANNEL_MAP_HPP
#define CKMSENSE_CHANNEL_MAP_HPP

#include "common.hpp"
#include "geometry.hpp"

#include <Eigen/Dense>

#include <concepts>
#include <cstddef>
#include <vector>

namespace ckmsense
{

/// Per-slot Gaussian over the one-way departure angle and delay at a location.
struct GaussianPathDist
{
    double mu_theta = 0.0;  // rad, (-pi, pi]
    double var_theta = 1.0; // rad^2
    double mu_tau = 0.0;    // s
    double var_tau = 1.0;   // s^2
};

/// Row-major 4L' x 2 Jacobian; rows per slot are
/// [mu_theta, var_theta, mu_tau, var_tau], columns are d/dx, d/dy in meters.
using MapJacobian = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct MapEvaluation
{
    std::vector<GaussianPathDist> dists;
    MapJacobian jacobian;
};

/// A location -> angle/delay distribution map usable by the sensing likelihood.
template <class M>
concept AngleDelayMap = requires(const M &m, Point2 p) {
    { m.l_prime() } -> std::convertible_to<std::size_t>;
    { m.slot_order() } -> std::same_as<geom::SlotOrder>;
    { m.bounds() } -> std::convertible_to<Bounds>;
    { m.distributions(p) } -> std::same_as<std::vector<GaussianPathDist>>;
    { m.evaluate(p) } -> std::same_as<MapEvaluation>;
};

/// Exact-geometry map: means are the true strongest single-bounce paths at the
/// query location (laid out in `order`), variances are fixed. Serves as the noiseless oracle for the
/// learned map.
class GeometryMap
{
  public:
    GeometryMap(geom::Environment env, std::size_t l_prime, double var_theta, double var_tau,
                geom::SlotOrder order = geom::SlotOrder::Aod)
        : env_(std::move(env)), l_prime_(l_prime), var_theta_(var_theta), var_tau_(var_tau), order_(order)
    {
        env_.validate();
        if (l_prime_ == 0 || env_.candidate_count() < l_prime_)
            throw ConfigError("geometry map needs 1 <= l_prime <= candidate paths");
        if (!(var_theta > 0.0) || !(var_tau > 0.0))
            throw ConfigError("geometry map variances must be positive");
    }

    std::size_t l_prime() const { return l_prime_; }
    geom::SlotOrder slot_order() const { return order_; }
    Bounds bounds() const { return env_.bounds; }
    const geom::Environment &environment() const { return env_; }

    std::vector<GaussianPathDist> distributions(Point2 p) const
    {
        const auto w = geom::dominant_paths(env_, p, l_prime_, order_);
        std::vector<GaussianPathDist> out;
        out.reserve(l_prime_);
        for (const auto &path : w.paths)
            out.push_back({path.aod_rad, var_theta_, path.delay_s, var_tau_});
        return out;
    }

    MapEvaluation evaluate(Point2 p) const
    {
        const Point2 q = p;
        const auto w = geom::dominant_paths(env_, q, l_prime_, order_);
        MapEvaluation ev;
        ev.jacobian = MapJacobian::Zero(static_cast<Eigen::Index>(4 * l_prime_), 2);
        for (std::size_t k = 0; k < l_prime_; ++k)
        {
            const auto &path = w.paths[k];
            ev.dists.push_back({path.aod_rad, var_theta_, path.delay_s, var_tau_});
            const auto row = static_cast<Eigen::Index>(4 * k);
            if (path.scatterer == geom::kDirectPath)
            {
                const Point2 d = q - env_.bs;
                const double r2 = d.x * d.x + d.y * d.y;
                const double r = std::sqrt(r2);
                ev.jacobian(row, 0) = -d.y / r2;
                ev.jacobian(row, 1) = d.x / r2;
                ev.jacobian(row + 2, 0) = d.x / (r * kSpeedOfLight);
                ev.jacobian(row + 2, 1) = d.y / (r * kSpeedOfLight);
            }
            else
            {
                // Departure angle toward a fixed scatterer does not move with the UE.
                const Point2 d = q - env_.scatterers[static_cast<std::size_t>(path.scatterer)].position;
                const double r = d.norm();
                ev.jacobian(row + 2, 0) = d.x / (r * kSpeedOfLight);
                ev.jacobian(row + 2, 1) = d.y / (r * kSpeedOfLight);
            }
        }
        return ev;
    }

  private:
    geom::Environment env_;
    std::size_t l_prime_;
    double var_theta_;
    double var_tau_;
    geom::SlotOrder order_;
};

static_assert(AngleDelayMap<GeometryMap>);

} // namespace ckmsense

#endif
