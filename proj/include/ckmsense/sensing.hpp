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

#ifndef CKMSENSE_SENSING_HPP
#define CKMSENSE_SENSING_HPP

#include "channel_map.hpp"
#include "common.hpp"
#include "geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace ckmsense::sensing
{

/// Variances of the per-path AoD, AoA and delay estimation errors.
struct ErrorSpec
{
    double var_aod = 0.01;     // rad^2
    double var_aoa = 0.01;     // rad^2
    double var_delay = 4e-16;  // s^2

    static ErrorSpec from_std(double sigma_aod, double sigma_aoa, double sigma_delay)
    {
        return {sigma_aod * sigma_aod, sigma_aoa * sigma_aoa, sigma_delay * sigma_delay};
    }

    void validate() const
    {
        if (!(var_aod > 0.0) || !(var_aoa > 0.0) || !(var_delay > 0.0) || !std::isfinite(var_aod) ||
            !std::isfinite(var_aoa) || !std::isfinite(var_delay))
            throw ConfigError("error variances must be positive and finite");
    }
};

struct ObservationTriple
{
    double aod_rad = 0.0;
    double aoa_rad = 0.0;
    double delay_s = 0.0;
};

/// Observed (AoD, AoA, delay) triples, one per composite path in
/// composite-index order.
struct SensingObservation
{
    std::vector<ObservationTriple> triples;
    std::size_t l_prime = 0;
    bool reciprocal_only = false;
    geom::SlotOrder slot_order = geom::SlotOrder::Aod;

    std::size_t expected_size() const { return reciprocal_only ? l_prime : l_prime * l_prime; }

    std::vector<std::pair<std::size_t, std::size_t>> slots() const
    {
        return geom::composite_slots(l_prime, reciprocal_only);
    }

    void validate() const
    {
        if (l_prime == 0 || triples.size() != expected_size())
            throw InvalidObservationError("observation size does not match l_prime");
        for (const auto &t : triples)
        {
            if (!std::isfinite(t.aod_rad) || !std::isfinite(t.aoa_rad) || !(t.delay_s > 0.0) ||
                !std::isfinite(t.delay_s))
                throw InvalidObservationError("observation contains a non-finite angle or non-positive delay");
        }
    }
};

/// Noiseless observation of the composites built from `w`.
inline SensingObservation observation_from_knowledge(const geom::CommChannelKnowledge &w, bool reciprocal_only)
{
    SensingObservation obs;
    obs.l_prime = w.l_prime();
    obs.reciprocal_only = reciprocal_only;
    obs.slot_order = w.order;
    for (const auto &c : geom::enumerate_composite_paths(w, reciprocal_only))
        obs.triples.push_back({c.aod_rad, c.aoa_rad, c.delay_s});
    return obs;
}

/// Adds independent zero-mean Gaussian errors to every component. Angles are
/// wrapped; a delay draw that would be non-positive is redrawn.
template <class Rng>
SensingObservation perturb_observation(SensingObservation obs, const ErrorSpec &err, Rng &rng)
{
    err.validate();
    std::normal_distribution<double> n01(0.0, 1.0);
    const double sa = std::sqrt(err.var_aod), sb = std::sqrt(err.var_aoa), st = std::sqrt(err.var_delay);
    for (auto &t : obs.triples)
    {
        t.aod_rad = wrap_angle(t.aod_rad + sa * n01(rng));
        t.aoa_rad = wrap_angle(t.aoa_rad + sb * n01(rng));
        double d = t.delay_s + st * n01(rng);
        for (int tries = 0; !(d > 0.0) && tries < 1000; ++tries)
            d = t.delay_s + st * n01(rng);
        if (!(d > 0.0))
            throw InvalidObservationError("could not draw a positive noisy delay");
        t.delay_s = d;
    }
    return obs;
}

template <class Rng>
SensingObservation synthesize_observation(const geom::Environment &env, Point2 target, const ErrorSpec &err,
                                          std::size_t l_prime, bool reciprocal_only, geom::SlotOrder order,
                                          Rng &rng)
{
    const auto w = geom::dominant_paths(env, target, l_prime, order);
    return perturb_observation(observation_from_knowledge(w, reciprocal_only), err, rng);
}

// ---- Likelihood ---------------------------------------------------------

struct NllValue
{
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
};

/// ln N(tau; mu_t + mu_r, var_t + var_r): the closed form of convolving the
/// forward and reverse delay Gaussians.
inline double composite_delay_log_density(double tau, double mu_t, double var_t, double mu_r, double var_r)
{
    const double v = var_t + var_r;
    const double r = tau - mu_t - mu_r;
    return -0.5 * std::log(2.0 * kPi * v) - 0.5 * r * r / v;
}

namespace detail
{

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Negative log-likelihood (and optionally its gradient) from a map evaluated
// at the query location. `meas` adds observation error variances on top of
// the map's own variances.
inline NllValue nll_from_map(const std::vector<GaussianPathDist> &d, const MapJacobian *jac,
                             const SensingObservation &obs, const std::optional<ErrorSpec> &meas)
{
    const double m_aod = meas ? meas->var_aod : 0.0;
    const double m_aoa = meas ? meas->var_aoa : 0.0;
    const double m_delay = meas ? meas->var_delay : 0.0;
    NllValue out;
    const auto slots = obs.slots();
    auto row = [&](std::size_t slot, int k) { return jac->row(static_cast<Eigen::Index>(4 * slot + k)).transpose(); };

    for (std::size_t l = 0; l < slots.size(); ++l)
    {
        const auto [t, r] = slots[l];
        const auto &z = obs.triples[l];
        const auto &ft = d[t];
        const auto &fr = d[r];

        const double r1 = wrap_angle(z.aod_rad - ft.mu_theta);
        const double v1 = ft.var_theta + m_aod;
        const double r2 = wrap_angle(z.aoa_rad - fr.mu_theta);
        const double v2 = fr.var_theta + m_aoa;
        const double r3 = z.delay_s - ft.mu_tau - fr.mu_tau;
        const double v3 = ft.var_tau + fr.var_tau + m_delay;

        out.value += 3.0 * kHalfLog2Pi + 0.5 * (std::log(v1) + std::log(v2) + std::log(v3)) +
                     0.5 * (r1 * r1 / v1 + r2 * r2 / v2 + r3 * r3 / v3);

        if (jac)
        {
            out.gradient += -(r1 / v1) * row(t, 0) + ((v1 - r1 * r1) / (2.0 * v1 * v1)) * row(t, 1);
            out.gradient += -(r2 / v2) * row(r, 0) + ((v2 - r2 * r2) / (2.0 * v2 * v2)) * row(r, 1);
            out.gradient += -(r3 / v3) * (row(t, 2) + row(r, 2)) +
                            ((v3 - r3 * r3) / (2.0 * v3 * v3)) * (row(t, 3) + row(r, 3));
        }
    }
    return out;
}

template <AngleDelayMap M>
void check_compatible(const M &map, const SensingObservation &obs)
{
    if (map.l_prime() != obs.l_prime)
        throw ConfigError("observation l_prime (" + std::to_string(obs.l_prime) + ") does not match the map (" +
                          std::to_string(map.l_prime()) + ")");
    if (map.slot_order() != obs.slot_order)
        throw ConfigError(std::string("observation slot order (") + geom::to_string(obs.slot_order) +
                          ") does not match the map (" + geom::to_string(map.slot_order()) + ")");
    obs.validate();
}

} // namespace detail

/// Negative log-likelihood of `obs` for a target at `x`.
template <AngleDelayMap M>
double sensing_nll(const M &map, const SensingObservation &obs, Point2 x, const std::optional<ErrorSpec> &meas = {})
{
    detail::check_compatible(map, obs);
    return detail::nll_from_map(map.distributions(x), nullptr, obs, meas).value;
}

template <AngleDelayMap M>
NllValue sensing_nll_with_gradient(const M &map, const SensingObservation &obs, Point2 x,
                                   const std::optional<ErrorSpec> &meas = {})
{
    detail::check_compatible(map, obs);
    const auto ev = map.evaluate(x);
    return detail::nll_from_map(ev.dists, &ev.jacobian, obs, meas);
}

/// Gradient of sensing_nll with respect to the target location (per meter).
template <AngleDelayMap M>
Eigen::Vector2d sensing_nll_gradient(const M &map, const SensingObservation &obs, Point2 x,
                                     const std::optional<ErrorSpec> &meas = {})
{
    return sensing_nll_with_gradient(map, obs, x, meas).gradient;
}

// ---- Gradient-descent localizer ----------------------------------------

struct LocalizerConfig
{
    double step_size = 1.0;       // initial eta, m^2 per unit of nll
    std::size_t max_iters = 300;
    double grad_tol = 1e-6;       // stop when |grad| falls below this
    double step_tol = 1e-7;       // m, stop when an accepted step is shorter
    std::size_t grid_nx = 10;
    std::size_t grid_ny = 10;
    std::size_t random_starts = 0; // extra uniform starts drawn from rng_seed
    std::uint64_t rng_seed = 0;
    std::size_t max_halvings = 60;
    double step_growth = 2.0;      // eta multiplier after an accepted step
    std::size_t screen_nx = 0;     // > 0: also start from the best cells of a screen_nx x screen_ny
    std::size_t screen_ny = 0;     //   nll grid (function values only)
    std::size_t screen_keep = 8;
    std::vector<Point2> extra_starts;
    std::optional<ErrorSpec> measurement_error;

    void validate() const
    {
        if (!(step_size > 0.0) || grid_nx < 1 || grid_ny < 1 || !(step_growth >= 1.0))
            throw ConfigError("invalid localizer configuration");
        if ((screen_nx == 0) != (screen_ny == 0) || (screen_nx > 0 && screen_keep == 0))
            throw ConfigError("screen grid needs both dimensions and screen_keep >= 1");
        if (measurement_error)
            measurement_error->validate();
    }
};

struct LocalizationResult
{
    Point2 estimate;
    double neg_log_likelihood = std::numeric_limits<double>::infinity();
    std::size_t iterations_used = 0;
    bool converged = false;
    Point2 start_used;
    std::size_t starts_tried = 0;
    std::size_t starts_failed = 0;
    std::vector<double> nll_trace; // accepted-iterate nll of the winning start
};

/// Start locations: cell centers of a grid over the bounds, then the extra
/// starts, then seeded uniform draws.
inline std::vector<Point2> multistart_points(Bounds b, const LocalizerConfig &cfg)
{
    std::vector<Point2> pts;
    for (std::size_t j = 0; j < cfg.grid_ny; ++j)
        for (std::size_t i = 0; i < cfg.grid_nx; ++i)
            pts.push_back({(static_cast<double>(i) + 0.5) * b.width / static_cast<double>(cfg.grid_nx),
                           (static_cast<double>(j) + 0.5) * b.height / static_cast<double>(cfg.grid_ny)});
    for (auto p : cfg.extra_starts)
        if (p.finite())
            pts.push_back(b.clamp(p));
    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> ux(0.0, b.width), uy(0.0, b.height);
    for (std::size_t k = 0; k < cfg.random_starts; ++k)
    {
        const double x = ux(rng);
        pts.push_back({x, uy(rng)});
    }
    return pts;
}

namespace detail
{

struct DescentRun
{
    Point2 x;
    double f = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

template <AngleDelayMap M>
double safe_nll(const M &map, const SensingObservation &obs, Point2 x, const std::optional<ErrorSpec> &meas)
{
    try
    {
        const double v = nll_from_map(map.distributions(x), nullptr, obs, meas).value;
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    }
    catch (const Error &)
    {
        return std::numeric_limits<double>::infinity();
    }
}

template <AngleDelayMap M>
std::optional<NllValue> safe_nll_grad(const M &map, const SensingObservation &obs, Point2 x,
                                      const std::optional<ErrorSpec> &meas)
{
    try
    {
        const auto ev = map.evaluate(x);
        auto v = nll_from_map(ev.dists, &ev.jacobian, obs, meas);
        if (!std::isfinite(v.value) || !v.gradient.allFinite())
            return std::nullopt;
        return v;
    }
    catch (const Error &)
    {
        return std::nullopt;
    }
}

// Projected gradient descent x <- clamp(x - eta * grad) with step halving on
// any nll increase and geometric growth after each accepted step.
template <AngleDelayMap M>
DescentRun descend(const M &map, const SensingObservation &obs, Point2 start, const LocalizerConfig &cfg,
                   bool keep_trace)
{
    const Bounds b = map.bounds();
    DescentRun run;
    run.x = b.clamp(start);
    auto fg = safe_nll_grad(map, obs, run.x, cfg.measurement_error);
    if (!fg)
        return run;
    run.f = fg->value;
    if (keep_trace)
        run.trace.push_back(run.f);
    double eta = cfg.step_size;

    for (std::size_t k = 0; k < cfg.max_iters; ++k)
    {
        if (fg->gradient.norm() < cfg.grad_tol)
        {
            run.converged = true;
            break;
        }
        bool accepted = false;
        Point2 xn;
        double fn = 0.0;
        for (std::size_t h = 0; h <= cfg.max_halvings; ++h, eta *= 0.5)
        {
            xn = b.clamp({run.x.x - eta * fg->gradient.x(), run.x.y - eta * fg->gradient.y()});
            fn = safe_nll(map, obs, xn, cfg.measurement_error);
            if (fn <= run.f)
            {
                accepted = true;
                break;
            }
        }
        ++run.iterations;
        if (!accepted)
        {
            // No descent at any tried step length: a stationary point up to resolution.
            run.converged = true;
            break;
        }
        const double moved = distance(xn, run.x);
        auto next = safe_nll_grad(map, obs, xn, cfg.measurement_error);
        if (!next)
            break;
        run.x = xn;
        run.f = next->value;
        fg = next;
        if (keep_trace)
            run.trace.push_back(run.f);
        if (moved < cfg.step_tol)
        {
            run.converged = true;
            break;
        }
        eta *= cfg.step_growth;
    }
    return run;
}

} // namespace detail

/// Maximum-likelihood target location by multistart projected gradient
/// descent on the CADM sensing likelihood; keeps the lowest final nll.
template <AngleDelayMap M>
LocalizationResult localize_ckm(const M &map, const SensingObservation &obs, const LocalizerConfig &cfg)
{
    cfg.validate();
    detail::check_compatible(map, obs);
    auto starts = multistart_points(map.bounds(), cfg);
    if (cfg.screen_nx > 0)
    {
        auto screen = cfg;
        screen.grid_nx = cfg.screen_nx;
        screen.grid_ny = cfg.screen_ny;
        screen.extra_starts.clear();
        screen.random_starts = 0;
        const auto cells = multistart_points(map.bounds(), screen);
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            scored.emplace_back(detail::safe_nll(map, obs, cells[i], cfg.measurement_error), i);
        const std::size_t keep = std::min(cfg.screen_keep, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
        for (std::size_t i = 0; i < keep; ++i)
            if (std::isfinite(scored[i].first))
                starts.push_back(cells[scored[i].second]);
    }

    LocalizationResult best;
    best.starts_tried = starts.size();
    for (const auto &s : starts)
    {
        auto run = detail::descend(map, obs, s, cfg, true);
        if (!std::isfinite(run.f))
        {
            ++best.starts_failed;
            continue;
        }
        if (run.f < best.neg_log_likelihood)
        {
            best.estimate = run.x;
            best.neg_log_likelihood = run.f;
            best.iterations_used = run.iterations;
            best.converged = run.converged;
            best.start_used = s;
            best.nll_trace = std::move(run.trace);
        }
    }
    if (!std::isfinite(best.neg_log_likelihood))
        throw LocalizationFailureError("every start produced a non-finite likelihood");
    return best;
}

// ---- Geometry baselines -------------------------------------------------

/// Closed-form LoS localization from one (angle, round-trip delay) pair.
inline Point2 localize_geometry_los(double angle_rad, double delay_s, Point2 bs)
{
    return geom::invert_los(angle_rad, delay_s, bs);
}

/// Treats the shortest-delay composite as if it were the LoS echo.
inline Point2 localize_geometry_nlos(const SensingObservation &obs, Point2 bs)
{
    if (obs.triples.empty())
        throw InvalidObservationError("observation is empty");
    const auto it = std::min_element(obs.triples.begin(), obs.triples.end(),
                                     [](const auto &a, const auto &b) { return a.delay_s < b.delay_s; });
    return geom::invert_los(it->aoa_rad, it->delay_s, bs);
}

} // namespace ckmsense::sensing

#endif
