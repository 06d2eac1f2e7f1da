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

#ifndef CKMSENSE_CRLB_HPP
#define CKMSENSE_CRLB_HPP

#include "channel_map.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "sensing.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ckmsense::crlb
{

enum class BoundKind
{
    ClosedForm, // J^T Sigma^-1 J with variances frozen at the evaluation point
    MonteCarlo  // expectation of the full score outer product
};

inline const char *to_string(BoundKind k) { return k == BoundKind::ClosedForm ? "closed-form" : "monte-carlo"; }

struct FimReport
{
    Eigen::Matrix2d fim = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d crlb = Eigen::Matrix2d::Constant(std::numeric_limits<double>::infinity());
    double trace_crlb = std::numeric_limits<double>::infinity(); // m^2
    std::size_t jacobian_rows = 0;
    bool singular = true;
    BoundKind kind = BoundKind::ClosedForm;
    std::size_t n_samples = 0;  // Monte-Carlo draws used
    std::size_t n_excluded = 0; // Monte-Carlo draws with a non-finite score
    std::string failure;        // non-empty when the point could not be evaluated
};

/// Condition-number limit beyond which the FIM is reported as singular.
inline constexpr double kMaxCondition = 1e12;

/// Symmetrizes, inverts with a condition guard, and fills a report.
inline FimReport report_from_fim(const Eigen::Matrix2d &fim_in, std::size_t rows, BoundKind kind)
{
    FimReport rep;
    rep.fim = 0.5 * (fim_in + fim_in.transpose());
    rep.jacobian_rows = rows;
    rep.kind = kind;
    if (!rep.fim.allFinite())
        return rep;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(rep.fim, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(1);
    if (!(lmax > 0.0) || lmin <= lmax / kMaxCondition)
        return rep;
    rep.crlb = rep.fim.inverse();
    rep.trace_crlb = rep.crlb.trace();
    rep.singular = false;
    return rep;
}

/// I = sum_i J_i^T J_i / var_i for independent scalar observations.
inline FimReport fim_from_rows(const Eigen::Ref<const Eigen::MatrixX2d> &jacobian, const Eigen::VectorXd &variances)
{
    if (jacobian.rows() != variances.size())
        throw ConfigError("Jacobian rows and variance count differ");
    if (!jacobian.allFinite())
        throw NumericFailureError("Jacobian is not finite");
    for (Eigen::Index i = 0; i < variances.size(); ++i)
        if (!(variances(i) > 0.0))
            throw ConfigError("row variances must be positive");
    const Eigen::Matrix2d fim = jacobian.transpose() * variances.cwiseInverse().asDiagonal() * jacobian;
    return report_from_fim(fim, static_cast<std::size_t>(jacobian.rows()), BoundKind::ClosedForm);
}

/// Closed-form FIM for a 3L x 2 Jacobian whose rows cycle (AoD, AoA, delay)
/// with constant error variances.
inline FimReport fim_constant_variance(const Eigen::Ref<const Eigen::MatrixX2d> &jacobian, const sensing::ErrorSpec &err)
{
    err.validate();
    if (jacobian.rows() % 3 != 0)
        throw ConfigError("Jacobian must have 3L rows");
    Eigen::VectorXd v(jacobian.rows());
    for (Eigen::Index i = 0; i < v.size(); i += 3)
        v.segment<3>(i) << err.var_aod, err.var_aoa, err.var_delay;
    return fim_from_rows(jacobian, v);
}

/// Composite-mean Jacobian (3L x 2) and per-row total variances of a map at x.
struct Linearization
{
    Eigen::MatrixX2d jacobian;
    Eigen::VectorXd variances;
};

inline Linearization linearize(const MapEvaluation &ev, std::size_t l_prime, bool reciprocal_only,
                               const std::optional<sensing::ErrorSpec> &meas)
{
    const auto slots = geom::composite_slots(l_prime, reciprocal_only);
    Linearization lin;
    lin.jacobian.resize(static_cast<Eigen::Index>(3 * slots.size()), 2);
    lin.variances.resize(static_cast<Eigen::Index>(3 * slots.size()));
    const double ma = meas ? meas->var_aod : 0.0, mb = meas ? meas->var_aoa : 0.0, mt = meas ? meas->var_delay : 0.0;
    for (std::size_t l = 0; l < slots.size(); ++l)
    {
        const auto [t, r] = slots[l];
        const auto i = static_cast<Eigen::Index>(3 * l);
        const auto jt = static_cast<Eigen::Index>(4 * t), jr = static_cast<Eigen::Index>(4 * r);
        lin.jacobian.row(i) = ev.jacobian.row(jt);
        lin.jacobian.row(i + 1) = ev.jacobian.row(jr);
        lin.jacobian.row(i + 2) = ev.jacobian.row(jt + 2) + ev.jacobian.row(jr + 2);
        lin.variances(i) = ev.dists[t].var_theta + ma;
        lin.variances(i + 1) = ev.dists[r].var_theta + mb;
        lin.variances(i + 2) = ev.dists[t].var_tau + ev.dists[r].var_tau + mt;
    }
    return lin;
}

/// Closed-form bound of a map-based likelihood with variances frozen at x.
template <AngleDelayMap M>
FimReport fim_closed_form(const M &map, Point2 x, bool reciprocal_only, const std::optional<sensing::ErrorSpec> &meas)
{
    if (meas)
        meas->validate();
    const auto lin = linearize(map.evaluate(x), map.l_prime(), reciprocal_only, meas);
    return fim_from_rows(lin.jacobian, lin.variances);
}

/// Single LoS echo localized from its AoA and delay only (AoD unused).
inline FimReport fim_geometry_los(Point2 bs, Point2 x, const sensing::ErrorSpec &err)
{
    const Point2 d = x - bs;
    const double r2 = d.x * d.x + d.y * d.y;
    const double r = std::sqrt(r2);
    if (!(r > 0.0))
        throw DegenerateGeometryError("BS and target coincide");
    Eigen::Matrix<double, 3, 2> j;
    j << 0.0, 0.0,                                             // AoD: not used
        -d.y / r2, d.x / r2,                                   // AoA
        2.0 * d.x / (r * kSpeedOfLight), 2.0 * d.y / (r * kSpeedOfLight); // round-trip delay
    return fim_constant_variance(j, err);
}

/// Fisher information as the sample mean of score outer products, with
/// observations drawn from the map's own likelihood at x.
template <AngleDelayMap M>
FimReport fim_monte_carlo(const M &map, Point2 x, const sensing::ErrorSpec &err, std::size_t n_samples,
                          bool reciprocal_only, std::uint64_t seed)
{
    if (n_samples < 1)
        throw ConfigError("Monte-Carlo FIM needs at least one sample");
    err.validate();
    const auto ev = map.evaluate(x);
    const auto lin = linearize(ev, map.l_prime(), reciprocal_only, err);

    sensing::SensingObservation obs;
    obs.l_prime = map.l_prime();
    obs.slot_order = map.slot_order();
    obs.reciprocal_only = reciprocal_only;
    obs.triples.resize(obs.expected_size());
    const auto slots = obs.slots();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    std::size_t used = 0, excluded = 0;
    for (std::size_t s = 0; s < n_samples; ++s)
    {
        for (std::size_t l = 0; l < slots.size(); ++l)
        {
            const auto [t, r] = slots[l];
            const auto i = static_cast<Eigen::Index>(3 * l);
            auto &z = obs.triples[l];
            z.aod_rad = wrap_angle(ev.dists[t].mu_theta + std::sqrt(lin.variances(i)) * n01(rng));
            z.aoa_rad = wrap_angle(ev.dists[r].mu_theta + std::sqrt(lin.variances(i + 1)) * n01(rng));
            z.delay_s = ev.dists[t].mu_tau + ev.dists[r].mu_tau + std::sqrt(lin.variances(i + 2)) * n01(rng);
        }
        const Eigen::Vector2d score = sensing::detail::nll_from_map(ev.dists, &ev.jacobian, obs, err).gradient;
        if (!score.allFinite())
        {
            ++excluded;
            continue;
        }
        acc += score * score.transpose();
        ++used;
    }
    FimReport rep = report_from_fim(used > 0 ? Eigen::Matrix2d(acc / static_cast<double>(used))
                                             : Eigen::Matrix2d::Zero().eval(),
                                    static_cast<std::size_t>(lin.jacobian.rows()), BoundKind::MonteCarlo);
    rep.n_samples = used;
    rep.n_excluded = excluded;
    return rep;
}

struct SweepOptions
{
    bool reciprocal_only = false;
    BoundKind kind = BoundKind::ClosedForm;
    std::size_t n_samples = 100000; // Monte-Carlo only
    std::uint64_t seed = 0;         // Monte-Carlo only
};

/// Evaluates the bound at x for each error level. A point that fails is
/// reported with `failure` set and a singular flag; the sweep continues.
template <AngleDelayMap M>
std::vector<FimReport> crlb_sweep(const M &map, Point2 x, const std::vector<sensing::ErrorSpec> &errs,
                                  const SweepOptions &opt = {})
{
    std::vector<FimReport> out;
    out.reserve(errs.size());
    for (std::size_t i = 0; i < errs.size(); ++i)
    {
        try
        {
            if (opt.kind == BoundKind::ClosedForm)
                out.push_back(fim_closed_form(map, x, opt.reciprocal_only, errs[i]));
            else
                out.push_back(fim_monte_carlo(map, x, errs[i], opt.n_samples, opt.reciprocal_only,
                                              derive_seed(opt.seed, {i})));
        }
        catch (const std::exception &e)
        {
            FimReport rep;
            rep.kind = opt.kind;
            rep.failure = e.what();
            out.push_back(rep);
        }
    }
    return out;
}

} // namespace ckmsense::crlb

#endif
