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

#include <ckmsense/bench.hpp>
#include <ckmsense/channel_map.hpp>
#include <ckmsense/sensing.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

using namespace ckmsense;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
double log_normal_pdf(double x, double mu, double var)
{
    return -0.5 * std::log(2.0 * kPi * var) - 0.5 * (x - mu) * (x - mu) / var;
}

// Direct transcription of the likelihood: product over composites of the
// forward-angle, reverse-angle and summed-delay densities.
double oracle_nll(const std::vector<GaussianPathDist> &d, const sensing::SensingObservation &obs,
                  const sensing::ErrorSpec &meas)
{
    double s = 0.0;
    std::size_t l = 0;
    for (std::size_t t = 0; t < obs.l_prime; ++t)
        for (std::size_t r = 0; r < obs.l_prime; ++r)
        {
            if (obs.reciprocal_only && t != r)
                continue;
            const auto &z = obs.triples[l++];
            s -= log_normal_pdf(d[t].mu_theta + wrap_angle(z.aod_rad - d[t].mu_theta), d[t].mu_theta,
                                d[t].var_theta + meas.var_aod);
            s -= log_normal_pdf(d[r].mu_theta + wrap_angle(z.aoa_rad - d[r].mu_theta), d[r].mu_theta,
                                d[r].var_theta + meas.var_aoa);
            s -= log_normal_pdf(z.delay_s, d[t].mu_tau + d[r].mu_tau, d[t].var_tau + d[r].var_tau + meas.var_delay);
        }
    return s;
}

geom::Environment random_env(std::mt19937_64 &rng, std::size_t n, bool los_blocked)
{
    bench::ScenarioConfig cfg;
    cfg.n_scatterers = n;
    cfg.l_prime = std::min<std::size_t>(n, 5);
    auto env = bench::generate_scene(cfg, rng).env;
    env.los_blocked = los_blocked;
    return env;
}
} // namespace

TEST_CASE("Composite delay density equals the convolution integral")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> um(50e-9, 400e-9), us(1e-9, 40e-9), uz(-3.0, 3.0);
    for (int i = 0; i < 20; ++i)
    {
        const double mt = um(rng), mr = um(rng), st = us(rng), sr = us(rng);
        const double tau = mt + mr + uz(rng) * std::hypot(st, sr);
        auto integrand = [&](double u) {
            return std::exp(log_normal_pdf(u, mt, st * st) + log_normal_pdf(tau - u, mr, sr * sr));
        };
        const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            integrand, mt - 12 * st, mt + 12 * st, 15, 1e-13);
        CHECK_THAT(std::exp(sensing::composite_delay_log_density(tau, mt, st * st, mr, sr * sr)), WithinRel(q, 1e-8));
    }
}

TEST_CASE("Sensing nll matches the direct product of densities")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    const auto meas = sensing::ErrorSpec::from_std(0.2, 0.3, 15e-9);
    for (bool recip : {false, true})
        for (int i = 0; i < 10; ++i)
        {
            auto m = cadm::CadmModel::random(3, {100.0, 100.0}, rng, {16, 16});
            const auto env = random_env(rng, 8, false);
            const Point2 tgt = bench::draw_target(bench::ScenarioConfig{}, env, rng);
            const auto obs = sensing::synthesize_observation(env, tgt, meas, 3, recip, geom::SlotOrder::Aod, rng);
            const Point2 x{u(rng), u(rng)};
            const auto d = m.distributions(x);
            CHECK_THAT(sensing::sensing_nll(m, obs, x, meas), WithinRel(oracle_nll(d, obs, meas), 1e-12));
            CHECK_THAT(sensing::sensing_nll(m, obs, x), WithinRel(oracle_nll(d, obs, {0, 0, 0}), 1e-12));
        }
}

TEST_CASE("Sensing nll gradient agrees with central differences")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(1.0, 99.0);
    const auto meas = sensing::ErrorSpec::from_std(0.1, 0.1, 20e-9);
    int checked = 0;
    for (int i = 0; i < 60; ++i)
    {
        const auto env = random_env(rng, 10, i % 2 == 0);
        const GeometryMap map(env, 4, 1e-3, 4e-18);
        const Point2 tgt = bench::draw_target(bench::ScenarioConfig{}, env, rng);
        const auto obs = sensing::synthesize_observation(env, tgt, meas, 4, false, geom::SlotOrder::Aod, rng);
        const Point2 x{u(rng), u(rng)};
        const double h = 1e-5;
        // skip points whose path ranking changes inside the stencil
        auto ids = [&](Point2 p) {
            std::vector<int> v;
            for (const auto &path : geom::single_bounce_paths(env, p, 4).paths)
                v.push_back(path.scatterer);
            return v;
        };
        const auto base = ids(x);
        if (ids(x + Point2{h, 0}) != base || ids(x - Point2{h, 0}) != base || ids(x + Point2{0, h}) != base ||
            ids(x - Point2{0, h}) != base)
            continue;
        const auto g = sensing::sensing_nll_gradient(map, obs, x, meas);
        const Eigen::Vector2d fd((sensing::sensing_nll(map, obs, x + Point2{h, 0}, meas) -
                                  sensing::sensing_nll(map, obs, x - Point2{h, 0}, meas)) /
                                     (2 * h),
                                 (sensing::sensing_nll(map, obs, x + Point2{0, h}, meas) -
                                  sensing::sensing_nll(map, obs, x - Point2{0, h}, meas)) /
                                     (2 * h));
        CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
        ++checked;
    }
    CHECK(checked > 40);
}

TEST_CASE("Observation construction and perturbation")
{
    std::mt19937_64 rng(3);
    const auto env = random_env(rng, 10, true);
    const auto w = geom::single_bounce_paths(env, {30.0, 40.0}, 5);
    const auto clean = sensing::observation_from_knowledge(w, false);
    REQUIRE(clean.triples.size() == 25);
    CHECK(sensing::observation_from_knowledge(w, true).triples.size() == 5);
    const auto comp = geom::enumerate_composite_paths(w);
    for (std::size_t l = 0; l < 25; ++l)
    {
        CHECK(clean.triples[l].aod_rad == comp[l].aod_rad);
        CHECK(clean.triples[l].aoa_rad == comp[l].aoa_rad);
        CHECK(clean.triples[l].delay_s == comp[l].delay_s);
    }

    // noise statistics over many draws
    const auto err = sensing::ErrorSpec::from_std(0.05, 0.07, 3e-9);
    double s1 = 0, s2 = 0, d1 = 0, d2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
    {
        const auto z = sensing::perturb_observation(clean, err, rng);
        const double a = wrap_angle(z.triples[7].aoa_rad - clean.triples[7].aoa_rad);
        const double t = z.triples[7].delay_s - clean.triples[7].delay_s;
        s1 += a;
        s2 += a * a;
        d1 += t;
        d2 += t * t;
        for (const auto &tr : z.triples)
        {
            REQUIRE(tr.delay_s > 0.0);
            REQUIRE(tr.aod_rad > -kPi);
            REQUIRE(tr.aod_rad <= kPi);
        }
    }
    CHECK(std::abs(s1 / n) < 5 * 0.07 / std::sqrt(n));
    CHECK_THAT(std::sqrt(s2 / n), WithinRel(0.07, 0.03));
    CHECK(std::abs(d1 / n) < 5 * 3e-9 / std::sqrt(n));
    CHECK_THAT(std::sqrt(d2 / n), WithinRel(3e-9, 0.03));
}

TEST_CASE("Measurement error adds to the map variances")
{
    std::mt19937_64 rng(5);
    const auto env = random_env(rng, 6, false);
    const auto obs = sensing::synthesize_observation(env, {40.0, 60.0}, sensing::ErrorSpec::from_std(0.1, 0.1, 1e-8),
                                                     3, false, geom::SlotOrder::Aod, rng);
    const GeometryMap narrow(env, 3, 0.01, 1e-18);
    const GeometryMap wide(env, 3, 0.01 + 0.04, 1e-18 + 0.5 * 9e-18);
    const sensing::ErrorSpec extra{0.04, 0.04, 9e-18};
    for (const Point2 x : {Point2{20.0, 20.0}, Point2{70.0, 80.0}})
        CHECK_THAT(sensing::sensing_nll(narrow, obs, x, extra), WithinRel(sensing::sensing_nll(wide, obs, x), 1e-12));
}

TEST_CASE("Incompatible observations are rejected")
{
    std::mt19937_64 rng(6);
    const auto env = random_env(rng, 6, true);
    const GeometryMap map(env, 3, 0.01, 1e-18);
    auto obs = sensing::synthesize_observation(env, {40.0, 60.0}, sensing::ErrorSpec::from_std(0.1, 0.1, 1e-8), 4,
                                               false, geom::SlotOrder::Aod, rng);
    CHECK_THROWS_AS(sensing::sensing_nll(map, obs, {10.0, 10.0}), ConfigError);
    obs = sensing::synthesize_observation(env, {40.0, 60.0}, sensing::ErrorSpec::from_std(0.1, 0.1, 1e-8), 3, false,
                                          geom::SlotOrder::Gain, rng);
    CHECK_THROWS_WITH(sensing::sensing_nll(map, obs, {10.0, 10.0}), Catch::Matchers::ContainsSubstring("slot order"));
    obs.slot_order = geom::SlotOrder::Aod;
    obs.triples.pop_back();
    CHECK_THROWS_AS(sensing::sensing_nll(map, obs, {10.0, 10.0}), InvalidObservationError);
    CHECK_THROWS_AS(sensing::ErrorSpec::from_std(0.0, 0.1, 1e-9).validate(), ConfigError);
}
