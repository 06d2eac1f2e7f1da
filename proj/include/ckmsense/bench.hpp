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

#ifndef CKMSENSE_BENCH_HPP
#define CKMSENSE_BENCH_HPP

#include "cadm.hpp"
#include "common.hpp"
#include "crlb.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "sensing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ckmsense::bench
{

enum class Method
{
    GeoLos,     // closed-form inversion of the LoS echo, mixed LoS/NLoS scene
    GeoNlos,    // shortest-delay echo treated as LoS, pure NLoS scene
    CkmLos,     // CADM likelihood over all L'^2 composites, mixed scene
    CkmNlos,    // CADM likelihood over all L'^2 composites, pure NLoS scene
    CkmNlosConv // CADM likelihood over the L' reciprocal composites only, pure NLoS scene
};

inline const std::vector<Method> kAllMethods{Method::GeoLos, Method::GeoNlos, Method::CkmLos, Method::CkmNlos,
                                             Method::CkmNlosConv};

inline const char *to_string(Method m)
{
    switch (m)
    {
    case Method::GeoLos:
        return "geo-los";
    case Method::GeoNlos:
        return "geo-nlos";
    case Method::CkmLos:
        return "ckm-los";
    case Method::CkmNlos:
        return "ckm-nlos";
    case Method::CkmNlosConv:
        return "ckm-nlos-conv";
    }
    return "?";
}

inline Method parse_method(const std::string &s)
{
    for (auto m : kAllMethods)
        if (s == to_string(m))
            return m;
    throw ConfigError("unknown method '" + s + "'");
}

inline bool is_ckm(Method m) { return m == Method::CkmLos || m == Method::CkmNlos || m == Method::CkmNlosConv; }
inline bool uses_los_scene(Method m) { return m == Method::GeoLos || m == Method::CkmLos; }

struct ScenarioConfig
{
    Bounds area{100.0, 100.0};
    Point2 bs{50.0, 0.0};
    std::size_t n_scatterers = 40;
    std::size_t l_prime = 5;
    geom::SlotOrder slot_order = geom::SlotOrder::Aod;
    std::size_t n_train = 10000;
    std::size_t n_trials = 200;
    std::vector<double> sigma_theta_list{0.05, 0.1, 0.2, 0.3, 0.4, 0.5}; // rad, angle sweep
    std::vector<double> sigma_tau_list{2e-9, 10e-9, 20e-9, 40e-9, 60e-9}; // s, delay sweep
    double fixed_sigma_tau = 20e-9;  // s, held during the angle sweep
    double fixed_sigma_theta = 0.10; // rad, held during the delay sweep
    std::vector<Method> methods = kAllMethods;
    std::uint64_t master_seed = 1;
    double min_separation = 1.0;           // m, between scatterers/BS/target
    bool resample_scene_per_trial = false; // true: new scene and CADMs for every trial
    std::size_t crlb_mc_samples = 100000;  // 0 disables the Monte-Carlo bound column
    std::size_t threads = 0;               // 0: hardware concurrency
    cadm::TrainConfig training;
    sensing::LocalizerConfig localizer;

    void validate() const
    {
        if (!(area.width > 0.0) || !(area.height > 0.0) || !area.contains(bs))
            throw ConfigError("area must be positive and contain the BS");
        if (l_prime == 0 || n_train == 0 || n_trials == 0)
            throw ConfigError("l_prime, n_train and n_trials must be positive");
        if (n_scatterers < l_prime)
            throw ConfigError("n_scatterers must be at least l_prime for a LoS-blocked scene");
        if (sigma_theta_list.empty() || sigma_tau_list.empty())
            throw ConfigError("sweep lists must be non-empty");
        for (double s : sigma_theta_list)
            if (!(s > 0.0))
                throw ConfigError("sigma_theta values must be positive");
        for (double s : sigma_tau_list)
            if (!(s > 0.0))
                throw ConfigError("sigma_tau values must be positive");
        if (!(fixed_sigma_tau > 0.0) || !(fixed_sigma_theta > 0.0))
            throw ConfigError("fixed sweep sigmas must be positive");
        if (methods.empty())
            throw ConfigError("at least one method is required");
        if (!(min_separation >= 0.0))
            throw ConfigError("min_separation must be non-negative");
        training.validate();
        localizer.validate();
    }
};

// ---- Scenes -------------------------------------------------------------

struct Scene
{
    geom::Environment env; // LoS blocked
    Point2 target;
};

namespace detail
{
inline constexpr std::size_t kPlacementRetries = 10000;

template <class Rng>
Point2 draw_separated(const ScenarioConfig &cfg, const std::vector<Point2> &avoid, Rng &rng, const char *what)
{
    std::uniform_real_distribution<double> ux(0.0, cfg.area.width), uy(0.0, cfg.area.height);
    for (std::size_t t = 0; t < kPlacementRetries; ++t)
    {
        const double x = ux(rng);
        const Point2 p{x, uy(rng)};
        const bool ok = std::all_of(avoid.begin(), avoid.end(),
                                    [&](Point2 q) { return distance(p, q) >= cfg.min_separation; });
        if (ok)
            return p;
    }
    throw ConfigError(std::string("could not place ") + what + " with the required separation");
}
} // namespace detail

/// Draws a target uniformly in the area, at least min_separation from the BS
/// and every scatterer.
template <class Rng>
Point2 draw_target(const ScenarioConfig &cfg, const geom::Environment &env, Rng &rng)
{
    std::vector<Point2> avoid{env.bs};
    for (const auto &s : env.scatterers)
        avoid.push_back(s.position);
    return detail::draw_separated(cfg, avoid, rng, "target");
}

/// Uniform scatterers with reflectivity in (0, 1], plus one target.
template <class Rng>
Scene generate_scene(const ScenarioConfig &cfg, Rng &rng)
{
    if (cfg.n_scatterers < cfg.l_prime)
        throw ConfigError("n_scatterers must be at least l_prime for a LoS-blocked scene");
    Scene scene;
    scene.env.bs = cfg.bs;
    scene.env.bounds = cfg.area;
    scene.env.los_blocked = true;
    std::vector<Point2> placed{cfg.bs};
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < cfg.n_scatterers; ++i)
    {
        const Point2 p = detail::draw_separated(cfg, placed, rng, "scatterer");
        placed.push_back(p);
        scene.env.scatterers.push_back({p, 1.0 - u01(rng)});
    }
    scene.env.validate();
    scene.target = draw_target(cfg, scene.env, rng);
    return scene;
}

inline geom::Environment with_los(geom::Environment env, bool los_present)
{
    env.los_blocked = !los_present;
    return env;
}

/// Uniform training locations with their dominant-path ground truth.
template <class Rng>
cadm::TrainingSet build_training_set(const geom::Environment &env, std::size_t n_train, std::size_t l_prime,
                                     geom::SlotOrder order, Rng &rng)
{
    cadm::TrainingSet data;
    data.bounds = env.bounds;
    data.l_prime = l_prime;
    data.slot_order = order;
    data.samples.reserve(n_train);
    std::uniform_real_distribution<double> ux(0.0, env.bounds.width), uy(0.0, env.bounds.height);
    constexpr std::size_t kRetries = 100;
    for (std::size_t i = 0; i < n_train; ++i)
    {
        for (std::size_t t = 0;; ++t)
        {
            const double x = ux(rng);
            const Point2 p{x, uy(rng)};
            try
            {
                data.samples.push_back({p, geom::dominant_paths(env, p, l_prime, order)});
                break;
            }
            catch (const DegenerateGeometryError &)
            {
                if (t + 1 >= kRetries)
                    throw;
            }
        }
    }
    return data;
}

// ---- Sweep context ------------------------------------------------------

/// Scene, target and trained maps shared by every trial of a sweep.
struct SweepContext
{
    ScenarioConfig config;
    geom::Environment env_nlos;
    geom::Environment env_los;
    Point2 scene_target;
    std::optional<cadm::CadmModel> model_nlos;
    std::optional<cadm::CadmModel> model_los;
};

// Seed stream identifiers.
enum : std::uint64_t
{
    kStreamScene = 1,
    kStreamTrainNlos = 2,
    kStreamTrainLos = 3,
    kStreamTarget = 4,
    kStreamNoise = 5,
    kStreamCrlb = 6,
    kStreamTrialScene = 7,
};

using TrainLog = std::function<void(const std::string &label, std::size_t epoch, double loss)>;

inline cadm::TrainedCadm train_for(const ScenarioConfig &cfg, const geom::Environment &env, std::uint64_t seed,
                                   const std::string &label, const TrainLog &log = {})
{
    std::mt19937_64 rng(derive_seed(seed, {0}));
    const auto data = build_training_set(env, cfg.n_train, cfg.l_prime, cfg.slot_order, rng);
    std::function<void(std::size_t, double)> cb;
    if (log)
        cb = [&](std::size_t e, double l) { log(label, e, l); };
    return cadm::cadm_train(data, cfg.training, derive_seed(seed, {1}), cb);
}

inline bool needs_los_model(const ScenarioConfig &cfg)
{
    return std::find(cfg.methods.begin(), cfg.methods.end(), Method::CkmLos) != cfg.methods.end();
}
inline bool needs_nlos_model(const ScenarioConfig &cfg)
{
    return std::any_of(cfg.methods.begin(), cfg.methods.end(),
                       [](Method m) { return m == Method::CkmNlos || m == Method::CkmNlosConv; });
}

/// Generates the fixed scene from the master seed. Trains whichever maps the
/// configured methods need unless they are supplied.
inline SweepContext prepare_context(const ScenarioConfig &cfg, std::optional<cadm::CadmModel> model_nlos = {},
                                    std::optional<cadm::CadmModel> model_los = {}, const TrainLog &log = {})
{
    cfg.validate();
    SweepContext ctx;
    ctx.config = cfg;
    std::mt19937_64 rng(derive_seed(cfg.master_seed, {kStreamScene}));
    auto scene = generate_scene(cfg, rng);
    ctx.env_nlos = with_los(scene.env, false);
    ctx.env_los = with_los(scene.env, true);
    ctx.scene_target = scene.target;
    if (cfg.resample_scene_per_trial)
        return ctx;
    if (needs_nlos_model(cfg))
        ctx.model_nlos = model_nlos ? std::move(model_nlos)
                                    : train_for(cfg, ctx.env_nlos, derive_seed(cfg.master_seed, {kStreamTrainNlos}),
                                                "nlos", log)
                                          .model;
    if (needs_los_model(cfg))
        ctx.model_los = model_los ? std::move(model_los)
                                  : train_for(cfg, ctx.env_los, derive_seed(cfg.master_seed, {kStreamTrainLos}),
                                              "los", log)
                                        .model;
    for (const auto *m : {&ctx.model_nlos, &ctx.model_los})
        if (*m && ((*m)->l_prime() != cfg.l_prime || !((*m)->bounds() == cfg.area) ||
                   (*m)->slot_order() != cfg.slot_order))
            throw ConfigError("supplied CADM does not match the scenario's l_prime, area or slot order");
    return ctx;
}

// ---- Sweep points -------------------------------------------------------

struct SweepPoint
{
    std::string sweep; // "angle" or "delay"
    double sigma_theta = 0.0;
    double sigma_tau = 0.0;
};

inline std::vector<SweepPoint> sweep_points(const ScenarioConfig &cfg)
{
    std::vector<SweepPoint> pts;
    for (double s : cfg.sigma_theta_list)
        pts.push_back({"angle", s, cfg.fixed_sigma_tau});
    for (double s : cfg.sigma_tau_list)
        pts.push_back({"delay", cfg.fixed_sigma_theta, s});
    return pts;
}

// ---- RMSE sweep ---------------------------------------------------------

struct SweepRow
{
    std::string sweep;
    Method method = Method::GeoLos;
    double sigma_theta = 0.0;
    double sigma_tau = 0.0;
    double rmse = 0.0; // m
    std::size_t n_trials = 0;
    double mean_iters = 0.0;
    std::size_t failure_count = 0;
};

struct TrialRecord
{
    std::string sweep;
    Method method = Method::GeoLos;
    double sigma_theta = 0.0;
    double sigma_tau = 0.0;
    std::size_t trial = 0;
    Point2 target;
    Point2 estimate;
    bool ok = false;
    std::size_t iterations = 0;
    double sq_error = 0.0;
};

struct SweepResult
{
    std::vector<SweepRow> rows;
    std::vector<TrialRecord> trials;
};

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written by index; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)> &body)
{
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
            {
                try
                {
                    body(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err)
                        err = std::current_exception();
                }
            }
        });
    for (auto &th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
}

struct TrialOutcome
{
    Point2 estimate;
    bool ok = false;
    std::size_t iterations = 0;
};

/// Localizes one target with one method at one noise level.
inline TrialOutcome run_trial(Method method, const geom::Environment &env, const cadm::CadmModel *model,
                              const ScenarioConfig &cfg, Point2 target, const sensing::ErrorSpec &err,
                              std::uint64_t noise_seed)
{
    TrialOutcome out;
    std::mt19937_64 rng(noise_seed);
    const auto w = geom::dominant_paths(env, target, cfg.l_prime, cfg.slot_order);
    const bool reciprocal = method == Method::CkmNlosConv;
    const auto obs = sensing::perturb_observation(sensing::observation_from_knowledge(w, reciprocal), err, rng);
    try
    {
        switch (method)
        {
        case Method::GeoLos: {
            // The LoS echo is always present in a scene with an unblocked direct path,
            // whether or not it ranks among the dominant communication paths.
            if (env.los_blocked)
                throw DegenerateGeometryError("geometry-LoS needs an unblocked direct path");
            const auto [angle, delay] = geom::los_angle_delay(env.bs, target);
            std::normal_distribution<double> n01(0.0, 1.0);
            const double a = wrap_angle(angle + std::sqrt(err.var_aoa) * n01(rng));
            double d = delay + std::sqrt(err.var_delay) * n01(rng);
            for (int tries = 0; !(d > 0.0) && tries < 1000; ++tries)
                d = delay + std::sqrt(err.var_delay) * n01(rng);
            out.estimate = sensing::localize_geometry_los(a, d, env.bs);
            out.ok = true;
            break;
        }
        case Method::GeoNlos:
            out.estimate = sensing::localize_geometry_nlos(obs, env.bs);
            out.ok = true;
            break;
        case Method::CkmLos:
        case Method::CkmNlos:
        case Method::CkmNlosConv: {
            auto lc = cfg.localizer;
            lc.measurement_error = err;
            lc.rng_seed = noise_seed;
            lc.extra_starts.push_back(sensing::localize_geometry_nlos(obs, env.bs));
            const auto res = sensing::localize_ckm(*model, obs, lc);
            out.estimate = res.estimate;
            out.iterations = res.iterations_used;
            out.ok = true;
            break;
        }
        }
    }
    catch (const Error &)
    {
        out.ok = false;
    }
    if (out.ok && !out.estimate.finite())
        out.ok = false;
    return out;
}

/// Root-mean-square position error of the successful trials.
inline SweepRow aggregate(const SweepPoint &pt, Method m, const std::vector<TrialRecord> &recs)
{
    SweepRow row{pt.sweep, m, pt.sigma_theta, pt.sigma_tau};
    double se = 0.0, iters = 0.0;
    std::size_t ok = 0;
    for (const auto &r : recs)
    {
        ++row.n_trials;
        if (!r.ok)
        {
            ++row.failure_count;
            continue;
        }
        se += r.sq_error;
        iters += static_cast<double>(r.iterations);
        ++ok;
    }
    row.rmse = ok > 0 ? std::sqrt(se / static_cast<double>(ok)) : std::numeric_limits<double>::quiet_NaN();
    row.mean_iters = ok > 0 ? iters / static_cast<double>(ok) : 0.0;
    return row;
}

/// Monte-Carlo RMSE for every (sweep point, method). Points shared by both
/// sweeps are computed once. Targets are common across points and methods.
inline SweepResult run_sweep(const SweepContext &ctx, const TrainLog &log = {})
{
    const auto &cfg = ctx.config;
    const auto points = sweep_points(cfg);

    // Unique noise levels.
    std::vector<std::pair<double, double>> levels;
    std::vector<std::size_t> level_of(points.size());
    for (std::size_t p = 0; p < points.size(); ++p)
    {
        const std::pair<double, double> key{points[p].sigma_theta, points[p].sigma_tau};
        auto it = std::find(levels.begin(), levels.end(), key);
        level_of[p] = static_cast<std::size_t>(it - levels.begin());
        if (it == levels.end())
            levels.push_back(key);
    }

    // Per-trial scenes (only when resampling).
    struct TrialScene
    {
        geom::Environment nlos, los;
        std::optional<cadm::CadmModel> model_nlos, model_los;
    };
    std::vector<TrialScene> trial_scenes;
    if (cfg.resample_scene_per_trial)
    {
        trial_scenes.resize(cfg.n_trials);
        for (std::size_t t = 0; t < cfg.n_trials; ++t)
        {
            std::mt19937_64 rng(derive_seed(cfg.master_seed, {kStreamTrialScene, t}));
            auto sc = generate_scene(cfg, rng);
            trial_scenes[t].nlos = with_los(sc.env, false);
            trial_scenes[t].los = with_los(sc.env, true);
            const auto base = derive_seed(cfg.master_seed, {kStreamTrialScene, t, 1});
            if (needs_nlos_model(cfg))
                trial_scenes[t].model_nlos =
                    train_for(cfg, trial_scenes[t].nlos, derive_seed(base, {kStreamTrainNlos}), "nlos", log).model;
            if (needs_los_model(cfg))
                trial_scenes[t].model_los =
                    train_for(cfg, trial_scenes[t].los, derive_seed(base, {kStreamTrainLos}), "los", log).model;
        }
    }

    // Targets: one per trial, shared by every level and method.
    std::vector<Point2> targets(cfg.n_trials);
    for (std::size_t t = 0; t < cfg.n_trials; ++t)
    {
        std::mt19937_64 rng(derive_seed(cfg.master_seed, {kStreamTarget, t}));
        targets[t] = draw_target(cfg, cfg.resample_scene_per_trial ? trial_scenes[t].nlos : ctx.env_nlos, rng);
    }

    const std::size_t n_methods = cfg.methods.size();
    const std::size_t n_jobs = levels.size() * n_methods * cfg.n_trials;
    std::vector<TrialOutcome> outcomes(n_jobs);
    parallel_for(n_jobs, cfg.threads, [&](std::size_t job) {
        const std::size_t t = job % cfg.n_trials;
        const std::size_t mi = (job / cfg.n_trials) % n_methods;
        const std::size_t li = job / (cfg.n_trials * n_methods);
        const Method m = cfg.methods[mi];
        const auto err = sensing::ErrorSpec::from_std(levels[li].first, levels[li].first, levels[li].second);
        const bool los = uses_los_scene(m);
        const geom::Environment *env = nullptr;
        const cadm::CadmModel *model = nullptr;
        if (cfg.resample_scene_per_trial)
        {
            env = los ? &trial_scenes[t].los : &trial_scenes[t].nlos;
            const auto &opt = los ? trial_scenes[t].model_los : trial_scenes[t].model_nlos;
            model = opt ? &*opt : nullptr;
        }
        else
        {
            env = los ? &ctx.env_los : &ctx.env_nlos;
            const auto &opt = los ? ctx.model_los : ctx.model_nlos;
            model = opt ? &*opt : nullptr;
        }
        if (is_ckm(m) && !model)
            throw ConfigError(std::string("no CADM available for ") + to_string(m));
        outcomes[job] = run_trial(m, *env, model, cfg, targets[t], err,
                                  derive_seed(cfg.master_seed, {kStreamNoise, li, t, static_cast<std::uint64_t>(m)}));
    });

    SweepResult result;
    for (std::size_t p = 0; p < points.size(); ++p)
    {
        for (std::size_t mi = 0; mi < n_methods; ++mi)
        {
            std::vector<TrialRecord> recs;
            for (std::size_t t = 0; t < cfg.n_trials; ++t)
            {
                const auto &o = outcomes[(level_of[p] * n_methods + mi) * cfg.n_trials + t];
                TrialRecord r{points[p].sweep, cfg.methods[mi], points[p].sigma_theta, points[p].sigma_tau, t,
                              targets[t], o.estimate, o.ok, o.iterations};
                if (o.ok)
                {
                    const Point2 d = o.estimate - targets[t];
                    r.sq_error = d.x * d.x + d.y * d.y;
                }
                recs.push_back(r);
            }
            result.rows.push_back(aggregate(points[p], cfg.methods[mi], recs));
            result.trials.insert(result.trials.end(), recs.begin(), recs.end());
        }
    }
    return result;
}

// ---- CRLB sweep ---------------------------------------------------------

struct CrlbRow
{
    std::string sweep;
    Method method = Method::GeoLos;
    double sigma_theta = 0.0;
    double sigma_tau = 0.0;
    double trace_crlb = 0.0; // closed form, m^2 (+inf when singular)
    double fim_xx = 0.0;
    double fim_xy = 0.0;
    double fim_yy = 0.0;
    bool singular = false;
    double trace_crlb_mc = std::numeric_limits<double>::quiet_NaN(); // full-score Monte-Carlo bound
    std::size_t n_samples = 0;
};

/// CRLB at the scene target for every method except geo-nlos, whose
/// scatterer-dependent mapping has no bound.
inline std::vector<CrlbRow> run_crlb_sweep(const SweepContext &ctx)
{
    const auto &cfg = ctx.config;
    std::vector<Method> methods;
    for (auto m : cfg.methods)
        if (m != Method::GeoNlos)
            methods.push_back(m);
    const auto points = sweep_points(cfg);
    std::vector<CrlbRow> rows(points.size() * methods.size());

    parallel_for(rows.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t p = idx / methods.size();
        const Method m = methods[idx % methods.size()];
        const auto err = sensing::ErrorSpec::from_std(points[p].sigma_theta, points[p].sigma_theta, points[p].sigma_tau);
        CrlbRow row{points[p].sweep, m, points[p].sigma_theta, points[p].sigma_tau};
        crlb::FimReport closed;
        std::optional<crlb::FimReport> mc;
        try
        {
            if (m == Method::GeoLos)
            {
                closed = crlb::fim_geometry_los(ctx.env_los.bs, ctx.scene_target, err);
            }
            else
            {
                const auto &model = m == Method::CkmLos ? ctx.model_los : ctx.model_nlos;
                if (!model)
                    throw ConfigError(std::string("no CADM available for ") + to_string(m));
                const bool recip = m == Method::CkmNlosConv;
                closed = crlb::fim_closed_form(*model, ctx.scene_target, recip, err);
                if (cfg.crlb_mc_samples > 0)
                    mc = crlb::fim_monte_carlo(*model, ctx.scene_target, err, cfg.crlb_mc_samples, recip,
                                               derive_seed(cfg.master_seed, {kStreamCrlb, p, static_cast<std::uint64_t>(m)}));
            }
        }
        catch (const std::exception &e)
        {
            closed = crlb::FimReport{};
            closed.failure = e.what();
        }
        row.trace_crlb = closed.trace_crlb;
        row.fim_xx = closed.fim(0, 0);
        row.fim_xy = closed.fim(0, 1);
        row.fim_yy = closed.fim(1, 1);
        row.singular = closed.singular;
        if (mc)
        {
            row.trace_crlb_mc = mc->trace_crlb;
            row.n_samples = mc->n_samples;
        }
        rows[idx] = row;
    });
    return rows;
}

// ---- CSV ----------------------------------------------------------------

inline void write_sweep_csv(const std::vector<SweepRow> &rows, std::ostream &out)
{
    out << "sweep,method,sigma_theta,sigma_tau,rmse,n_trials,mean_iters,failure_count\n";
    for (const auto &r : rows)
        out << r.sweep << "," << to_string(r.method) << "," << io::fmt_double(r.sigma_theta) << ","
            << io::fmt_double(r.sigma_tau) << "," << io::fmt_double(r.rmse) << "," << r.n_trials << ","
            << io::fmt_double(r.mean_iters) << "," << r.failure_count << "\n";
}

inline void write_trials_csv(const std::vector<TrialRecord> &recs, std::ostream &out)
{
    out << "sweep,method,sigma_theta,sigma_tau,trial,target_x,target_y,estimate_x,estimate_y,ok,iterations,sq_error\n";
    for (const auto &r : recs)
        out << r.sweep << "," << to_string(r.method) << "," << io::fmt_double(r.sigma_theta) << ","
            << io::fmt_double(r.sigma_tau) << "," << r.trial << "," << io::fmt_double(r.target.x) << ","
            << io::fmt_double(r.target.y) << "," << io::fmt_double(r.estimate.x) << ","
            << io::fmt_double(r.estimate.y) << "," << (r.ok ? 1 : 0) << "," << r.iterations << ","
            << io::fmt_double(r.sq_error) << "\n";
}

inline void write_crlb_csv(const std::vector<CrlbRow> &rows, std::ostream &out)
{
    out << "sweep,method,sigma_theta,sigma_tau,trace_crlb,fim_xx,fim_xy,fim_yy,singular,trace_crlb_mc,n_samples\n";
    for (const auto &r : rows)
        out << r.sweep << "," << to_string(r.method) << "," << io::fmt_double(r.sigma_theta) << ","
            << io::fmt_double(r.sigma_tau) << "," << io::fmt_double(r.trace_crlb) << "," << io::fmt_double(r.fim_xx)
            << "," << io::fmt_double(r.fim_xy) << "," << io::fmt_double(r.fim_yy) << "," << (r.singular ? 1 : 0)
            << "," << io::fmt_double(r.trace_crlb_mc) << "," << r.n_samples << "\n";
}

} // namespace ckmsense::bench

#endif
