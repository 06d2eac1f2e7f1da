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

#ifndef CKMSENSE_CONFIG_HPP
#define CKMSENSE_CONFIG_HPP

// JSON form of the benchmark configuration. Needs nlohmann/json on the
// include path.

#include "bench.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <set>
#include <string>

namespace ckmsense::config
{

using json = nlohmann::json;

namespace detail
{
inline void reject_unknown(const json &j, const std::set<std::string> &known, const std::string &where)
{
    if (!j.is_object())
        throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void get(const json &j, const char *key, T &out, const std::string &where)
{
    if (!j.contains(key))
        return;
    try
    {
        out = j.at(key).get<T>();
    }
    catch (const json::exception &e)
    {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}
} // namespace detail

inline void apply_training(const json &j, cadm::TrainConfig &t)
{
    const std::string w = "training";
    detail::reject_unknown(j, {"hidden", "epochs", "batch_size", "learning_rate", "final_lr_fraction", "input_range",
                               "loss", "mse_warmup_epochs", "mse_var_theta", "mse_var_tau", "mse_calibrate_variances",
                               "mse_delay_weight", "mse_huber_delta", "smooth_window",
                               "var_floor_theta", "var_floor_tau"},
                           w);
    if (j.contains("hidden"))
    {
        std::vector<long> h;
        detail::get(j, "hidden", h, w);
        t.hidden.assign(h.begin(), h.end());
    }
    detail::get(j, "epochs", t.epochs, w);
    detail::get(j, "batch_size", t.batch_size, w);
    detail::get(j, "learning_rate", t.learning_rate, w);
    detail::get(j, "final_lr_fraction", t.final_lr_fraction, w);
    detail::get(j, "input_range", t.input_range, w);
    if (j.contains("loss"))
    {
        std::string l;
        detail::get(j, "loss", l, w);
        if (l == "nll")
            t.loss = cadm::TrainingLoss::GaussianNll;
        else if (l == "mse")
            t.loss = cadm::TrainingLoss::MeanSquaredError;
        else
            throw ConfigError("training.loss must be \"nll\" or \"mse\"");
    }
    detail::get(j, "mse_warmup_epochs", t.mse_warmup_epochs, w);
    detail::get(j, "mse_var_theta", t.mse_var_theta, w);
    detail::get(j, "mse_var_tau", t.mse_var_tau, w);
    detail::get(j, "mse_calibrate_variances", t.mse_calibrate_variances, w);
    detail::get(j, "mse_delay_weight", t.mse_delay_weight, w);
    detail::get(j, "mse_huber_delta", t.mse_huber_delta, w);
    detail::get(j, "smooth_window", t.smooth_window, w);
    detail::get(j, "var_floor_theta", t.floors.theta, w);
    detail::get(j, "var_floor_tau", t.floors.tau, w);
}

inline void apply_localizer(const json &j, sensing::LocalizerConfig &l)
{
    const std::string w = "localizer";
    detail::reject_unknown(j, {"step_size", "max_iters", "grad_tol", "step_tol", "grid_nx", "grid_ny",
                               "random_starts", "max_halvings", "step_growth", "screen_nx", "screen_ny",
                               "screen_keep"},
                           w);
    detail::get(j, "step_size", l.step_size, w);
    detail::get(j, "max_iters", l.max_iters, w);
    detail::get(j, "grad_tol", l.grad_tol, w);
    detail::get(j, "step_tol", l.step_tol, w);
    detail::get(j, "grid_nx", l.grid_nx, w);
    detail::get(j, "grid_ny", l.grid_ny, w);
    detail::get(j, "random_starts", l.random_starts, w);
    detail::get(j, "max_halvings", l.max_halvings, w);
    detail::get(j, "step_growth", l.step_growth, w);
    detail::get(j, "screen_nx", l.screen_nx, w);
    detail::get(j, "screen_ny", l.screen_ny, w);
    detail::get(j, "screen_keep", l.screen_keep, w);
}

/// Overrides the fields present in `j`; absent keys keep their defaults.
/// Unknown keys are an error.
inline void apply(const json &j, bench::ScenarioConfig &c)
{
    const std::string w = "config";
    detail::reject_unknown(j, {"area", "bs", "n_scatterers", "l_prime", "slot_order", "n_train", "n_trials", "sigma_theta_list",
                               "sigma_tau_list", "fixed_sigma_tau", "fixed_sigma_theta", "methods", "master_seed",
                               "min_separation", "resample_scene_per_trial", "crlb_mc_samples", "threads", "training",
                               "localizer"},
                           w);
    if (j.contains("area"))
    {
        std::array<double, 2> a{};
        detail::get(j, "area", a, w);
        c.area = {a[0], a[1]};
    }
    if (j.contains("bs"))
    {
        std::array<double, 2> b{};
        detail::get(j, "bs", b, w);
        c.bs = {b[0], b[1]};
    }
    detail::get(j, "n_scatterers", c.n_scatterers, w);
    detail::get(j, "l_prime", c.l_prime, w);
    if (j.contains("slot_order"))
    {
        std::string o;
        detail::get(j, "slot_order", o, w);
        c.slot_order = geom::parse_slot_order(o);
    }
    detail::get(j, "n_train", c.n_train, w);
    detail::get(j, "n_trials", c.n_trials, w);
    detail::get(j, "sigma_theta_list", c.sigma_theta_list, w);
    detail::get(j, "sigma_tau_list", c.sigma_tau_list, w);
    detail::get(j, "fixed_sigma_tau", c.fixed_sigma_tau, w);
    detail::get(j, "fixed_sigma_theta", c.fixed_sigma_theta, w);
    if (j.contains("methods"))
    {
        std::vector<std::string> names;
        detail::get(j, "methods", names, w);
        c.methods.clear();
        for (const auto &n : names)
            c.methods.push_back(bench::parse_method(n));
    }
    detail::get(j, "master_seed", c.master_seed, w);
    detail::get(j, "min_separation", c.min_separation, w);
    detail::get(j, "resample_scene_per_trial", c.resample_scene_per_trial, w);
    detail::get(j, "crlb_mc_samples", c.crlb_mc_samples, w);
    detail::get(j, "threads", c.threads, w);
    if (j.contains("training"))
        apply_training(j.at("training"), c.training);
    if (j.contains("localizer"))
        apply_localizer(j.at("localizer"), c.localizer);
}

inline json to_json(const bench::ScenarioConfig &c)
{
    json j;
    j["area"] = {c.area.width, c.area.height};
    j["bs"] = {c.bs.x, c.bs.y};
    j["n_scatterers"] = c.n_scatterers;
    j["l_prime"] = c.l_prime;
    j["slot_order"] = geom::to_string(c.slot_order);
    j["n_train"] = c.n_train;
    j["n_trials"] = c.n_trials;
    j["sigma_theta_list"] = c.sigma_theta_list;
    j["sigma_tau_list"] = c.sigma_tau_list;
    j["fixed_sigma_tau"] = c.fixed_sigma_tau;
    j["fixed_sigma_theta"] = c.fixed_sigma_theta;
    j["methods"] = json::array();
    for (auto m : c.methods)
        j["methods"].push_back(bench::to_string(m));
    j["master_seed"] = c.master_seed;
    j["min_separation"] = c.min_separation;
    j["resample_scene_per_trial"] = c.resample_scene_per_trial;
    j["crlb_mc_samples"] = c.crlb_mc_samples;
    j["threads"] = c.threads;
    const auto &t = c.training;
    j["training"] = {{"hidden", std::vector<long>(t.hidden.begin(), t.hidden.end())},
                     {"epochs", t.epochs},
                     {"batch_size", t.batch_size},
                     {"learning_rate", t.learning_rate},
                     {"final_lr_fraction", t.final_lr_fraction},
                     {"input_range", t.input_range},
                     {"loss", t.loss == cadm::TrainingLoss::GaussianNll ? "nll" : "mse"},
                     {"mse_warmup_epochs", t.mse_warmup_epochs},
                     {"mse_var_theta", t.mse_var_theta},
                     {"mse_var_tau", t.mse_var_tau},
                     {"mse_calibrate_variances", t.mse_calibrate_variances},
                     {"mse_delay_weight", t.mse_delay_weight},
                     {"mse_huber_delta", t.mse_huber_delta},
                     {"smooth_window", t.smooth_window},
                     {"var_floor_theta", t.floors.theta},
                     {"var_floor_tau", t.floors.tau}};
    const auto &l = c.localizer;
    j["localizer"] = {{"step_size", l.step_size},       {"max_iters", l.max_iters},
                      {"grad_tol", l.grad_tol},         {"step_tol", l.step_tol},
                      {"grid_nx", l.grid_nx},           {"grid_ny", l.grid_ny},
                      {"random_starts", l.random_starts}, {"max_halvings", l.max_halvings},
                      {"step_growth", l.step_growth},
                      {"screen_nx", l.screen_nx},
                      {"screen_ny", l.screen_ny},
                      {"screen_keep", l.screen_keep}};
    return j;
}

inline json parse_text(const std::string &text)
{
    try
    {
        return json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

inline bench::ScenarioConfig load(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot open config " + path);
    const std::string text{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    bench::ScenarioConfig c;
    config::apply(parse_text(text), c);
    return c;
}

} // namespace ckmsense::config

#endif
