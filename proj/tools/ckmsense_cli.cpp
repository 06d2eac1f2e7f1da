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

// ckmsense command-line front end.

#include <ckmsense.hpp>
#include <ckmsense/config.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace ckmsense;
using json = nlohmann::json;

namespace
{

// Options shared by every subcommand that builds a scenario.
struct ScenarioFlags
{
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_trials, n_train, epochs, threads, l_prime, n_scatterers;
    std::vector<std::string> methods;
    std::string slot_order;

    void attach(CLI::App *app)
    {
        app->add_option("--config", config_path, "JSON configuration file");
        app->add_option("--set", sets, "Override any config field, e.g. --set training.epochs=50")
            ->type_name("KEY=JSON");
        app->add_option("--seed", seed, "Master seed");
        app->add_option("--n-trials", n_trials, "Monte-Carlo trials per sweep point");
        app->add_option("--n-train", n_train, "Training samples per map");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--threads", threads, "Worker threads (0: all cores)");
        app->add_option("--l-prime", l_prime, "Dominant paths per location");
        app->add_option("--n-scatterers", n_scatterers, "Scatterers in the scene");
        app->add_option("--slot-order", slot_order, "Map slot layout")->check(CLI::IsMember({"gain", "aod", "delay"}));
        app->add_option("--methods", methods, "Subset of geo-los geo-nlos ckm-los ckm-nlos ckm-nlos-conv");
    }

    bench::ScenarioConfig build() const
    {
        json j = json::object();
        if (!config_path.empty())
        {
            std::ifstream f(config_path);
            if (!f)
                throw ConfigError("cannot open config " + config_path);
            j = config::parse_text({std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()});
        }
        for (const auto &s : sets)
        {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
            const std::string key = s.substr(0, eq), val = s.substr(eq + 1);
            json v;
            try
            {
                v = json::parse(val);
            }
            catch (const json::parse_error &)
            {
                v = val;
            }
            std::string ptr = "/" + key;
            for (auto &c : ptr)
                if (c == '.')
                    c = '/';
            j[json::json_pointer(ptr)] = v;
        }
        if (seed)
            j["master_seed"] = *seed;
        if (n_trials)
            j["n_trials"] = *n_trials;
        if (n_train)
            j["n_train"] = *n_train;
        if (epochs)
            j["training"]["epochs"] = *epochs;
        if (threads)
            j["threads"] = *threads;
        if (l_prime)
            j["l_prime"] = *l_prime;
        if (n_scatterers)
            j["n_scatterers"] = *n_scatterers;
        if (!methods.empty())
            j["methods"] = methods;
        if (!slot_order.empty())
            j["slot_order"] = slot_order;
        bench::ScenarioConfig c;
        config::apply(j, c);
        c.validate();
        return c;
    }
};

std::ofstream open_out(const std::string &path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path + " for writing");
    return f;
}

std::optional<cadm::CadmModel> maybe_model(const std::string &path)
{
    if (path.empty())
        return std::nullopt;
    return cadm::cadm_load(path);
}

void print_progress(const std::string &label, std::size_t epoch, double loss)
{
    if (epoch % 25 == 0)
        std::fprintf(stderr, "[train %s] epoch %zu loss %.6g\n", label.c_str(), epoch, loss);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"ckmsense: channel-knowledge-map NLoS target localization"};
    app.require_subcommand(1);

    // scene
    auto *sc = app.add_subcommand("scene", "Generate a random scene from the configured seed");
    ScenarioFlags sc_flags;
    sc_flags.attach(sc);
    std::string sc_out;
    bool sc_los = false;
    sc->add_option("--out", sc_out, "Scene file to write")->required();
    sc->add_flag("--los", sc_los, "Keep the direct path (mixed LoS/NLoS scene)");

    // observe
    auto *ob = app.add_subcommand("observe", "Synthesize a noisy sensing observation of a target");
    std::string ob_scene, ob_out;
    std::vector<double> ob_target;
    double ob_st = 0.1, ob_stau = 20e-9;
    std::size_t ob_lp = 5;
    std::uint64_t ob_seed = 0;
    bool ob_recip = false;
    std::string ob_order = "aod";
    ob->add_option("--scene", ob_scene, "Scene file")->required();
    ob->add_option("--target", ob_target, "Target x y (m)")->expected(2)->required();
    ob->add_option("--sigma-theta", ob_st, "Angle error std (rad)");
    ob->add_option("--sigma-tau", ob_stau, "Delay error std (s)");
    ob->add_option("--l-prime", ob_lp, "Dominant paths");
    ob->add_option("--seed", ob_seed, "Noise seed");
    ob->add_option("--slot-order", ob_order, "Slot layout; must match the model")
        ->check(CLI::IsMember({"gain", "aod", "delay"}));
    ob->add_flag("--reciprocal-only", ob_recip, "Observe only the L' reciprocal composites");
    ob->add_option("--out", ob_out, "Observation file to write")->required();

    // train
    auto *tr = app.add_subcommand("train", "Train a channel angle-delay map for a scene");
    ScenarioFlags tr_flags;
    tr_flags.attach(tr);
    std::string tr_scene, tr_out, tr_set_in, tr_set_out, tr_loss_out;
    tr->add_option("--scene", tr_scene, "Scene file")->required();
    tr->add_option("--out", tr_out, "Model file to write")->required();
    tr->add_option("--trainset", tr_set_in, "Use this training-set file instead of sampling");
    tr->add_option("--save-trainset", tr_set_out, "Write the sampled training set");
    tr->add_option("--loss-log", tr_loss_out, "Write per-epoch loss as CSV");

    // localize
    auto *lo = app.add_subcommand("localize", "Localize a target from an observation");
    std::string lo_model, lo_obs, lo_method = "ckm", lo_scene;
    std::optional<double> lo_st, lo_stau;
    lo->add_option("--obs", lo_obs, "Observation file")->required();
    lo->add_option("--model", lo_model, "Model file (ckm method)");
    lo->add_option("--scene", lo_scene, "Scene file (BS position for geo-nlos)");
    lo->add_option("--method", lo_method, "ckm or geo-nlos")->check(CLI::IsMember({"ckm", "geo-nlos"}));
    lo->add_option("--sigma-theta", lo_st, "Measurement angle std (rad) added to the map variances");
    lo->add_option("--sigma-tau", lo_stau, "Measurement delay std (s) added to the map variances");

    // sweep
    auto *sw = app.add_subcommand("sweep", "Monte-Carlo RMSE sweep over angle and delay error");
    ScenarioFlags sw_flags;
    sw_flags.attach(sw);
    std::string sw_out, sw_trials, sw_mn, sw_ml, sw_save_prefix;
    sw->add_option("--out", sw_out, "Sweep CSV to write")->required();
    sw->add_option("--trials-out", sw_trials, "Per-trial log CSV");
    sw->add_option("--model-nlos", sw_mn, "Pre-trained pure-NLoS map");
    sw->add_option("--model-los", sw_ml, "Pre-trained mixed-scene map");
    sw->add_option("--save-models", sw_save_prefix, "Write trained maps to PREFIX_nlos.cadm / PREFIX_los.cadm");

    // crlb
    auto *cr = app.add_subcommand("crlb", "CRLB sweep at the scene target");
    ScenarioFlags cr_flags;
    cr_flags.attach(cr);
    std::string cr_out, cr_mn, cr_ml;
    cr->add_option("--out", cr_out, "CRLB CSV to write")->required();
    cr->add_option("--model-nlos", cr_mn, "Pre-trained pure-NLoS map");
    cr->add_option("--model-los", cr_ml, "Pre-trained mixed-scene map");

    // plot
    auto *pl = app.add_subcommand("plot", "Render sweep or CRLB CSV as SVG line charts");
    std::string pl_in, pl_prefix;
    pl->add_option("--in", pl_in, "Sweep or CRLB CSV")->required();
    pl->add_option("--out-prefix", pl_prefix, "Writes PREFIX_angle.svg and PREFIX_delay.svg")->required();

    // dump-config
    auto *dc = app.add_subcommand("config", "Print the effective configuration as JSON");
    ScenarioFlags dc_flags;
    dc_flags.attach(dc);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*sc)
        {
            const auto cfg = sc_flags.build();
            std::mt19937_64 rng(derive_seed(cfg.master_seed, {bench::kStreamScene}));
            auto scene = bench::generate_scene(cfg, rng);
            scene.env.los_blocked = !sc_los;
            auto f = open_out(sc_out);
            io::write_scene(scene.env, f);
            std::cout << "target " << io::fmt_double(scene.target.x) << " " << io::fmt_double(scene.target.y) << "\n";
        }
        else if (*ob)
        {
            const auto env = io::read_file(ob_scene, [](std::istream &in) { return io::read_scene(in); });
            std::mt19937_64 rng(ob_seed);
            const auto obs = sensing::synthesize_observation(env, {ob_target[0], ob_target[1]},
                                                             sensing::ErrorSpec::from_std(ob_st, ob_st, ob_stau), ob_lp,
                                                             ob_recip, geom::parse_slot_order(ob_order), rng);
            auto f = open_out(ob_out);
            io::write_observation(obs, f);
        }
        else if (*tr)
        {
            const auto cfg = tr_flags.build();
            const auto env = io::read_file(tr_scene, [](std::istream &in) { return io::read_scene(in); });
            cadm::TrainingSet data;
            if (!tr_set_in.empty())
                data = io::read_file(tr_set_in, [](std::istream &in) { return io::read_training_set(in); });
            else
            {
                std::mt19937_64 rng(derive_seed(cfg.master_seed, {bench::kStreamTrainNlos, 0}));
                data = bench::build_training_set(env, cfg.n_train, cfg.l_prime, cfg.slot_order, rng);
            }
            if (!tr_set_out.empty())
            {
                auto f = open_out(tr_set_out);
                io::write_training_set(data, f);
            }
            const auto run = cadm::cadm_train(data, cfg.training, derive_seed(cfg.master_seed, {bench::kStreamTrainNlos, 1}),
                                              [](std::size_t e, double l) { print_progress("map", e, l); });
            cadm::cadm_save(run.model, tr_out);
            if (!tr_loss_out.empty())
            {
                auto f = open_out(tr_loss_out);
                f << "epoch,loss\n";
                for (std::size_t e = 0; e < run.report.epoch_loss.size(); ++e)
                    f << e << "," << io::fmt_double(run.report.epoch_loss[e]) << "\n";
            }
            std::cout << "final loss " << io::fmt_double(run.report.epoch_loss.back()) << "\n";
        }
        else if (*lo)
        {
            const auto obs = io::read_file(lo_obs, [](std::istream &in) { return io::read_observation(in); });
            std::cout << "x,y,neg_log_likelihood,iterations,converged\n";
            if (lo_method == "geo-nlos")
            {
                if (lo_scene.empty())
                    throw ConfigError("geo-nlos needs --scene for the BS position");
                const auto env = io::read_file(lo_scene, [](std::istream &in) { return io::read_scene(in); });
                const Point2 e = sensing::localize_geometry_nlos(obs, env.bs);
                std::cout << io::fmt_double(e.x) << "," << io::fmt_double(e.y) << ",nan,0,1\n";
            }
            else
            {
                if (lo_model.empty())
                    throw ConfigError("ckm localization needs --model");
                const auto model = cadm::cadm_load(lo_model);
                sensing::LocalizerConfig lc;
                if (lo_st || lo_stau)
                    lc.measurement_error = sensing::ErrorSpec::from_std(lo_st.value_or(0.1), lo_st.value_or(0.1),
                                                                        lo_stau.value_or(20e-9));
                if (!lo_scene.empty())
                {
                    const auto env = io::read_file(lo_scene, [](std::istream &in) { return io::read_scene(in); });
                    lc.extra_starts.push_back(sensing::localize_geometry_nlos(obs, env.bs));
                }
                const auto r = sensing::localize_ckm(model, obs, lc);
                std::cout << io::fmt_double(r.estimate.x) << "," << io::fmt_double(r.estimate.y) << ","
                          << io::fmt_double(r.neg_log_likelihood) << "," << r.iterations_used << ","
                          << (r.converged ? 1 : 0) << "\n";
            }
        }
        else if (*sw || *cr)
        {
            auto &flags = *sw ? sw_flags : cr_flags;
            if (!flags.seed)
                throw ConfigError(std::string(*sw ? "sweep" : "crlb") + " requires --seed");
            const auto cfg = flags.build();
            const auto ctx = bench::prepare_context(cfg, maybe_model(*sw ? sw_mn : cr_mn),
                                                    maybe_model(*sw ? sw_ml : cr_ml), print_progress);
            if (*sw)
            {
                if (!sw_save_prefix.empty())
                {
                    if (ctx.model_nlos)
                        cadm::cadm_save(*ctx.model_nlos, sw_save_prefix + "_nlos.cadm");
                    if (ctx.model_los)
                        cadm::cadm_save(*ctx.model_los, sw_save_prefix + "_los.cadm");
                }
                const auto res = bench::run_sweep(ctx, print_progress);
                auto f = open_out(sw_out);
                bench::write_sweep_csv(res.rows, f);
                if (!sw_trials.empty())
                {
                    auto t = open_out(sw_trials);
                    bench::write_trials_csv(res.trials, t);
                }
            }
            else
            {
                auto f = open_out(cr_out);
                bench::write_crlb_csv(bench::run_crlb_sweep(ctx), f);
            }
        }
        else if (*pl)
        {
            std::ifstream in(pl_in);
            if (!in)
                throw FormatError("cannot open " + pl_in);
            const auto charts = plot::charts_from_csv(plot::parse_csv(in));
            for (const auto &[name, chart] : charts)
            {
                const std::string path = pl_prefix + "_" + name + ".svg";
                auto f = open_out(path);
                f << plot::render_svg(chart);
                std::cout << path << "\n";
            }
        }
        else if (*dc)
        {
            std::cout << config::to_json(dc_flags.build()).dump(2) << "\n";
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
