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

#ifndef CKMSENSE_CADM_HPP
#define CKMSENSE_CADM_HPP

#include "channel_map.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "mlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

// Channel angle-delay map (CADM): a fully-connected network that maps a 2-D
// location to one Gaussian over (departure angle, delay) per dominant path slot.
//
// Network output layout, per slot k (4 values):
//   [4k+0] angle mean (rad)
//   [4k+1] log angle variance (rad^2)
//   [4k+2] delay mean, in delay units
//   [4k+3] log delay variance, in delay units^2
// One delay unit is the scene diagonal travel time (delay_unit_scale seconds).

namespace ckmsense::cadm
{

/// Affine per-coordinate input normalization: n = scale * raw + offset.
struct InputNorm
{
    double scale_x = 1.0;
    double offset_x = 0.0;
    double scale_y = 1.0;
    double offset_y = 0.0;

    /// Maps the scene rectangle onto [-r, r]^2.
    static InputNorm from_bounds(Bounds b, double r = 1.0)
    {
        return {2.0 * r / b.width, -r, 2.0 * r / b.height, -r};
    }
    Eigen::Vector2d apply(Point2 p) const { return {scale_x * p.x + offset_x, scale_y * p.y + offset_y}; }
};

struct VarianceFloors
{
    double theta = 1e-6; // rad^2
    double tau = 1e-20;  // s^2
};

inline const std::vector<Eigen::Index> kDefaultHidden{128, 256, 128};

class CadmModel
{
  public:
    static constexpr std::uint32_t kFormatVersion = 2;

    CadmModel(nn::Mlp mlp, std::size_t l_prime, Bounds bounds, InputNorm input_norm, double delay_unit_scale,
              VarianceFloors floors = {})
        : mlp_(std::move(mlp)), l_prime_(l_prime), bounds_(bounds), input_norm_(input_norm),
          delay_unit_scale_(delay_unit_scale), floors_(floors)
    {
        if (l_prime_ < 1)
            throw ConfigError("CADM needs l_prime >= 1");
        if (!(delay_unit_scale_ > 0.0) || !std::isfinite(delay_unit_scale_))
            throw ConfigError("CADM delay unit scale must be positive");
        if (mlp_.input_dim() != 2 || mlp_.output_dim() != static_cast<Eigen::Index>(4 * l_prime_))
            throw ConfigError("CADM network must map 2 inputs to 4*l_prime outputs");
        if (!(floors_.theta > 0.0) || !(floors_.tau > 0.0))
            throw ConfigError("CADM variance floors must be positive");
    }

    /// Network dimension chain 2 -> hidden... -> 4 l_prime.
    static std::vector<Eigen::Index> dims_for(std::size_t l_prime, const std::vector<Eigen::Index> &hidden)
    {
        std::vector<Eigen::Index> dims{2};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(static_cast<Eigen::Index>(4 * l_prime));
        return dims;
    }

    /// All weights and biases zero.
    static CadmModel zero(std::size_t l_prime, Bounds bounds, const std::vector<Eigen::Index> &hidden = kDefaultHidden)
    {
        return {nn::Mlp(dims_for(l_prime, hidden)), l_prime, bounds, InputNorm::from_bounds(bounds),
                bounds.diagonal() / kSpeedOfLight};
    }

    template <class Rng>
    static CadmModel random(std::size_t l_prime, Bounds bounds, Rng &rng,
                            const std::vector<Eigen::Index> &hidden = kDefaultHidden)
    {
        return {nn::Mlp::uniform_init(dims_for(l_prime, hidden), rng), l_prime, bounds,
                InputNorm::from_bounds(bounds), bounds.diagonal() / kSpeedOfLight};
    }

    std::size_t l_prime() const { return l_prime_; }
    Bounds bounds() const { return bounds_; }
    const InputNorm &input_norm() const { return input_norm_; }
    void set_input_norm(InputNorm n) { input_norm_ = n; }
    geom::SlotOrder slot_order() const { return slot_order_; }
    void set_slot_order(geom::SlotOrder o) { slot_order_ = o; }
    double delay_unit_scale() const { return delay_unit_scale_; }
    const VarianceFloors &floors() const { return floors_; }
    std::uint32_t format_version() const { return kFormatVersion; }
    const nn::Mlp &mlp() const { return mlp_; }
    nn::Mlp &mlp() { return mlp_; }

    Eigen::VectorXd raw_outputs(Point2 loc) const
    {
        check_input(loc);
        return mlp_.forward(input_norm_.apply(loc));
    }

    std::vector<GaussianPathDist> distributions(Point2 loc) const { return to_dists(raw_outputs(loc)); }

    MapEvaluation evaluate(Point2 loc) const
    {
        check_input(loc);
        Eigen::MatrixXd jn;
        const Eigen::VectorXd out = mlp_.forward_jacobian(input_norm_.apply(loc), jn);
        MapEvaluation ev;
        ev.dists = to_dists(out);
        ev.jacobian.resize(out.size(), 2);
        const double s = delay_unit_scale_;
        for (std::size_t k = 0; k < l_prime_; ++k)
        {
            const auto r = static_cast<Eigen::Index>(4 * k);
            ev.jacobian.row(r) = jn.row(r);
            ev.jacobian.row(r + 1) = std::exp(out(r + 1)) * jn.row(r + 1);
            ev.jacobian.row(r + 2) = s * jn.row(r + 2);
            ev.jacobian.row(r + 3) = s * s * std::exp(out(r + 3)) * jn.row(r + 3);
        }
        ev.jacobian.col(0) *= input_norm_.scale_x;
        ev.jacobian.col(1) *= input_norm_.scale_y;
        if (!ev.jacobian.allFinite())
            throw NumericFailureError("CADM Jacobian is not finite");
        return ev;
    }

  private:
    void check_input(Point2 loc) const
    {
        if (!loc.finite())
            throw NumericFailureError("CADM input location is not finite");
    }

    std::vector<GaussianPathDist> to_dists(const Eigen::VectorXd &out) const
    {
        if (!out.allFinite())
            throw NumericFailureError("CADM network produced non-finite activations");
        std::vector<GaussianPathDist> d(l_prime_);
        const double s = delay_unit_scale_;
        for (std::size_t k = 0; k < l_prime_; ++k)
        {
            const auto r = static_cast<Eigen::Index>(4 * k);
            d[k].mu_theta = wrap_angle(out(r));
            d[k].var_theta = std::exp(out(r + 1)) + floors_.theta;
            d[k].mu_tau = s * out(r + 2);
            d[k].var_tau = s * s * std::exp(out(r + 3)) + floors_.tau;
            if (!std::isfinite(d[k].var_theta) || !std::isfinite(d[k].var_tau))
                throw NumericFailureError("CADM variance overflow");
        }
        return d;
    }

    nn::Mlp mlp_;
    std::size_t l_prime_;
    Bounds bounds_;
    InputNorm input_norm_;
    double delay_unit_scale_;
    VarianceFloors floors_;
    geom::SlotOrder slot_order_ = geom::SlotOrder::Aod;
};

static_assert(AngleDelayMap<CadmModel>);

inline std::vector<GaussianPathDist> cadm_forward(const CadmModel &model, Point2 loc)
{
    return model.distributions(loc);
}

/// d(mu_theta, var_theta, mu_tau, var_tau per slot)/d(location), 4L' x 2.
inline MapJacobian cadm_jacobian(const CadmModel &model, Point2 loc)
{
    return model.evaluate(loc).jacobian;
}

// ---- Training -----------------------------------------------------------

struct TrainingSample
{
    Point2 location;
    geom::CommChannelKnowledge truth;
};

struct TrainingSet
{
    Bounds bounds;
    std::size_t l_prime = 0;
    geom::SlotOrder slot_order = geom::SlotOrder::Aod;
    std::vector<TrainingSample> samples;

    void validate() const
    {
        if (samples.empty())
            throw ConfigError("training set is empty");
        if (l_prime == 0)
            throw ConfigError("training set l_prime must be positive");
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            if (samples[i].truth.l_prime() != l_prime)
                throw ConfigError("training sample " + std::to_string(i) + " has " +
                                  std::to_string(samples[i].truth.l_prime()) + " paths, expected " +
                                  std::to_string(l_prime));
            if (samples[i].truth.order != slot_order)
                throw ConfigError("training sample " + std::to_string(i) + " is not in " +
                                  geom::to_string(slot_order) + " slot order");
            if (!bounds.contains(samples[i].location))
                throw ConfigError("training sample " + std::to_string(i) + " lies outside the bounds");
        }
    }
};

enum class TrainingLoss
{
    GaussianNll,     // fits means and log-variances jointly
    MeanSquaredError // means only; variances pinned afterwards
};

struct TrainConfig
{
    std::vector<Eigen::Index> hidden = kDefaultHidden;
    std::size_t epochs = 800;
    std::size_t batch_size = 64;
    double learning_rate = 3e-3;
    double input_range = 1.0;        // network inputs span [-input_range, input_range]
    double final_lr_fraction = 0.01; // cosine decay to learning_rate * final_lr_fraction
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    TrainingLoss loss = TrainingLoss::MeanSquaredError;
    std::size_t mse_warmup_epochs = 0; // MSE epochs before switching to NLL
    double mse_var_theta = 1e-4;       // rad^2, pinned variance in MSE mode
    double mse_var_tau = 1e-18;        // s^2, pinned variance in MSE mode
    bool mse_calibrate_variances = true; // pin to per-slot training residual variance, floored at mse_var_*
    double mse_delay_weight = 100.0;   // weight of squared delay residuals (delay units) in MSE mode
    double mse_huber_delta = 0.05;     // > 0: residuals beyond this (after weighting) are penalized linearly
    VarianceFloors floors;
    std::size_t smooth_window = 10;

    void validate() const
    {
        if (epochs == 0 || batch_size == 0)
            throw ConfigError("epochs and batch_size must be positive");
        if (!(learning_rate > 0.0) || !(final_lr_fraction > 0.0) || final_lr_fraction > 1.0)
            throw ConfigError("learning rate schedule is invalid");
        if (!(input_range > 0.0) || !std::isfinite(input_range))
            throw ConfigError("input_range must be positive");
        if (!(mse_delay_weight > 0.0) || !std::isfinite(mse_delay_weight))
            throw ConfigError("mse_delay_weight must be positive");
        if (!(mse_huber_delta >= 0.0) || !std::isfinite(mse_huber_delta))
            throw ConfigError("mse_huber_delta must be non-negative");
        if (smooth_window == 0)
            throw ConfigError("smooth_window must be positive");
        if (!(mse_var_theta > floors.theta) || !(mse_var_tau > floors.tau))
            throw ConfigError("pinned MSE variances must exceed the variance floors");
    }
};

struct TrainingReport
{
    std::vector<double> epoch_loss; // mean per-sample loss of each epoch
    std::size_t smooth_window = 10;

    /// Means over consecutive non-overlapping windows of epochs.
    std::vector<double> smoothed_loss() const
    {
        std::vector<double> out;
        for (std::size_t i = 0; i < epoch_loss.size(); i += smooth_window)
        {
            const std::size_t end = std::min(epoch_loss.size(), i + smooth_window);
            out.push_back(std::accumulate(epoch_loss.begin() + static_cast<std::ptrdiff_t>(i),
                                          epoch_loss.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
                          static_cast<double>(end - i));
        }
        return out;
    }

    bool smoothed_non_increasing() const
    {
        const auto s = smoothed_loss();
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] > s[i - 1])
                return false;
        return true;
    }
};

struct TrainedCadm
{
    CadmModel model;
    TrainingReport report;
};

namespace detail
{

// Targets in network units: per slot (angle rad, delay units).
inline Eigen::MatrixXd training_targets(const TrainingSet &data, double delay_unit)
{
    Eigen::MatrixXd t(static_cast<Eigen::Index>(2 * data.l_prime), static_cast<Eigen::Index>(data.samples.size()));
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        for (std::size_t k = 0; k < data.l_prime; ++k)
        {
            t(static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(i)) =
                wrap_angle(data.samples[i].truth.paths[k].aod_rad);
            t(static_cast<Eigen::Index>(2 * k + 1), static_cast<Eigen::Index>(i)) =
                data.samples[i].truth.paths[k].delay_s / delay_unit;
        }
    return t;
}

// Loss and d(loss)/d(out) for one batch, summed over the batch.
inline double batch_loss(const Eigen::MatrixXd &out, const Eigen::MatrixXd &target, bool nll, double floor_theta,
                         double floor_tau_units, double delay_weight, double huber_delta, Eigen::MatrixXd &grad)
{
    grad.setZero(out.rows(), out.cols());
    double loss = 0.0;
    const Eigen::Index slots = out.rows() / 4;
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    for (Eigen::Index b = 0; b < out.cols(); ++b)
    {
        for (Eigen::Index k = 0; k < slots; ++k)
        {
            for (int q = 0; q < 2; ++q)
            {
                const Eigen::Index mr = 4 * k + 2 * q;
                const double r = q == 0 ? wrap_angle(target(2 * k, b) - out(mr, b)) : target(2 * k + 1, b) - out(mr, b);
                if (nll)
                {
                    const double e = std::exp(out(mr + 1, b));
                    const double v = e + (q == 0 ? floor_theta : floor_tau_units);
                    loss += kHalfLog2Pi + 0.5 * std::log(v) + 0.5 * r * r / v;
                    grad(mr, b) = -r / v;
                    grad(mr + 1, b) = 0.5 * (1.0 / v - r * r / (v * v)) * e;
                }
                else
                {
                    const double sw = std::sqrt(q == 0 ? 1.0 : delay_weight);
                    const double e = sw * r;
                    if (huber_delta > 0.0 && std::abs(e) > huber_delta)
                    {
                        loss += 2.0 * huber_delta * std::abs(e) - huber_delta * huber_delta;
                        grad(mr, b) = -2.0 * huber_delta * sw * (e > 0.0 ? 1.0 : -1.0);
                    }
                    else
                    {
                        loss += e * e;
                        grad(mr, b) = -2.0 * sw * e;
                    }
                }
            }
        }
    }
    return loss;
}

} // namespace detail

/// Trains a CADM on location -> dominant-path samples with mini-batch Adam and
/// a cosine learning-rate decay. Deterministic for a given seed.
inline TrainedCadm cadm_train(const TrainingSet &data, const TrainConfig &config, std::uint64_t seed,
                              const std::function<void(std::size_t, double)> &on_epoch = {})
{
    data.validate();
    config.validate();

    std::mt19937_64 rng(seed);
    const double delay_unit = data.bounds.diagonal() / kSpeedOfLight;
    const double floor_tau_units = config.floors.tau / (delay_unit * delay_unit);
    CadmModel model(nn::Mlp::uniform_init(CadmModel::dims_for(data.l_prime, config.hidden), rng), data.l_prime,
                    data.bounds, InputNorm::from_bounds(data.bounds, config.input_range), delay_unit, config.floors);
    model.set_slot_order(data.slot_order);

    const auto n = static_cast<Eigen::Index>(data.samples.size());
    Eigen::MatrixXd inputs(2, n);
    for (Eigen::Index i = 0; i < n; ++i)
        inputs.col(i) = model.input_norm().apply(data.samples[static_cast<std::size_t>(i)].location);
    const Eigen::MatrixXd targets = detail::training_targets(data, delay_unit);

    // Start the output head at the target statistics.
    auto &head = model.mlp().layers().back();
    head.weight *= 0.1;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(data.l_prime); ++k)
    {
        for (int q = 0; q < 2; ++q)
        {
            const Eigen::RowVectorXd row = targets.row(2 * k + q);
            const double mean = row.mean();
            const double var = std::max((row.array() - mean).square().mean(), 1e-12);
            head.bias(4 * k + 2 * q) = mean;
            head.bias(4 * k + 2 * q + 1) = std::log(var);
        }
    }

    auto &layers = model.mlp().layers();
    std::vector<nn::DenseLayer> grads, m1, m2;
    for (const auto &l : layers)
    {
        m1.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
        m2.push_back(m1.back());
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    TrainingReport report;
    report.smooth_window = config.smooth_window;
    nn::Mlp::BatchCache cache;
    Eigen::MatrixXd batch_in, batch_target, grad_out;
    std::uint64_t step = 0;
    const std::size_t total_steps =
        config.epochs * ((static_cast<std::size_t>(n) + config.batch_size - 1) / config.batch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch)
    {
        const bool nll = config.loss == TrainingLoss::GaussianNll && epoch >= config.mse_warmup_epochs;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size)
        {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const auto bsz = static_cast<Eigen::Index>(end - start);
            batch_in.resize(2, bsz);
            batch_target.resize(targets.rows(), bsz);
            for (Eigen::Index j = 0; j < bsz; ++j)
            {
                batch_in.col(j) = inputs.col(order[start + static_cast<std::size_t>(j)]);
                batch_target.col(j) = targets.col(order[start + static_cast<std::size_t>(j)]);
            }
            const Eigen::MatrixXd out = model.mlp().forward_batch(batch_in, cache);
            const double loss =
                detail::batch_loss(out, batch_target, nll, config.floors.theta, floor_tau_units,
                                   config.mse_delay_weight, config.mse_huber_delta, grad_out);
            if (!std::isfinite(loss))
                throw TrainingFailureError("training loss became non-finite at epoch " + std::to_string(epoch));
            epoch_loss += loss;
            grad_out /= static_cast<double>(bsz);
            model.mlp().backward_batch(cache, grad_out, grads);

            const double progress = static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, total_steps));
            const double lr = config.learning_rate *
                              (config.final_lr_fraction +
                               (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(kPi * progress)));
            ++step;
            const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
            auto adam = [&](auto &param, auto &g, auto &m, auto &v) {
                m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
                v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
                param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_eps);
            };
            for (std::size_t k = 0; k < layers.size(); ++k)
            {
                adam(layers[k].weight, grads[k].weight, m1[k].weight, m2[k].weight);
                adam(layers[k].bias, grads[k].bias, m1[k].bias, m2[k].bias);
            }
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss) || !model.mlp().all_finite())
            throw TrainingFailureError("training diverged at epoch " + std::to_string(epoch));
        report.epoch_loss.push_back(epoch_loss);
        if (on_epoch)
            on_epoch(epoch, epoch_loss);
    }

    if (config.loss == TrainingLoss::MeanSquaredError)
    {
        std::vector<double> var_theta(data.l_prime, config.mse_var_theta), var_tau(data.l_prime, config.mse_var_tau);
        if (config.mse_calibrate_variances)
        {
            std::vector<double> sa(data.l_prime, 0.0), st(data.l_prime, 0.0);
            for (const auto &smp : data.samples)
            {
                const Eigen::VectorXd out = model.raw_outputs(smp.location);
                for (std::size_t k = 0; k < data.l_prime; ++k)
                {
                    const auto r = static_cast<Eigen::Index>(4 * k);
                    const double ea = wrap_angle(smp.truth.paths[k].aod_rad - out(r));
                    const double et = smp.truth.paths[k].delay_s - delay_unit * out(r + 2);
                    sa[k] += ea * ea;
                    st[k] += et * et;
                }
            }
            const auto cnt = static_cast<double>(data.samples.size());
            for (std::size_t k = 0; k < data.l_prime; ++k)
            {
                if (!std::isfinite(sa[k]) || !std::isfinite(st[k]))
                    throw TrainingFailureError("training residuals are not finite");
                var_theta[k] = std::max(var_theta[k], sa[k] / cnt);
                var_tau[k] = std::max(var_tau[k], st[k] / cnt);
            }
        }
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(data.l_prime); ++k)
        {
            const auto ks = static_cast<std::size_t>(k);
            head.weight.row(4 * k + 1).setZero();
            head.weight.row(4 * k + 3).setZero();
            head.bias(4 * k + 1) = std::log(var_theta[ks] - config.floors.theta);
            head.bias(4 * k + 3) = std::log((var_tau[ks] - config.floors.tau) / (delay_unit * delay_unit));
        }
    }
    return {std::move(model), std::move(report)};
}

/// Mean absolute error of the predicted means against ground truth.
struct HoldoutErrors
{
    double mean_angle_rad = 0.0;
    double mean_delay_s = 0.0;
    double max_angle_rad = 0.0;
    double max_delay_s = 0.0;
};

inline HoldoutErrors evaluate_holdout(const CadmModel &model, const std::vector<TrainingSample> &samples)
{
    HoldoutErrors e;
    std::size_t count = 0;
    for (const auto &s : samples)
    {
        if (s.truth.l_prime() != model.l_prime() || s.truth.order != model.slot_order())
            throw ConfigError("holdout sample does not match the model's slot layout");
        const auto d = model.distributions(s.location);
        for (std::size_t k = 0; k < model.l_prime(); ++k)
        {
            const double ea = std::abs(wrap_angle(s.truth.paths[k].aod_rad - d[k].mu_theta));
            const double ed = std::abs(s.truth.paths[k].delay_s - d[k].mu_tau);
            e.mean_angle_rad += ea;
            e.mean_delay_s += ed;
            e.max_angle_rad = std::max(e.max_angle_rad, ea);
            e.max_delay_s = std::max(e.max_delay_s, ed);
            ++count;
        }
    }
    if (count > 0)
    {
        e.mean_angle_rad /= static_cast<double>(count);
        e.mean_delay_s /= static_cast<double>(count);
    }
    return e;
}

// ---- Persistence --------------------------------------------------------
//
// Little-endian binary layout:
//   char[8]  magic "CKMCADM\0"
//   u32      format_version
//   u32      l_prime
//   u32      slot order (0 gain, 1 aod, 2 delay)
//   f64 x2   bounds width, height
//   f64 x4   input norm scale_x, offset_x, scale_y, offset_y
//   f64      delay_unit_scale
//   f64 x2   variance floors theta, tau
//   u32      number of dims, then u32 per dim
//   per layer: f64 weights (row-major, out x in), f64 biases (out)
//   u64      FNV-1a hash of every preceding byte

inline constexpr char kCadmMagic[8] = {'C', 'K', 'M', 'C', 'A', 'D', 'M', '\0'};

namespace detail
{

inline std::uint64_t fnv1a(const unsigned char *p, std::size_t n)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i)
    {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class ByteWriter
{
  public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char *p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    std::vector<unsigned char> &bytes() { return buf_; }

  private:
    std::vector<unsigned char> buf_;
};

class ByteReader
{
  public:
    ByteReader(const unsigned char *p, std::size_t n) : p_(p), n_(n) {}
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char *out, std::size_t n)
    {
        need(n);
        std::memcpy(out, p_ + pos_, n);
        pos_ += n;
    }
    std::size_t position() const { return pos_; }

  private:
    void need(std::size_t k) const
    {
        if (pos_ + k > n_)
            throw FormatError("CADM payload is truncated");
    }
    const unsigned char *p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline void cadm_save(const CadmModel &model, std::ostream &sink)
{
    detail::ByteWriter w;
    w.raw(kCadmMagic, sizeof(kCadmMagic));
    w.u32(model.format_version());
    w.u32(static_cast<std::uint32_t>(model.l_prime()));
    w.u32(static_cast<std::uint32_t>(model.slot_order()));
    w.f64(model.bounds().width);
    w.f64(model.bounds().height);
    const auto &n = model.input_norm();
    w.f64(n.scale_x);
    w.f64(n.offset_x);
    w.f64(n.scale_y);
    w.f64(n.offset_y);
    w.f64(model.delay_unit_scale());
    w.f64(model.floors().theta);
    w.f64(model.floors().tau);
    const auto &dims = model.mlp().dims();
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims)
        w.u32(static_cast<std::uint32_t>(d));
    for (const auto &layer : model.mlp().layers())
    {
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
                w.f64(layer.weight(i, j));
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
            w.f64(layer.bias(i));
    }
    const std::uint64_t h = detail::fnv1a(w.bytes().data(), w.bytes().size());
    w.u64(h);
    sink.write(reinterpret_cast<const char *>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    if (!sink)
        throw FormatError("failed to write CADM payload");
}

inline CadmModel cadm_load(std::istream &source)
{
    const std::vector<unsigned char> buf{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
    detail::ByteReader r(buf.data(), buf.size());

    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCadmMagic, sizeof(magic)) != 0)
        throw FormatError("not a CADM model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != CadmModel::kFormatVersion)
        throw FormatError("CADM format version mismatch: file has " + std::to_string(version) + ", expected " +
                          std::to_string(CadmModel::kFormatVersion));
    if (buf.size() < 8 + 8)
        throw FormatError("CADM payload is truncated");
    const std::size_t body = buf.size() - 8;
    detail::ByteReader tail(buf.data() + body, 8);
    if (tail.u64() != detail::fnv1a(buf.data(), body))
        throw FormatError("CADM payload checksum mismatch (corrupt or truncated file)");

    const std::uint32_t l_prime = r.u32();
    const std::uint32_t order = r.u32();
    if (order > static_cast<std::uint32_t>(geom::SlotOrder::Delay))
        throw FormatError("CADM payload has an unknown slot order");
    Bounds bounds;
    bounds.width = r.f64();
    bounds.height = r.f64();
    InputNorm norm;
    norm.scale_x = r.f64();
    norm.offset_x = r.f64();
    norm.scale_y = r.f64();
    norm.offset_y = r.f64();
    const double delay_unit = r.f64();
    VarianceFloors floors;
    floors.theta = r.f64();
    floors.tau = r.f64();
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 2 || n_dims > 64)
        throw FormatError("CADM payload has an invalid layer count");
    std::vector<Eigen::Index> dims;
    for (std::uint32_t i = 0; i < n_dims; ++i)
    {
        const std::uint32_t d = r.u32();
        if (d == 0 || d > (1u << 20))
            throw FormatError("CADM payload has an invalid layer width");
        dims.push_back(static_cast<Eigen::Index>(d));
    }
    std::size_t n_params = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k)
        n_params += static_cast<std::size_t>((dims[k] + 1) * dims[k + 1]);
    if (r.position() + 8 * n_params != body)
        throw FormatError("CADM payload size does not match its header");
    nn::Mlp mlp(dims);
    for (auto &layer : mlp.layers())
    {
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
                layer.weight(i, j) = r.f64();
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
            layer.bias(i) = r.f64();
    }
    if (r.position() != body)
        throw FormatError("CADM payload size does not match its header");
    if (!mlp.all_finite())
        throw FormatError("CADM payload contains non-finite weights");
    try
    {
        CadmModel m(std::move(mlp), l_prime, bounds, norm, delay_unit, floors);
        m.set_slot_order(static_cast<geom::SlotOrder>(order));
        return m;
    }
    catch (const ConfigError &e)
    {
        throw FormatError(std::string("CADM payload is inconsistent: ") + e.what());
    }
}

inline void cadm_save(const CadmModel &model, const std::string &path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path + " for writing");
    cadm_save(model, f);
}

inline CadmModel cadm_load(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path);
    return cadm_load(f);
}

} // namespace ckmsense::cadm

#endif
