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

#ifndef CKMSENSE_MLP_HPP
#define CKMSENSE_MLP_HPP

#include "common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace ckmsense::nn
{

inline constexpr double kLeakySlope = 0.01;

struct DenseLayer
{
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

/// Fully-connected network with leaky-rectifier hidden layers and a linear
/// output head. Weights are stored row-major per layer (out x in).
class Mlp
{
  public:
    Mlp() = default;

    /// Zero-initialized network with the given dimension chain, e.g. {2, 128, 256, 128, 20}.
    explicit Mlp(const std::vector<Eigen::Index> &dims) : dims_(dims)
    {
        if (dims.size() < 2)
            throw ConfigError("network needs at least an input and an output dimension");
        for (auto d : dims)
            if (d < 1)
                throw ConfigError("network dimensions must be positive");
        for (std::size_t k = 0; k + 1 < dims.size(); ++k)
            layers_.push_back({Eigen::MatrixXd::Zero(dims[k + 1], dims[k]), Eigen::VectorXd::Zero(dims[k + 1])});
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of weights and biases.
    template <class Rng>
    static Mlp uniform_init(const std::vector<Eigen::Index> &dims, Rng &rng)
    {
        Mlp m(dims);
        for (auto &layer : m.layers_)
        {
            const double lim = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
            std::uniform_real_distribution<double> u(-lim, lim);
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
                for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
                    layer.weight(i, j) = u(rng);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                layer.bias(i) = u(rng);
        }
        return m;
    }

    const std::vector<Eigen::Index> &dims() const { return dims_; }
    std::vector<DenseLayer> &layers() { return layers_; }
    const std::vector<DenseLayer> &layers() const { return layers_; }
    Eigen::Index input_dim() const { return dims_.front(); }
    Eigen::Index output_dim() const { return dims_.back(); }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto &l : layers_)
            n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    bool all_finite() const
    {
        for (const auto &l : layers_)
            if (!l.weight.allFinite() || !l.bias.allFinite())
                return false;
        return true;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd &x) const
    {
        Eigen::VectorXd a = x;
        for (std::size_t k = 0; k < layers_.size(); ++k)
        {
            Eigen::VectorXd z = layers_[k].weight * a + layers_[k].bias;
            if (k + 1 < layers_.size())
                a = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
            else
                a = std::move(z);
        }
        return a;
    }

    /// Output plus the input Jacobian d(out)/d(in), propagated forward.
    Eigen::VectorXd forward_jacobian(const Eigen::VectorXd &x, Eigen::MatrixXd &jac) const
    {
        Eigen::VectorXd a = x;
        jac = Eigen::MatrixXd::Identity(x.size(), x.size());
        for (std::size_t k = 0; k < layers_.size(); ++k)
        {
            Eigen::VectorXd z = layers_[k].weight * a + layers_[k].bias;
            Eigen::MatrixXd t = layers_[k].weight * jac;
            if (k + 1 < layers_.size())
            {
                for (Eigen::Index i = 0; i < z.size(); ++i)
                {
                    if (z(i) <= 0.0)
                    {
                        z(i) *= kLeakySlope;
                        t.row(i) *= kLeakySlope;
                    }
                }
            }
            a = std::move(z);
            jac = std::move(t);
        }
        return a;
    }

    /// Hidden-layer pre-activations, one vector per hidden layer.
    std::vector<Eigen::VectorXd> pre_activations(const Eigen::VectorXd &x) const
    {
        std::vector<Eigen::VectorXd> out;
        Eigen::VectorXd a = x;
        for (std::size_t k = 0; k + 1 < layers_.size(); ++k)
        {
            Eigen::VectorXd z = layers_[k].weight * a + layers_[k].bias;
            a = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
            out.push_back(std::move(z));
        }
        return out;
    }

    struct BatchCache
    {
        std::vector<Eigen::MatrixXd> inputs; // inputs[k]: activations entering layer k (dim x batch)
        std::vector<Eigen::MatrixXd> pre;    // pre[k]: pre-activations of hidden layer k
    };

    /// Column-batched forward pass; `x` is input_dim x batch.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd &x, BatchCache &cache) const
    {
        cache.inputs.resize(layers_.size());
        cache.pre.resize(layers_.size() - 1);
        cache.inputs[0] = x;
        for (std::size_t k = 0; k < layers_.size(); ++k)
        {
            Eigen::MatrixXd z = layers_[k].weight * cache.inputs[k];
            z.colwise() += layers_[k].bias;
            if (k + 1 == layers_.size())
                return z;
            cache.inputs[k + 1] = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
            cache.pre[k] = std::move(z);
        }
        return {};
    }

    /// Backpropagates d(loss)/d(out) through a cached batch, overwriting `grads`
    /// (same shapes as layers()).
    void backward_batch(const BatchCache &cache, const Eigen::MatrixXd &grad_out, std::vector<DenseLayer> &grads) const
    {
        grads.resize(layers_.size());
        Eigen::MatrixXd delta = grad_out;
        for (std::size_t k = layers_.size(); k-- > 0;)
        {
            grads[k].weight.noalias() = delta * cache.inputs[k].transpose();
            grads[k].bias = delta.rowwise().sum();
            if (k == 0)
                break;
            Eigen::MatrixXd back = layers_[k].weight.transpose() * delta;
            const auto &z = cache.pre[k - 1];
            delta = back.binaryExpr(z, [](double g, double v) { return v > 0.0 ? g : kLeakySlope * g; });
        }
    }

  private:
    std::vector<Eigen::Index> dims_;
    std::vector<DenseLayer> layers_;
};

} // namespace ckmsense::nn

#endif
