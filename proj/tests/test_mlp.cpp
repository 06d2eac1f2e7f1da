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

#include <ckmsense/mlp.hpp>

#include <cmath>
#include <random>

using namespace ckmsense;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
double leaky(double z) { return z > 0.0 ? z : 0.01 * z; }

// Central differences are only meaningful when no hidden unit changes sign
// inside the stencil.
bool stencil_is_smooth(const nn::Mlp &m, const Eigen::VectorXd &x, double h)
{
    const auto base = m.pre_activations(x);
    for (Eigen::Index j = 0; j < x.size(); ++j)
        for (double s : {-h, h})
        {
            Eigen::VectorXd xp = x;
            xp(j) += s;
            const auto pre = m.pre_activations(xp);
            for (std::size_t k = 0; k < pre.size(); ++k)
                for (Eigen::Index i = 0; i < pre[k].size(); ++i)
                    if ((pre[k](i) > 0.0) != (base[k](i) > 0.0))
                        return false;
        }
    return true;
}
} // namespace

TEST_CASE("Forward pass of a hand-built network")
{
    nn::Mlp m({2, 2, 1});
    auto &L = m.layers();
    L[0].weight << 1.0, -2.0, 0.5, 0.25;
    L[0].bias << 0.1, -1.0;
    L[1].weight << 3.0, -1.0;
    L[1].bias << 0.2;
    Eigen::Vector2d x(0.4, 0.7);
    const double h0 = leaky(1.0 * 0.4 - 2.0 * 0.7 + 0.1);
    const double h1 = leaky(0.5 * 0.4 + 0.25 * 0.7 - 1.0);
    const double y = 3.0 * h0 - 1.0 * h1 + 0.2; // linear head
    CHECK_THAT(m.forward(x)(0), WithinAbs(y, 1e-15));
}

TEST_CASE("Default CADM network size")
{
    nn::Mlp m({2, 128, 256, 128, 20});
    CHECK(m.parameter_count() == 68884);
    CHECK(m.all_finite());
    CHECK(m.forward(Eigen::Vector2d(0.3, -0.2)).isZero());
}

TEST_CASE("Input Jacobian agrees with central differences")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial)
    {
        auto m = nn::Mlp::uniform_init({2, 16, 32, 8}, rng);
        Eigen::Vector2d x(u(rng), u(rng));
        const double h = 1e-6;
        if (!stencil_is_smooth(m, x, h))
            continue;
        Eigen::MatrixXd J;
        const Eigen::VectorXd y = m.forward_jacobian(x, J);
        CHECK((y - m.forward(x)).norm() == 0.0);
        for (int j = 0; j < 2; ++j)
        {
            Eigen::Vector2d xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            const Eigen::VectorXd fd = (m.forward(xp) - m.forward(xm)) / (2 * h);
            CHECK((fd - J.col(j)).norm() <= 1e-6 * std::max(1.0, J.col(j).norm()));
        }
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("Batched forward matches per-sample forward")
{
    std::mt19937_64 rng(4);
    auto m = nn::Mlp::uniform_init({2, 8, 8, 3}, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(2, 7);
    nn::Mlp::BatchCache cache;
    const Eigen::MatrixXd Y = m.forward_batch(X, cache);
    for (Eigen::Index c = 0; c < X.cols(); ++c)
        CHECK((Y.col(c) - m.forward(X.col(c))).norm() < 1e-13);
}

TEST_CASE("Backpropagated parameter gradients agree with central differences")
{
    std::mt19937_64 rng(8);
    auto m = nn::Mlp::uniform_init({2, 6, 5, 3}, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(2, 4);
    Eigen::MatrixXd G = Eigen::MatrixXd::Random(3, 4); // dLoss/dOutput for loss = sum(G .* Y)
    nn::Mlp::BatchCache cache;
    m.forward_batch(X, cache);
    std::vector<nn::DenseLayer> grads;
    m.backward_batch(cache, G, grads);
    REQUIRE(grads.size() == 3);

    auto loss = [&](const nn::Mlp &net) {
        nn::Mlp::BatchCache c;
        return (net.forward_batch(X, c).array() * G.array()).sum();
    };
    const double h = 1e-7;
    for (std::size_t k = 0; k < 3; ++k)
    {
        for (Eigen::Index i = 0; i < grads[k].weight.rows(); ++i)
            for (Eigen::Index j = 0; j < grads[k].weight.cols(); ++j)
            {
                auto mp = m, mm = m;
                mp.layers()[k].weight(i, j) += h;
                mm.layers()[k].weight(i, j) -= h;
                const double fd = (loss(mp) - loss(mm)) / (2 * h);
                CHECK_THAT(grads[k].weight(i, j), WithinAbs(fd, 1e-6));
            }
        for (Eigen::Index i = 0; i < grads[k].bias.size(); ++i)
        {
            auto mp = m, mm = m;
            mp.layers()[k].bias(i) += h;
            mm.layers()[k].bias(i) -= h;
            const double fd = (loss(mp) - loss(mm)) / (2 * h);
            CHECK_THAT(grads[k].bias(i), WithinAbs(fd, 1e-6));
        }
    }
}

TEST_CASE("Invalid network shapes are rejected")
{
    CHECK_THROWS_AS(nn::Mlp(std::vector<Eigen::Index>{2}), ConfigError);
    CHECK_THROWS_AS(nn::Mlp(std::vector<Eigen::Index>{2, 0, 3}), ConfigError);
}
