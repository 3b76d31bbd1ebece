// Copyright 2026 The qlatent Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qlatent/nn.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "grad_check.hpp"
#include "qlatent/optim.hpp"

using namespace qlatent;
using ad::Tensor;
using nn::NamedParams;
using qlatent::testing::grad_check;
using qlatent::testing::random_projection_loss;
using qlatent::testing::random_tensor;

namespace {

// Loss over the inputs plus every parameter of a module, for grad_check.
std::vector<Tensor> with_params(std::vector<Tensor> inputs, const NamedParams &params) {
    for (const auto &[name, t] : params) inputs.push_back(t);
    return inputs;
}

void randomize(NamedParams &params, std::mt19937_64 &rng, double lo = -0.5, double hi = 0.5) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto &[name, t] : params)
        for (auto &x : t.mutable_data()) x = u(rng);
}

nn::QuantumLayerConfig qcfg(ansatz::AnsatzKind kind, int n, int L, int in, int out) {
    nn::QuantumLayerConfig c;
    c.kind = kind;
    c.n_qubits = n;
    c.n_layers = L;
    c.in_features = in;
    c.out_features = out;
    return c;
}

} // namespace

TEST(linear, identity_weights_pass_input_through) {
    std::mt19937_64 rng(1);
    nn::Linear lin(3, 3, rng);
    auto w = lin.weight.mutable_data();
    for (std::size_t i = 0; i < 9; ++i) w[i] = (i % 4 == 0) ? 1.0 : 0.0;
    auto x = random_tensor({4, 3}, rng, -1, 1, false);
    auto y = lin.forward(x);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(conv, zero_kernel_gives_zero_output) {
    std::mt19937_64 rng(2);
    nn::Conv2d conv(3, 5, 3, 1, rng);
    for (auto &v : conv.weight.mutable_data()) v = 0.0;
    auto y = conv.forward(random_tensor({2, 3, 8, 8}, rng));
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(nn::Conv2d(3, 5, 5, 1, rng), std::invalid_argument);
    EXPECT_THROW(nn::Conv2d(3, 5, 3, 3, rng), std::invalid_argument);
}

TEST(init, truncated_normal_bounds) {
    std::mt19937_64 rng(3);
    auto t = nn::init_truncated_normal({1000}, 0.02, rng);
    double s2 = 0;
    for (double v : t.data()) {
        EXPECT_LE(std::abs(v), 0.04);
        s2 += v * v;
    }
    EXPECT_NEAR(std::sqrt(s2 / 1000), 0.0176, 0.002);  // sd of a normal truncated at 2 sigma
}

TEST(resblock, gradient_matches_finite_differences_1x4x8x8) {
    std::mt19937_64 rng(4);
    nn::ResBlock block(4, 4, 0, {}, rng);
    NamedParams params;
    block.collect("rb", params);
    randomize(params, rng);
    auto x = random_tensor({1, 4, 8, 8}, rng);
    const double err = grad_check(with_params({x}, params), [&](const auto &in) {
        return random_projection_loss(block.forward(in[0]), 99);
    }, 1e-4);
    EXPECT_LT(err, 1e-3);
}

TEST(resblock, randomized_configurations) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> ch(1, 4), sp(2, 4), kind(0, 2);
    for (int c = 0; c < 20; ++c) {
        const int in = ch(rng), out = ch(rng), tdim = (c % 2) ? 3 : 0;
        nn::BlockExtra extra;
        extra.kind = static_cast<nn::BlockExtra::Kind>(kind(rng));
        extra.quantum = qcfg(ansatz::AnsatzKind::ESE2, 2, 1, 1, 1);
        extra.cdcnn_nodes = 2;
        nn::ResBlock block(in, out, tdim, extra, rng);
        NamedParams params;
        block.collect("rb", params);
        randomize(params, rng);
        const auto s = static_cast<std::size_t>(sp(rng));
        auto x = random_tensor({2, static_cast<std::size_t>(in), s, s}, rng);
        auto temb = random_tensor({2, 3}, rng);
        const double err = grad_check(with_params({x, temb}, params), [&](const auto &inp) {
            return random_projection_loss(block.forward(inp[0], tdim ? inp[1] : Tensor()), 7 + c);
        }, 1e-5);
        EXPECT_LT(err, 1e-3) << "config " << c;
    }
}

TEST(resblock, skip_projection_only_on_channel_change) {
    std::mt19937_64 rng(6);
    NamedParams same, diff;
    nn::ResBlock(4, 4, 0, {}, rng).collect("a", same);
    nn::ResBlock(4, 8, 0, {}, rng).collect("b", diff);
    auto has_skip = [](const NamedParams &p) {
        for (const auto &[n, t] : p)
            if (n.find(".skip.") != std::string::npos) return true;
        return false;
    };
    EXPECT_FALSE(has_skip(same));
    EXPECT_TRUE(has_skip(diff));
}

TEST(quantum_layer, zero_input_zero_params_gives_post_times_ones) {
    std::mt19937_64 rng(7);
    nn::QuantumLayer q(qcfg(ansatz::AnsatzKind::ESE2, 4, 2, 3, 2), rng);
    for (auto &v : q.theta.mutable_data()) v = 0.0;
    auto post = q.post.mutable_data();
    for (std::size_t i = 0; i < post.size(); ++i) post[i] = 0.1 * static_cast<double>(i + 1);
    auto y = q.forward(Tensor::zeros({1, 3}));
    // Column sums of post.
    EXPECT_NEAR(y.data()[0], 0.1 + 0.3 + 0.5 + 0.7, 1e-12);
    EXPECT_NEAR(y.data()[1], 0.2 + 0.4 + 0.6 + 0.8, 1e-12);
}

TEST(quantum_layer, parameter_count_matches_ansatz) {
    std::mt19937_64 rng(8);
    for (auto kind : ansatz::kAllKinds) {
        nn::QuantumLayer q(qcfg(kind, 4, 2, 2, 2), rng);
        EXPECT_EQ(q.ansatz_parameter_count(),
                  static_cast<std::size_t>(ansatz::param_count({kind, 4, 2})));
    }
    nn::QuantumLayer big(qcfg(ansatz::AnsatzKind::ESE2, 12, 6, 2, 2), rng);
    EXPECT_EQ(big.ansatz_parameter_count(), 216u);
}

TEST(quantum_layer, gradient_matches_finite_differences_all_kinds) {
    std::mt19937_64 rng(9);
    for (auto kind : ansatz::kAllKinds) {
        nn::QuantumLayer q(qcfg(kind, 4, 2, 3, 2), rng);
        NamedParams params;
        q.collect("q", params);
        randomize(params, rng, -1.5, 1.5);
        auto x = random_tensor({2, 3}, rng);
        const double err = grad_check(with_params({x}, params), [&](const auto &in) {
            return random_projection_loss(q.forward(in[0]), 11);
        }, 1e-5);
        EXPECT_LT(err, 1e-4) << ansatz::to_string(kind);
    }
}

TEST(quantum_layer, identical_rows_identical_outputs) {
    std::mt19937_64 rng(10);
    nn::QuantumLayer q(qcfg(ansatz::AnsatzKind::SE, 4, 2, 2, 3), rng);
    NamedParams params;
    q.collect("q", params);
    randomize(params, rng);
    auto y = q.forward(Tensor::from_data({3, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7}));
    for (std::size_t r = 1; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y.data()[r * 3 + c], y.data()[c]);
}

TEST(quantum_layer, expectations_bounded_and_deterministic) {
    std::mt19937_64 rng(11);
    auto c = ansatz::build_angle_encoder(std::vector<double>(5, 0.0), 5);
    c.append(ansatz::build_ansatz({ansatz::AnsatzKind::BE, 5, 3}, std::vector<double>(15, 0.0)));
    auto circuit = std::make_shared<const sim::Circuit>(c);
    for (int trial = 0; trial < 20; ++trial) {
        auto angles = random_tensor({4, 5}, rng, -20, 20);
        auto theta = random_tensor({15}, rng, -20, 20);
        auto z = nn::quantum_expectation(angles, theta, circuit);
        auto z2 = nn::quantum_expectation(angles, theta, circuit);
        for (std::size_t i = 0; i < z.numel(); ++i) {
            EXPECT_GE(z.data()[i], -1.0 - 1e-12);
            EXPECT_LE(z.data()[i], 1.0 + 1e-12);
            EXPECT_EQ(z.data()[i], z2.data()[i]);
        }
    }
}

TEST(quantum_layer, errors) {
    std::mt19937_64 rng(12);
    EXPECT_THROW(nn::QuantumLayer(qcfg(ansatz::AnsatzKind::SE, 1, 1, 1, 1), rng), std::invalid_argument);
    EXPECT_THROW(nn::QuantumLayer(qcfg(ansatz::AnsatzKind::SE, 15, 1, 1, 1), rng), std::invalid_argument);
    EXPECT_THROW(nn::QuantumLayer(qcfg(ansatz::AnsatzKind::SE, 4, 1, 0, 1), rng), std::invalid_argument);
    nn::QuantumLayer q(qcfg(ansatz::AnsatzKind::SE, 4, 1, 2, 2), rng);
    EXPECT_THROW((void)q.forward(Tensor::zeros({1, 3})), std::invalid_argument);
    EXPECT_THROW((void)q.forward(Tensor::from_data({1, 2}, {NAN, 0.0})), std::invalid_argument);
}

TEST(quantum_layer, shot_mode_estimates_expectations) {
    std::mt19937_64 rng(13);
    nn::QuantumLayer q(qcfg(ansatz::AnsatzKind::ESE2, 4, 2, 2, 4), rng);
    auto post = q.post.mutable_data();
    for (std::size_t i = 0; i < post.size(); ++i) post[i] = (i % 5 == 0) ? 1.0 : 0.0;  // identity
    auto x = Tensor::from_data({1, 2}, {0.4, -0.2});
    const auto exact = q.forward(x);
    const std::size_t shots = 20000;
    for (double alpha : {0.0, 0.1}) {
        q.set_shot_mode(nn::ShotMode{shots, alpha, 5});
        const auto est = q.forward(x);
        for (std::size_t i = 0; i < 4; ++i) {
            const double expect = (1 - 2 * alpha) * exact.data()[i];
            EXPECT_NEAR(est.data()[i], expect, 4 * 2.0 / std::sqrt(static_cast<double>(shots)));
        }
        q.set_shot_mode(nn::ShotMode{shots, alpha, 5});
        const auto again = q.forward(x);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(again.data()[i], est.data()[i]);
    }
    q.set_shot_mode(std::nullopt);
    EXPECT_EQ(q.forward(x).data()[0], exact.data()[0]);
}

TEST(pipeline, conv_quantum_linear_gradient) {
    std::mt19937_64 rng(14);
    nn::Conv2d conv(2, 3, 3, 2, rng);
    nn::QuantumLayer q(qcfg(ansatz::AnsatzKind::ESE1, 4, 2, 3, 3), rng);
    nn::Linear lin(3, 2, rng);
    NamedParams params;
    conv.collect("conv", params);
    q.collect("q", params);
    lin.collect("lin", params);
    randomize(params, rng, -1, 1);
    auto x = random_tensor({2, 2, 4, 4}, rng);
    const double err = grad_check(with_params({x}, params), [&](const auto &in) {
        auto h = ad::global_avg_pool(conv.forward(in[0]));
        return random_projection_loss(lin.forward(q.forward(h)), 5);
    });
    EXPECT_LT(err, 1e-3);
}

TEST(cdcnn, core_parameter_count) {
    std::mt19937_64 rng(15);
    EXPECT_EQ(nn::CdcnnLayer(32, 8, rng).core_parameter_count(), 16384u);
    EXPECT_EQ(nn::CdcnnLayer(5, 3, rng).core_parameter_count(), 4u * 81u);
}

TEST(cdcnn, gradient_matches_finite_differences) {
    std::mt19937_64 rng(16);
    for (int c = 0; c < 20; ++c) {
        nn::CdcnnLayer layer(3, 2, rng);
        NamedParams params;
        layer.collect("c", params);
        randomize(params, rng, -1, 1);
        auto x = random_tensor({2, 3}, rng);
        EXPECT_LT(grad_check(with_params({x}, params),
                             [&](const auto &in) { return random_projection_loss(layer.forward(in[0]), c); }),
                  1e-3);
    }
}

// ---------------------------------------------------------------------------
// Optimizers

TEST(optimizer, zero_gradient) {
    auto p = Tensor::from_data({2}, {1.0, -2.0}, true);
    optim::Optimizer adam({optim::OptimizerKind::Adam}, {{"p", p}});
    (void)p.mutable_grad();
    adam.step();
    EXPECT_EQ(p.data()[0], 1.0);
    EXPECT_EQ(p.data()[1], -2.0);

    auto w = Tensor::from_data({2}, {1.0, -2.0}, true);
    optim::OptimizerConfig cfg{optim::OptimizerKind::AdamW};
    optim::Optimizer adamw(cfg, {{"w", w}});
    (void)w.mutable_grad();
    adamw.step();
    EXPECT_DOUBLE_EQ(w.data()[0], 1.0 * (1 - cfg.lr * cfg.weight_decay));
    EXPECT_DOUBLE_EQ(w.data()[1], -2.0 * (1 - cfg.lr * cfg.weight_decay));
}

TEST(optimizer, first_step_formula) {
    auto p = Tensor::from_data({3}, {0.5, 0.5, 0.5}, true);
    optim::OptimizerConfig cfg;
    optim::Optimizer adam(cfg, {{"p", p}});
    auto g = p.mutable_grad();
    g[0] = 3.0;
    g[1] = -0.02;
    g[2] = 1e-3;
    adam.step();
    // m_hat = g, v_hat = g^2 -> delta = -lr g / (|g| + eps).
    for (std::size_t i = 0; i < 3; ++i) {
        const double gi = adam.params()[0].second.grad()[i];
        EXPECT_NEAR(p.data()[i] - 0.5, -cfg.lr * gi / (std::abs(gi) + cfg.eps), 1e-9);
    }
}

TEST(optimizer, quadratic_matches_reference_recurrence) {
    auto x = Tensor::from_data({1}, {0.0}, true);
    optim::OptimizerConfig cfg;
    cfg.lr = 0.01;
    optim::Optimizer adam(cfg, {{"x", x}});
    // Scalar Adam written out independently.
    double rx = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 1000; ++t) {
        adam.zero_grad();
        ad::backward(ad::sum(ad::square(ad::add_scalar(x, -3.0))));
        adam.step();
        const double g = 2 * (rx - 3.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        rx -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        ASSERT_NEAR(x.data()[0], rx, 1e-12) << "step " << t;
        if (t == 500) EXPECT_LT(std::abs(x.data()[0] - 3.0), 0.2);
    }
    EXPECT_LT(std::abs(x.data()[0] - 3.0), 0.05);
}

TEST(optimizer, non_finite_gradient_rejected) {
    auto a = Tensor::from_data({1}, {1.0}, true);
    auto b = Tensor::from_data({1}, {2.0}, true);
    optim::Optimizer adam({}, {{"a", a}, {"b", b}});
    a.mutable_grad()[0] = 1.0;
    b.mutable_grad()[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(adam.step(), std::runtime_error);
    EXPECT_EQ(a.data()[0], 1.0);
    EXPECT_EQ(adam.step_count(), 0u);
}

TEST(optimizer, invalid_config) {
    optim::OptimizerConfig cfg;
    cfg.lr = 0;
    EXPECT_THROW(optim::Optimizer(cfg, {}), std::invalid_argument);
    cfg.lr = 1e-3;
    cfg.beta1 = 1.0;
    EXPECT_THROW(optim::Optimizer(cfg, {}), std::invalid_argument);
}
