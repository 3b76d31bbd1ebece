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

#include "qlatent/diagnostics.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

#include "dense_oracle.hpp"
#include "test_util.hpp"

using namespace qlatent::diag;
using namespace qlatent::ansatz;
using qlatent::sim::Circuit;
using qlatent::sim::GateOp;

namespace {

constexpr double kPi = std::numbers::pi;

Circuit ghz(int n) {
    Circuit c(n);
    c.add(GateOp::ry(0, kPi / 2));
    for (int q = 0; q + 1 < n; ++q) c.add(GateOp::cnot(q, q + 1));
    return c;
}

double central_difference(const Circuit &c, std::vector<double> params, std::size_t k, double h) {
    params[k] += h;
    const double plus = z_cost(c, params, 0);
    params[k] -= 2 * h;
    const double minus = z_cost(c, params, 0);
    return (plus - minus) / (2 * h);
}

} // namespace

TEST(Entropy, examples) {
    std::vector<int> p0{0};
    EXPECT_NEAR(entanglement_entropy(qlatent::sim::init_zero_state(2), p0), 0.0, 1e-12);
    EXPECT_NEAR(entanglement_entropy(qlatent::sim::run_circuit(ghz(2)), p0), std::log(2.0), 1e-9);

    const auto g4 = qlatent::sim::run_circuit(ghz(4));
    std::vector<int> p01{0, 1};
    // Oracle: eigenvalues of the index-summed partial trace.
    const auto rho = qlatent::testing::partial_trace_oracle(qlatent::testing::to_eigen(g4), 4, p01);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    double oracle = 0;
    for (double l : es.eigenvalues())
        if (l > 1e-12) oracle -= l * std::log(l);
    EXPECT_NEAR(oracle, std::log(2.0), 1e-12);
    EXPECT_NEAR(entanglement_entropy(g4, p01), oracle, 1e-10);

    std::vector<int> bad{};
    EXPECT_THROW((void)entanglement_entropy(g4, bad), std::invalid_argument);
}

TEST(Entropy, complement_symmetry_and_bounds) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto s = qlatent::testing::random_state(5, rng);
        std::vector<int> a{0, 3}, b{1, 2, 4};
        const double ea = entanglement_entropy(s, a);
        EXPECT_NEAR(ea, entanglement_entropy(s, b), 1e-9);
        EXPECT_GE(ea, 0.0);
        EXPECT_LE(ea, 2 * std::log(2.0) + 1e-12);
    }
}

TEST(Entropy, product_circuits_have_zero_entropy) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        Circuit c(5);
        for (int q = 0; q < 5; ++q) {
            const auto a = qlatent::testing::random_angles(3, rng);
            c.add(GateOp::u3(q, a[0], a[1], a[2]));
            c.add(GateOp::ry(q, a[1]));
        }
        const auto s = qlatent::sim::run_circuit(c);
        EXPECT_NEAR(entanglement_entropy(s, half_partition(5)), 0.0, 1e-9);
    }
}

TEST(ParameterShift, single_rotation) {
    Circuit c(1);
    c.add_trainable(GateOp::ry(0, 0.0));
    EXPECT_NEAR(parameter_shift_gradient(c, std::vector<double>{kPi / 2}, 0, 0), -1.0, 1e-12);
    EXPECT_NEAR(parameter_shift_gradient(c, std::vector<double>{0.0}, 0, 0), 0.0, 1e-12);
    for (double th : {0.3, 1.1, 2.9, -0.7})
        EXPECT_NEAR(parameter_shift_gradient(c, std::vector<double>{th}, 0, 0), -std::sin(th), 1e-12);
    EXPECT_THROW((void)parameter_shift_gradient(c, std::vector<double>{0.0}, 1, 0), std::invalid_argument);
}

TEST(ParameterShift, matches_finite_differences_for_every_ansatz) {
    std::mt19937_64 rng(8);
    for (auto kind : kAllKinds) {
        for (int n : {2, 3, 6}) {
            const AnsatzSpec spec{kind, n, 2};
            const auto np = static_cast<std::size_t>(param_count(spec));
            const auto c = build_ansatz(spec, std::vector<double>(np, 0.0));
            for (int draw = 0; draw < 20; ++draw) {
                const auto params = qlatent::testing::random_angles(np, rng);
                const std::size_t k = static_cast<std::size_t>(draw) % np;
                const double ps = parameter_shift_gradient(c, params, k, 0);
                EXPECT_NEAR(ps, central_difference(c, params, k, 1e-5), 1e-6)
                    << to_string(kind) << " n=" << n << " k=" << k;
            }
        }
    }
}

TEST(GradientVariance, single_rotation_analytic) {
    Circuit c(1);
    c.add_trainable(GateOp::ry(0, 0.0));
    const auto est = gradient_variance(c, 1000, 21);
    EXPECT_NEAR(est.variance, 0.5, 0.05);
    EXPECT_GE(est.variance, 0.0);
    EXPECT_THROW((void)gradient_variance(c, 10, 21), std::invalid_argument);
}

TEST(GradientVariance, decreases_with_qubits_for_ese2) {
    double prev = INFINITY;
    for (int n : {4, 6, 8, 10}) {
        const double v = gradient_variance(AnsatzSpec{AnsatzKind::ESE2, n, 6}, 300, 5).variance;
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, prev * 1.15) << "n=" << n;
        prev = v;
    }
}

TEST(GradientVariance, seed_stable) {
    const AnsatzSpec spec{AnsatzKind::SE, 4, 3};
    const auto a = gradient_variance(spec, 500, 1);
    const auto b = gradient_variance(spec, 500, 987654321);
    EXPECT_LT(std::abs(a.variance - b.variance), 3 * std::hypot(a.stderr_, b.stderr_));
}

TEST(SlopeFit, synthetic_sweeps) {
    GradientVarianceSweep s;
    s.qubit_range = {2, 3, 4, 5};
    for (int n : s.qubit_range) s.variances.push_back(std::pow(10.0, -n));
    EXPECT_NEAR(fit_bp_slope(s), -1.0, 1e-12);
    s.variances.assign(4, 0.25);
    EXPECT_NEAR(fit_bp_slope(s), 0.0, 1e-12);

    s.qubit_range = {4, 4, 4, 4};
    EXPECT_THROW((void)fit_bp_slope(s), std::invalid_argument);
    s.qubit_range = {4, 5};
    s.variances = {1, 1};
    EXPECT_THROW((void)fit_bp_slope(s), std::invalid_argument);
}
