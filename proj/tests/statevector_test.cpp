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

#include "qlatent/statevector.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

#include "dense_oracle.hpp"
#include "test_util.hpp"

using namespace qlatent::sim;
using qlatent::testing::Vec;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(StateVector, init_zero_state) {
    auto s1 = init_zero_state(1);
    ASSERT_EQ(s1.size(), 2u);
    EXPECT_EQ(s1[0], Complex(1.0));
    EXPECT_EQ(s1[1], Complex(0.0));
    auto s2 = init_zero_state(2);
    ASSERT_EQ(s2.size(), 4u);
    EXPECT_EQ(s2[0], Complex(1.0));
    for (int i = 1; i < 4; ++i) EXPECT_EQ(s2[i], Complex(0.0));
    EXPECT_THROW(init_zero_state(21), std::invalid_argument);
    EXPECT_THROW(init_zero_state(0), std::invalid_argument);
}

TEST(StateVector, gate_truth_tables) {
    auto one = apply_gate(init_zero_state(1), GateOp::ry(0, kPi));
    EXPECT_NEAR(std::abs(one[1]), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(one[0]), 0.0, 1e-12);

    // qubit0 = 1 is index 1.
    auto s = apply_gate(StateVector::basis(2, 0b01), GateOp::cnot(0, 1));
    EXPECT_EQ(s[0b11], Complex(1.0));

    auto cz = apply_gate(StateVector::basis(2, 0b11), GateOp::cz(0, 1));
    EXPECT_EQ(cz[0b11], Complex(-1.0));

    auto sw = apply_gate(StateVector::basis(3, 0b001), GateOp::swap(0, 2));
    EXPECT_EQ(sw[0b100], Complex(1.0));
}

TEST(StateVector, invalid_gates_rejected) {
    auto s = init_zero_state(2);
    EXPECT_THROW(s.apply(GateOp::ry(2, 0.1)), std::invalid_argument);
    EXPECT_THROW(s.apply(GateOp::cnot(1, 1)), std::invalid_argument);
    EXPECT_THROW(s.apply(GateOp::ry(0, std::nan(""))), std::invalid_argument);
    Circuit c(2);
    EXPECT_THROW(c.add(GateOp::cz(0, 5)), std::invalid_argument);
}

TEST(StateVector, run_circuit_examples) {
    Circuit empty(3);
    auto s = run_circuit(empty, std::vector<double>{});
    EXPECT_EQ(s[0], Complex(1.0));

    Circuit one(1);
    one.add_trainable(GateOp::ry(0, 0.0));
    auto r = run_circuit(one, std::vector<double>{kPi / 2});
    EXPECT_NEAR(r[0].real(), std::cos(kPi / 4), 1e-12);
    EXPECT_NEAR(r[1].real(), std::sin(kPi / 4), 1e-12);
    EXPECT_THROW((void)run_circuit(one, std::vector<double>{1.0, 2.0}), std::invalid_argument);

    Circuit bell(2);
    bell.add_trainable(GateOp::ry(0, 0.0));
    bell.add(GateOp::cnot(0, 1));
    std::vector<double> p{kPi / 2};
    auto b = run_circuit(bell, p);
    Vec expected = qlatent::testing::circuit_unitary(bell, p).col(0);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(b[i] - expected(i)), 0.0, 1e-12);
    EXPECT_NEAR(b.norm_squared(), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(b[0b11]), std::sqrt(0.5), 1e-12);
}

TEST(StateVector, matches_dense_oracle_on_random_circuits) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 4;
        auto c = qlatent::testing::random_circuit(n, 25, rng);
        const auto params = c.trainable_values();
        auto s = run_circuit(c, params);
        Vec expected = qlatent::testing::circuit_unitary(c, params).col(0);
        for (std::size_t i = 0; i < s.size(); ++i) {
            ASSERT_NEAR(std::abs(s[i] - expected(static_cast<Eigen::Index>(i))), 0.0, 1e-9);
        }
    }
}

TEST(StateVector, gate_then_inverse_restores_state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> a(-kPi, kPi);
    for (int trial = 0; trial < 30; ++trial) {
        const auto start = qlatent::testing::random_state(3, rng);
        const double t = a(rng), p = a(rng), l = a(rng);
        std::vector<std::pair<GateOp, GateOp>> pairs{
            {GateOp::ry(1, t), GateOp::ry(1, -t)},
            {GateOp::rz(2, t), GateOp::rz(2, -t)},
            {GateOp::u3(0, t, p, l), GateOp::u3(0, -t, -l, -p)},
            {GateOp::cnot(2, 0), GateOp::cnot(2, 0)},
            {GateOp::cz(0, 1), GateOp::cz(0, 1)},
            {GateOp::swap(1, 2), GateOp::swap(1, 2)}};
        for (const auto &[fwd, inv] : pairs) {
            auto s = apply_gate(apply_gate(start, fwd), inv);
            for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(std::abs(s[i] - start[i]), 0.0, 1e-9);
        }
    }
}

TEST(StateVector, norm_preserved_on_random_ten_qubit_circuits) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        auto c = qlatent::testing::random_circuit(10, 200, rng);
        EXPECT_NEAR(run_circuit(c).norm_squared(), 1.0, 1e-9);
    }
}

TEST(StateVector, pauli_z_expectations) {
    EXPECT_EQ(pauli_z_expectations(init_zero_state(1))[0], 1.0);
    EXPECT_EQ(pauli_z_expectations(StateVector::basis(1, 1))[0], -1.0);
    auto s = apply_gate(init_zero_state(1), GateOp::ry(0, kPi / 2));
    EXPECT_NEAR(pauli_z_expectations(s)[0], 0.0, 1e-10);
    for (std::uint64_t b = 0; b < 16; ++b) {
        const auto z = pauli_z_expectations(StateVector::basis(4, b));
        for (int q = 0; q < 4; ++q) EXPECT_EQ(z[q], ((b >> q) & 1) ? -1.0 : 1.0);
    }
}

TEST(StateVector, sampling) {
    auto zeros = sample_bitstrings(init_zero_state(2), 100, 1);
    ASSERT_EQ(zeros.size(), 100u);
    for (const auto &b : zeros) EXPECT_EQ(b, "00");

    auto plus = apply_gate(init_zero_state(1), GateOp::ry(0, kPi / 2));
    auto shots = sample_bitstrings(plus, 10000, 99);
    const double ones = std::count(shots.begin(), shots.end(), "1") / 10000.0;
    EXPECT_GE(ones, 0.47);
    EXPECT_LE(ones, 0.53);

    EXPECT_EQ(sample_bitstrings(plus, 500, 7), sample_bitstrings(plus, 500, 7));
    EXPECT_THROW((void)sample_bitstrings(plus, 0, 7), std::invalid_argument);
}

TEST(StateVector, sampling_converges_in_total_variation) {
    std::mt19937_64 rng(17);
    for (int n = 1; n <= 4; ++n) {
        const auto s = qlatent::testing::random_state(n, rng);
        const auto idx = sample_indices(s, 100000, 123 + n);
        std::vector<double> freq(s.size(), 0.0);
        for (auto i : idx) freq[i] += 1.0 / idx.size();
        const auto p = s.probabilities();
        double tv = 0;
        for (std::size_t i = 0; i < p.size(); ++i) tv += 0.5 * std::abs(freq[i] - p[i]);
        EXPECT_LT(tv, 0.02) << "n=" << n;
    }
}

TEST(StateVector, reduced_density_matrix) {
    std::vector<int> keep0{0};
    auto rho = reduced_density_matrix(init_zero_state(2), keep0);
    EXPECT_EQ(rho(0, 0), Complex(1.0));
    EXPECT_EQ(rho(1, 1), Complex(0.0));
    EXPECT_EQ(rho(0, 1), Complex(0.0));

    Circuit bell(2);
    bell.add(GateOp::ry(0, kPi / 2));
    bell.add(GateOp::cnot(0, 1));
    auto rb = reduced_density_matrix(run_circuit(bell), keep0);
    EXPECT_NEAR(rb(0, 0).real(), 0.5, 1e-12);
    EXPECT_NEAR(rb(1, 1).real(), 0.5, 1e-12);
    EXPECT_NEAR(std::abs(rb(0, 1)), 0.0, 1e-12);

    std::vector<int> none, all{0, 1};
    EXPECT_THROW((void)reduced_density_matrix(init_zero_state(2), none), std::invalid_argument);
    EXPECT_THROW((void)reduced_density_matrix(init_zero_state(2), all), std::invalid_argument);
}

TEST(StateVector, reduced_density_matrix_matches_oracle) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = qlatent::testing::random_state(3, rng);
        for (const std::vector<int> &keep : {std::vector<int>{0, 1}, {1, 2}, {0, 2}, {1}}) {
            const auto rho = reduced_density_matrix(s, keep);
            const auto oracle = qlatent::testing::partial_trace_oracle(qlatent::testing::to_eigen(s), 3, keep);
            Complex trace = 0;
            for (std::size_t r = 0; r < rho.dim; ++r) {
                trace += rho(r, r);
                for (std::size_t c = 0; c < rho.dim; ++c) {
                    ASSERT_NEAR(std::abs(rho(r, c) - oracle(r, c)), 0.0, 1e-10);
                    ASSERT_NEAR(std::abs(rho(r, c) - std::conj(rho(c, r))), 0.0, 1e-12);
                }
            }
            EXPECT_NEAR(trace.real(), 1.0, 1e-10);
        }
    }
}

TEST(StateVector, bitstring_convention) {
    EXPECT_EQ(index_to_bitstring(0b01, 2), "10");
    EXPECT_EQ(bitstring_to_index("10"), 1u);
    EXPECT_THROW((void)bitstring_to_index("1x"), std::invalid_argument);
}
