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

#include "qlatent/noise.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

#include "dense_oracle.hpp"
#include "qlatent/ansatz.hpp"
#include "test_util.hpp"

using namespace qlatent::noise;
using qlatent::sim::Circuit;
using qlatent::sim::GateOp;
using qlatent::sim::StateVector;

namespace {

// Checks U_routed |k> == P U |k> for every basis input k.
void expect_equivalent_up_to_layout(const Circuit &original, const RoutedCircuit &routed) {
    const auto params = original.trainable_values();
    const auto u = qlatent::testing::circuit_unitary(original, params);
    const auto ur = qlatent::testing::circuit_unitary(routed.circuit, params);
    const Eigen::Index dim = u.rows();
    for (Eigen::Index k = 0; k < dim; ++k) {
        for (Eigen::Index p = 0; p < dim; ++p) {
            const auto l = static_cast<Eigen::Index>(
                physical_to_logical(static_cast<std::uint64_t>(p), routed.final_layout));
            ASSERT_NEAR(std::abs(ur(p, k) - u(l, k)), 0.0, 1e-9);
        }
    }
}

double total_variation(const ProbabilityMap &a, const ProbabilityMap &b) {
    std::map<std::uint64_t, double> diff;
    for (auto [k, v] : a) diff[k] += v;
    for (auto [k, v] : b) diff[k] -= v;
    double tv = 0;
    for (auto [k, v] : diff) tv += 0.5 * std::abs(v);
    return tv;
}

} // namespace

TEST(Routing, adjacent_gate_untouched) {
    Circuit c(3);
    c.add(GateOp::cnot(0, 1));
    const auto r = route_to_linear_chain(c);
    EXPECT_EQ(r.swaps_added, 0u);
    EXPECT_EQ(r.circuit.ops(), c.ops());
    EXPECT_EQ(r.final_layout, (std::vector<int>{0, 1, 2}));
}

TEST(Routing, distant_cnot_gets_one_swap) {
    Circuit c(3);
    c.add(GateOp::ry(0, 0.4));
    c.add(GateOp::cnot(0, 2));
    const auto r = route_to_linear_chain(c);
    EXPECT_EQ(r.swaps_added, 1u);
    ASSERT_EQ(r.circuit.ops().size(), 3u);
    EXPECT_EQ(r.circuit.ops()[1], GateOp::swap(0, 1));
    EXPECT_EQ(r.circuit.ops()[2], GateOp::cnot(1, 2));
    expect_equivalent_up_to_layout(c, r);
}

TEST(Routing, preserves_unitary_action_on_random_circuits) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 3;
        const auto c = qlatent::testing::random_circuit(n, 20, rng);
        const auto r = route_to_linear_chain(c);
        expect_equivalent_up_to_layout(c, r);
        EXPECT_EQ(r.circuit.one_qubit_gate_count(), c.one_qubit_gate_count());
        EXPECT_EQ(r.circuit.two_qubit_gate_count(), c.two_qubit_gate_count() + r.swaps_added);
        EXPECT_EQ(r.circuit.n_trainable(), c.n_trainable());
        for (const auto &op : r.circuit.ops())
            if (op.is_two_qubit()) ASSERT_EQ(std::abs(op.qubits[0] - op.qubits[1]), 1);
    }
}

TEST(Routing, se_costs_more_than_ese2) {
    using namespace qlatent::ansatz;
    // One SE layer with range 2 is the second layer of a 2-layer SE circuit.
    const AnsatzSpec se{AnsatzKind::SE, 4, 2}, e2{AnsatzKind::ESE2, 4, 2};
    const auto rse = route_to_linear_chain(build_ansatz(se, std::vector<double>(24, 0.0)));
    const auto re2 = route_to_linear_chain(build_ansatz(e2, std::vector<double>(24, 0.0)));
    EXPECT_GT(rse.circuit.two_qubit_gate_count(), re2.circuit.two_qubit_gate_count());
    EXPECT_EQ(re2.swaps_added, 0u);
}

TEST(NoisySampling, empty_circuit_no_noise) {
    Circuit c(3);
    const auto d = sample_noisy(c, {}, NoiseModel{0.0, 0.0, 0.0, 4}, 400, 1);
    EXPECT_EQ(d.total(), 400u);
    EXPECT_EQ(d.count("000"), 400u);
}

TEST(NoisySampling, readout_flip_marginals) {
    Circuit c(8);
    const auto d = sample_noisy(c, {}, NoiseModel{0.1, 0.0, 0.0, 10}, 100000, 2);
    for (double m : d.marginals()) {
        EXPECT_GE(m, 0.09);
        EXPECT_LE(m, 0.11);
    }
}

TEST(NoisySampling, noiseless_matches_ideal_sampling) {
    std::mt19937_64 rng(9);
    const qlatent::ansatz::AnsatzSpec spec{qlatent::ansatz::AnsatzKind::ESE2, 4, 2};
    const auto params = qlatent::testing::random_angles(24, rng);
    const auto c = qlatent::ansatz::build_ansatz(spec, params);
    const auto noisy = sample_noisy(c, params, NoiseModel{0.0, 0.0, 0.0, 100}, 100000, 5);
    const auto ideal = sample_ideal(qlatent::sim::run_circuit(c, params), 100000, 6);
    EXPECT_LT(total_variation(to_probabilities(noisy), to_probabilities(ideal)), 0.02);
}

TEST(NoisySampling, rejects_bad_configuration) {
    Circuit c(2);
    EXPECT_THROW((void)sample_noisy(c, {}, NoiseModel{0.0, 0.0, 0.0, 10}, 5, 1), std::invalid_argument);
    EXPECT_THROW((void)sample_noisy(c, {}, NoiseModel{0.5, 0.0, 0.0, 1}, 5, 1), std::invalid_argument);
    EXPECT_THROW((void)sample_noisy(c, {}, NoiseModel{0.0, 0.0, 0.0, 1}, 0, 1), std::invalid_argument);
}

TEST(NoisySampling, deterministic_given_seed) {
    const qlatent::ansatz::AnsatzSpec spec{qlatent::ansatz::AnsatzKind::SE, 3, 2};
    std::vector<double> p(18, 0.7);
    const auto c = qlatent::ansatz::build_ansatz(spec, p);
    const NoiseModel nm{0.05, 0.01, 0.05, 20};
    EXPECT_EQ(sample_noisy(c, p, nm, 2000, 77).counts(), sample_noisy(c, p, nm, 2000, 77).counts());
}

TEST(NoisySampling, two_qubit_noise_monotone) {
    std::mt19937_64 rng(13);
    const qlatent::ansatz::AnsatzSpec spec{qlatent::ansatz::AnsatzKind::ESE2, 4, 3};
    std::vector<double> means, sds;
    for (double p2 : {0.0, 0.05, 0.2}) {
        std::vector<double> ds;
        for (int s = 0; s < 6; ++s) {
            std::mt19937_64 prng(100 + s);
            const auto params = qlatent::testing::random_angles(36, prng);
            const auto c = qlatent::ansatz::build_ansatz(spec, params);
            const auto ideal = sample_ideal(qlatent::sim::run_circuit(c, params), 20000, 1000 + s);
            const auto noisy = sample_noisy(c, params, NoiseModel{0.02, 0.0, p2, 200}, 20000, 2000 + s);
            ds.push_back(expected_hamming_distance(noisy, ideal));
        }
        double m = 0, v = 0;
        for (double d : ds) m += d / ds.size();
        for (double d : ds) v += (d - m) * (d - m) / (ds.size() - 1);
        means.push_back(m);
        sds.push_back(std::sqrt(v / ds.size()));
    }
    for (std::size_t i = 1; i < means.size(); ++i) {
        EXPECT_GE(means[i], means[i - 1] - 3 * std::hypot(sds[i], sds[i - 1]));
    }
}

TEST(Hamming, examples) {
    EmpiricalDistribution zero(4);
    zero.add(0, 10);
    EXPECT_EQ(expected_hamming_distance(zero, zero), 0.0);

    const std::vector<double> p(8, 0.0), q(8, 0.1);
    EXPECT_NEAR(expected_hamming_distance(p, q), 0.8, 1e-15);

    EmpiricalDistribution point(8);
    point.add(0, 100000);
    const auto flipped = apply_readout_flips(point, 0.1, 4);
    const double sigma = std::sqrt(8 * 0.1 * 0.9 / 100000.0);
    EXPECT_NEAR(expected_hamming_distance(point, flipped), 0.8, 3 * sigma);

    EmpiricalDistribution uniform(4);
    for (std::uint64_t i = 0; i < 16; ++i) uniform.add(i);
    EXPECT_DOUBLE_EQ(expected_hamming_distance(uniform, uniform), 2.0);

    EXPECT_THROW((void)expected_hamming_distance(EmpiricalDistribution(3), uniform), std::invalid_argument);
}

TEST(Hamming, symmetric_nonnegative) {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
        const auto a = qlatent::testing::random_state(3, rng);
        const auto b = qlatent::testing::random_state(3, rng);
        const auto da = sample_ideal(a, 500, t), db = sample_ideal(b, 500, t + 100);
        const double ab = expected_hamming_distance(da, db);
        EXPECT_DOUBLE_EQ(ab, expected_hamming_distance(db, da));
        EXPECT_GE(ab, 0.0);
    }
}

TEST(Hamming, sampling_control_distance) {
    EXPECT_EQ(sampling_control_distance(StateVector::basis(3, 5), 100, {1, 2}), 0.0);
    Circuit c(2);
    c.add(GateOp::ry(0, std::numbers::pi / 2));
    c.add(GateOp::ry(1, std::numbers::pi / 2));
    EXPECT_NEAR(sampling_control_distance(qlatent::sim::run_circuit(c), 100000, {3, 4}), 1.0, 0.02);

    // Analytic self-distance of a state with marginals m is sum 2 m (1 - m).
    Circuit skew(2);
    skew.add(GateOp::ry(0, 1.0));
    skew.add(GateOp::ry(1, 2.0));
    const auto state = qlatent::sim::run_circuit(skew);
    double analytic = 0;
    for (double th : {1.0, 2.0}) {
        const double m = std::pow(std::sin(th / 2), 2);
        analytic += 2 * m * (1 - m);
    }
    double small_err = 0, large_err = 0;
    for (int s = 0; s < 10; ++s) {
        small_err += std::abs(sampling_control_distance(state, 100, {10 + s, 50 + s}) - analytic);
        large_err += std::abs(sampling_control_distance(state, 50000, {10 + s, 50 + s}) - analytic);
    }
    EXPECT_LT(large_err, small_err);
}

TEST(Mitigation, identity_confusion_is_noop) {
    EmpiricalDistribution d(3);
    d.add(1, 30);
    d.add(6, 70);
    const auto m = mitigate_confusion(d, ConfusionMatrix::uniform(3, 0.0));
    EXPECT_NEAR(m.at(1), 0.3, 1e-12);
    EXPECT_NEAR(m.at(6), 0.7, 1e-12);
}

TEST(Mitigation, restores_point_mass) {
    EmpiricalDistribution point(4);
    point.add(0, 100000);
    const auto noisy = apply_readout_flips(point, 0.1, 8);
    const auto m = mitigate_confusion(noisy, ConfusionMatrix::uniform(4, 0.1));
    EXPECT_GE(m.at(0), 0.99);
}

TEST(Mitigation, exact_inverse_of_corruption) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> a(0.01, 0.2);
    for (int t = 0; t < 10; ++t) {
        ConfusionMatrix cm;
        for (int q = 0; q < 3; ++q) {
            const double e0 = a(rng), e1 = a(rng);
            cm.per_qubit.push_back({{{1 - e0, e0}, {e1, 1 - e1}}});
        }
        const auto state = qlatent::testing::random_state(3, rng);
        ProbabilityMap p;
        const auto probs = state.probabilities();
        for (std::uint64_t i = 0; i < probs.size(); ++i) p[i] = probs[i];
        const auto back = invert_confusion(apply_confusion(p, cm), cm);
        for (auto [k, v] : p) EXPECT_NEAR(back.at(k), v, 1e-10);
    }
}

TEST(Mitigation, singular_matrix_rejected) {
    EmpiricalDistribution d(2);
    d.add(0, 1);
    EXPECT_THROW((void)mitigate_confusion(d, ConfusionMatrix::uniform(2, 0.5)), std::invalid_argument);
    ConfusionMatrix bad;
    bad.per_qubit.push_back({{{0.7, 0.7}, {0.0, 1.0}}});
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}
