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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qlatent/statevector.hpp"

namespace qlatent::noise {

// ---------------------------------------------------------------------------
// Linear-chain routing

struct RoutedCircuit {
    sim::Circuit circuit;
    /// final_layout[logical] = physical chain position after the last gate.
    std::vector<int> final_layout;
    std::size_t swaps_added = 0;
};

/**
 * Greedy SWAP insertion for a linear coupling chain 0-1-...-(n-1). The first
 * qubit of each non-adjacent two-qubit gate is walked toward the second one
 * position at a time. The final permutation is recorded, not undone.
 * Trainable slots follow their gates into the routed circuit.
 */
[[nodiscard]] RoutedCircuit route_to_linear_chain(const sim::Circuit &circuit);

/// Reorders a physical-index amplitude/bit pattern back to logical order.
[[nodiscard]] std::uint64_t physical_to_logical(std::uint64_t physical_index,
                                                std::span<const int> final_layout);

// ---------------------------------------------------------------------------
// Noise model and sampling

struct NoiseModel {
    double readout_alpha = 0.0;
    double p1 = 5e-4;
    double p2 = 1e-2;
    std::size_t trajectories = 100;

    void validate() const;
    /// Noise-free model (single trajectory).
    static NoiseModel ideal() { return {0.0, 0.0, 0.0, 1}; }
};

/// Bitstring counts keyed by basis index (qubit 0 = least-significant bit).
class EmpiricalDistribution {
  public:
    explicit EmpiricalDistribution(int n_qubits);
    static EmpiricalDistribution from_indices(int n_qubits, std::span<const std::uint64_t> samples);

    void add(std::uint64_t index, std::uint64_t count = 1);
    void merge(const EmpiricalDistribution &other);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::uint64_t total() const noexcept { return total_; }
    [[nodiscard]] const std::map<std::uint64_t, std::uint64_t> &counts() const noexcept { return counts_; }
    [[nodiscard]] std::uint64_t count(std::uint64_t index) const;
    [[nodiscard]] std::uint64_t count(const std::string &bits) const;
    /// Fraction of samples with bit q set, for every q.
    [[nodiscard]] std::vector<double> marginals() const;
    /// Counts as bitstring -> count (qubit 0 leftmost).
    [[nodiscard]] std::map<std::string, std::uint64_t> as_bitstrings() const;

  private:
    int n_qubits_;
    std::uint64_t total_ = 0;
    std::map<std::uint64_t, std::uint64_t> counts_;
};

/// Normalized probabilities keyed by basis index.
using ProbabilityMap = std::map<std::uint64_t, double>;

[[nodiscard]] ProbabilityMap to_probabilities(const EmpiricalDistribution &dist);

/**
 * Simulates `shots` noisy executions. Shots are split evenly over
 * `noise.trajectories` Pauli trajectories (remainder to the first ones).
 * After every gate a uniformly random non-identity Pauli is inserted on the
 * gate's qubits with probability p1 (one-qubit gates) or p2 (two-qubit gates);
 * readout flips each measured bit independently with probability alpha.
 */
[[nodiscard]] EmpiricalDistribution sample_noisy(const sim::Circuit &circuit,
                                                 std::span<const double> params,
                                                 const NoiseModel &noise, std::size_t shots,
                                                 std::uint64_t seed);

/// Noiseless shot sampling of a state into a distribution.
[[nodiscard]] EmpiricalDistribution sample_ideal(const sim::StateVector &state, std::size_t shots,
                                                 std::uint64_t seed);

/// Applies independent readout flips with probability alpha to every sample.
[[nodiscard]] EmpiricalDistribution apply_readout_flips(const EmpiricalDistribution &dist,
                                                        double alpha, std::uint64_t seed);

/// Per-bit marginals (probability of 1) of an exact or empirical distribution.
[[nodiscard]] std::vector<double> marginals(const ProbabilityMap &probs, int n_qubits);

/**
 * Expected Hamming distance between independent draws from p and q, computed
 * from per-bit marginals: sum_q p_q (1 - q_q) + q_q (1 - p_q).
 */
[[nodiscard]] double expected_hamming_distance(const EmpiricalDistribution &p,
                                               const EmpiricalDistribution &q);
[[nodiscard]] double expected_hamming_distance(std::span<const double> p_marginals,
                                               std::span<const double> q_marginals);

/// Hamming distance between two independent noiseless shot sets of `state`.
[[nodiscard]] double sampling_control_distance(const sim::StateVector &state, std::size_t shots,
                                               std::pair<std::uint64_t, std::uint64_t> seeds);

// ---------------------------------------------------------------------------
// Readout mitigation

/// per_qubit[q][i][j] = Pr(measure j | true i).
struct ConfusionMatrix {
    std::vector<std::array<std::array<double, 2>, 2>> per_qubit;

    void validate() const;
    [[nodiscard]] int n_qubits() const noexcept { return static_cast<int>(per_qubit.size()); }
    /// Symmetric flip probability alpha on every qubit.
    static ConfusionMatrix uniform(int n_qubits, double alpha);
};

/// Exact readout corruption of a probability map (full output support).
[[nodiscard]] ProbabilityMap apply_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm);

/**
 * Tensor-product inversion of the per-qubit confusion matrices restricted to
 * the observed bitstrings. Negative quasi-probabilities are clipped to 0 and
 * the result renormalized. Throws if any M_q is singular.
 */
[[nodiscard]] ProbabilityMap mitigate_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm);
[[nodiscard]] ProbabilityMap mitigate_confusion(const EmpiricalDistribution &dist,
                                                const ConfusionMatrix &cm);

/// Mitigation without clipping or renormalization; used for exactness checks.
[[nodiscard]] ProbabilityMap invert_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm);

} // namespace qlatent::noise
