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

#include <cstdint>
#include <span>
#include <vector>

#include "qlatent/ansatz.hpp"
#include "qlatent/statevector.hpp"

namespace qlatent::diag {

/// First floor(n/2) qubits; the default bipartition for entropy reports.
[[nodiscard]] std::vector<int> half_partition(int n_qubits);

/// Von Neumann entropy (nats) of the reduced state on `partition`.
[[nodiscard]] double entanglement_entropy(const sim::StateVector &state, std::span<const int> partition);

/// <Z_{cost_qubit}> of the circuit run at `params`.
[[nodiscard]] double z_cost(const sim::Circuit &circuit, std::span<const double> params, int cost_qubit);

/// [E(theta + pi/2 e_k) - E(theta - pi/2 e_k)] / 2 with E = <Z_{cost_qubit}>.
[[nodiscard]] double parameter_shift_gradient(const sim::Circuit &circuit,
                                              std::span<const double> params,
                                              std::size_t param_idx, int cost_qubit);

struct VarianceEstimate {
    double variance = 0.0;
    double stderr_ = 0.0;
    double mean = 0.0;
    std::size_t samples = 0;
};

inline constexpr std::size_t kMinVarianceSamples = 30;

/**
 * Sample variance of the parameter-shift gradient of `param_idx` over
 * parameter vectors drawn uniform on [0, 2pi). The circuit's stored angles
 * are ignored.
 */
[[nodiscard]] VarianceEstimate gradient_variance(const sim::Circuit &circuit, std::size_t samples,
                                                 std::uint64_t seed, std::size_t param_idx = 0,
                                                 int cost_qubit = 0);

/// Gradient variance of theta_{1,1} with cost <Z_0> for an ansatz.
[[nodiscard]] VarianceEstimate gradient_variance(const ansatz::AnsatzSpec &spec, std::size_t samples,
                                                 std::uint64_t seed);

/// Variance averaged over every trainable parameter instead of just the first.
[[nodiscard]] double gradient_variance_all_params(const ansatz::AnsatzSpec &spec,
                                                  std::size_t samples, std::uint64_t seed);

struct GradientVarianceSweep {
    ansatz::AnsatzKind kind = ansatz::AnsatzKind::ESE2;
    int n_layers = 1;
    std::vector<int> qubit_range;
    std::size_t samples_per_point = 200;
    std::vector<double> variances;
    std::vector<double> stderrs;
    double fitted_slope = 0.0;
};

/// Runs gradient_variance at every qubit count and fits the slope.
[[nodiscard]] GradientVarianceSweep run_gradient_variance_sweep(ansatz::AnsatzKind kind, int n_layers,
                                                                std::vector<int> qubit_range,
                                                                std::size_t samples_per_point,
                                                                std::uint64_t seed);

/// Least-squares slope of log10(variance) against qubit count.
[[nodiscard]] double fit_bp_slope(const GradientVarianceSweep &sweep);

} // namespace qlatent::diag
