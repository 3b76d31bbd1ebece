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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace qlatent::diag {

std::vector<int> half_partition(int n_qubits) {
    std::vector<int> part(static_cast<std::size_t>(std::max(1, n_qubits / 2)));
    for (std::size_t i = 0; i < part.size(); ++i) part[i] = static_cast<int>(i);
    return part;
}

double entanglement_entropy(const sim::StateVector &state, std::span<const int> partition) {
    const auto rho = sim::reduced_density_matrix(state, partition);
    const auto dim = static_cast<Eigen::Index>(rho.dim);
    Eigen::MatrixXcd m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = rho(r, c);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (double lambda : solver.eigenvalues()) {
        if (lambda > 1e-12) s -= lambda * std::log(lambda);
    }
    return std::max(s, 0.0);
}

double z_cost(const sim::Circuit &circuit, std::span<const double> params, int cost_qubit) {
    if (cost_qubit < 0 || cost_qubit >= circuit.n_qubits()) {
        throw std::invalid_argument("cost qubit out of range");
    }
    const auto state = sim::run_circuit(circuit, params);
    return sim::pauli_z_expectations(state)[cost_qubit];
}

double parameter_shift_gradient(const sim::Circuit &circuit, std::span<const double> params,
                                std::size_t param_idx, int cost_qubit) {
    if (param_idx >= circuit.n_trainable()) {
        throw std::invalid_argument("parameter index " + std::to_string(param_idx) +
                                    " out of range for " + std::to_string(circuit.n_trainable()) +
                                    " trainable slots");
    }
    if (params.size() != circuit.n_trainable()) {
        throw std::invalid_argument("parameter vector length does not match the circuit");
    }
    std::vector<double> shifted(params.begin(), params.end());
    shifted[param_idx] += std::numbers::pi / 2;
    const double plus = z_cost(circuit, shifted, cost_qubit);
    shifted[param_idx] -= std::numbers::pi;
    const double minus = z_cost(circuit, shifted, cost_qubit);
    return 0.5 * (plus - minus);
}

namespace {

VarianceEstimate summarize(const std::vector<double> &xs) {
    const auto n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    const double var = m2 / (n - 1.0);
    const double pop_var = m2 / n;
    const double fourth = m4 / n;
    // Large-sample standard error of the sample variance.
    const double se = std::sqrt(std::max(fourth - pop_var * pop_var, 0.0) / n);
    return {var, se, mean, xs.size()};
}

} // namespace

VarianceEstimate gradient_variance(const sim::Circuit &circuit, std::size_t samples,
                                   std::uint64_t seed, std::size_t param_idx, int cost_qubit) {
    if (samples < kMinVarianceSamples) {
        throw std::invalid_argument("gradient variance needs at least " +
                                    std::to_string(kMinVarianceSamples) + " samples");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<double> params(circuit.n_trainable());
    std::vector<double> grads;
    grads.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto &p : params) p = angle(rng);
        grads.push_back(parameter_shift_gradient(circuit, params, param_idx, cost_qubit));
    }
    return summarize(grads);
}

VarianceEstimate gradient_variance(const ansatz::AnsatzSpec &spec, std::size_t samples,
                                   std::uint64_t seed) {
    const std::vector<double> zeros(static_cast<std::size_t>(ansatz::param_count(spec)), 0.0);
    return gradient_variance(ansatz::build_ansatz(spec, zeros), samples, seed, 0, 0);
}

double gradient_variance_all_params(const ansatz::AnsatzSpec &spec, std::size_t samples,
                                    std::uint64_t seed) {
    const std::vector<double> zeros(static_cast<std::size_t>(ansatz::param_count(spec)), 0.0);
    const auto circuit = ansatz::build_ansatz(spec, zeros);
    double total = 0.0;
    for (std::size_t k = 0; k < circuit.n_trainable(); ++k) {
        total += gradient_variance(circuit, samples, seed, k, 0).variance;
    }
    return total / static_cast<double>(circuit.n_trainable());
}

GradientVarianceSweep run_gradient_variance_sweep(ansatz::AnsatzKind kind, int n_layers,
                                                  std::vector<int> qubit_range,
                                                  std::size_t samples_per_point, std::uint64_t seed) {
    GradientVarianceSweep sweep;
    sweep.kind = kind;
    sweep.n_layers = n_layers;
    sweep.qubit_range = std::move(qubit_range);
    sweep.samples_per_point = samples_per_point;
    for (std::size_t i = 0; i < sweep.qubit_range.size(); ++i) {
        const ansatz::AnsatzSpec spec{kind, sweep.qubit_range[i], n_layers};
        const auto est = gradient_variance(spec, samples_per_point, seed + 7919 * i);
        sweep.variances.push_back(est.variance);
        sweep.stderrs.push_back(est.stderr_);
    }
    sweep.fitted_slope = fit_bp_slope(sweep);
    return sweep;
}

double fit_bp_slope(const GradientVarianceSweep &sweep) {
    const auto &ns = sweep.qubit_range;
    if (ns.size() < 3) {
        throw std::invalid_argument("slope fit needs at least 3 qubit counts");
    }
    if (ns.size() != sweep.variances.size()) {
        throw std::invalid_argument("sweep has mismatched qubit and variance lists");
    }
    if (!std::is_sorted(ns.begin(), ns.end()) ||
        std::adjacent_find(ns.begin(), ns.end()) != ns.end()) {
        throw std::invalid_argument("qubit range must be strictly increasing");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(sweep.variances[i] > 0.0)) {
            throw std::invalid_argument("gradient variances must be positive to fit a log slope");
        }
        const double x = ns[i], y = std::log10(sweep.variances[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    return (m * sxy - sx * sy) / denom;
}

} // namespace qlatent::diag
