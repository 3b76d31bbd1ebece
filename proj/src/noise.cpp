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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qlatent::noise {

using sim::Circuit;
using sim::GateOp;
using sim::StateVector;

// ---------------------------------------------------------------------------
// Routing

RoutedCircuit route_to_linear_chain(const Circuit &circuit) {
    const int n = circuit.n_qubits();
    std::vector<int> layout(n), occupant(n);
    std::iota(layout.begin(), layout.end(), 0);
    std::iota(occupant.begin(), occupant.end(), 0);

    std::vector<GateOp> ops;
    std::vector<std::size_t> new_index(circuit.ops().size());
    std::size_t swaps = 0;

    for (std::size_t k = 0; k < circuit.ops().size(); ++k) {
        GateOp op = circuit.ops()[k];
        if (op.is_two_qubit()) {
            int pa = layout[op.qubits[0]];
            const int pb = layout[op.qubits[1]];
            while (std::abs(pa - pb) > 1) {
                const int next = pa < pb ? pa + 1 : pa - 1;
                ops.push_back(GateOp::swap(std::min(pa, next), std::max(pa, next)));
                ++swaps;
                const int moved = occupant[next];
                std::swap(occupant[pa], occupant[next]);
                layout[moved] = pa;
                layout[op.qubits[0]] = next;
                pa = next;
            }
            op.qubits = {pa, pb};
        } else {
            op.qubits = {layout[op.qubits[0]], layout[op.qubits[0]]};
        }
        new_index[k] = ops.size();
        ops.push_back(op);
    }

    std::vector<sim::ParamSlot> slots;
    slots.reserve(circuit.slots().size());
    for (const auto &slot : circuit.slots()) {
        slots.push_back({new_index[slot.op], slot.angle});
    }
    return {sim::make_circuit(n, std::move(ops), std::move(slots)), layout, swaps};
}

std::uint64_t physical_to_logical(std::uint64_t physical_index, std::span<const int> final_layout) {
    std::uint64_t logical = 0;
    for (std::size_t q = 0; q < final_layout.size(); ++q) {
        if ((physical_index >> final_layout[q]) & 1U) logical |= std::uint64_t{1} << q;
    }
    return logical;
}

// ---------------------------------------------------------------------------
// Distributions

void NoiseModel::validate() const {
    auto check = [](double p, const char *name) {
        if (!(p >= 0.0 && p < 0.5)) {
            throw std::invalid_argument(std::string(name) + " must lie in [0, 0.5), got " +
                                        std::to_string(p));
        }
    };
    check(readout_alpha, "readout_alpha");
    check(p1, "p1");
    check(p2, "p2");
    if (trajectories < 1) {
        throw std::invalid_argument("trajectories must be >= 1");
    }
}

EmpiricalDistribution::EmpiricalDistribution(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > sim::kMaxQubits) {
        throw std::invalid_argument("distribution qubit count out of range");
    }
}

EmpiricalDistribution EmpiricalDistribution::from_indices(int n_qubits,
                                                          std::span<const std::uint64_t> samples) {
    EmpiricalDistribution d(n_qubits);
    for (auto s : samples) d.add(s);
    return d;
}

void EmpiricalDistribution::add(std::uint64_t index, std::uint64_t count) {
    if (index >> n_qubits_) {
        throw std::invalid_argument("bitstring index exceeds the distribution width");
    }
    if (count == 0) return;
    counts_[index] += count;
    total_ += count;
}

void EmpiricalDistribution::merge(const EmpiricalDistribution &other) {
    if (other.n_qubits_ != n_qubits_) {
        throw std::invalid_argument("cannot merge distributions of different widths");
    }
    for (const auto &[k, v] : other.counts_) add(k, v);
}

std::uint64_t EmpiricalDistribution::count(std::uint64_t index) const {
    auto it = counts_.find(index);
    return it == counts_.end() ? 0 : it->second;
}

std::uint64_t EmpiricalDistribution::count(const std::string &bits) const {
    if (static_cast<int>(bits.size()) != n_qubits_) {
        throw std::invalid_argument("bitstring length does not match the distribution width");
    }
    return count(sim::bitstring_to_index(bits));
}

std::vector<double> EmpiricalDistribution::marginals() const {
    if (total_ == 0) {
        throw std::invalid_argument("empty distribution has no marginals");
    }
    std::vector<double> m(n_qubits_, 0.0);
    for (const auto &[k, v] : counts_) {
        for (int q = 0; q < n_qubits_; ++q) {
            if ((k >> q) & 1U) m[q] += static_cast<double>(v);
        }
    }
    for (auto &x : m) x /= static_cast<double>(total_);
    return m;
}

std::map<std::string, std::uint64_t> EmpiricalDistribution::as_bitstrings() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto &[k, v] : counts_) out[sim::index_to_bitstring(k, n_qubits_)] = v;
    return out;
}

ProbabilityMap to_probabilities(const EmpiricalDistribution &dist) {
    if (dist.total() == 0) {
        throw std::invalid_argument("empty distribution");
    }
    ProbabilityMap p;
    for (const auto &[k, v] : dist.counts()) {
        p[k] = static_cast<double>(v) / static_cast<double>(dist.total());
    }
    return p;
}

std::vector<double> marginals(const ProbabilityMap &probs, int n_qubits) {
    std::vector<double> m(n_qubits, 0.0);
    for (const auto &[k, v] : probs) {
        for (int q = 0; q < n_qubits; ++q) {
            if ((k >> q) & 1U) m[q] += v;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

std::uint64_t draw_index(const std::vector<double> &cdf, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> uni(0.0, cdf.back());
    const double u = uni(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<std::uint64_t>(it - cdf.begin());
}

std::uint64_t flip_bits(std::uint64_t index, int n_qubits, double alpha, std::mt19937_64 &rng) {
    if (alpha <= 0.0) return index;
    std::bernoulli_distribution flip(alpha);
    for (int q = 0; q < n_qubits; ++q) {
        if (flip(rng)) index ^= std::uint64_t{1} << q;
    }
    return index;
}

constexpr char kPaulis[] = {'I', 'X', 'Y', 'Z'};

} // namespace

EmpiricalDistribution sample_noisy(const Circuit &circuit, std::span<const double> params,
                                   const NoiseModel &noise, std::size_t shots, std::uint64_t seed) {
    noise.validate();
    if (shots < 1) {
        throw std::invalid_argument("shots must be >= 1");
    }
    if (shots < noise.trajectories) {
        throw std::invalid_argument("shots (" + std::to_string(shots) + ") fewer than trajectories (" +
                                    std::to_string(noise.trajectories) + ")");
    }
    const auto bound = circuit.bind(params);
    const int n = circuit.n_qubits();
    const bool gate_noise = noise.p1 > 0.0 || noise.p2 > 0.0;
    const std::size_t n_traj = gate_noise ? noise.trajectories : 1;
    EmpiricalDistribution out(n);

    // Without gate noise every trajectory is the same pure state.
    std::vector<double> shared_cdf;
    if (!gate_noise) {
        StateVector state(n);
        for (const auto &op : bound) state.apply(op);
        shared_cdf = state.probabilities();
        std::partial_sum(shared_cdf.begin(), shared_cdf.end(), shared_cdf.begin());
    }

    for (std::size_t t = 0; t < n_traj; ++t) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(t), std::uint64_t{0x51a7e}};
        std::mt19937_64 rng(seq);
        std::vector<double> cdf;
        if (gate_noise) {
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::uniform_int_distribution<int> pick1(1, 3), pick2(1, 15);
            StateVector state(n);
            for (const auto &op : bound) {
                state.apply(op);
                if (op.is_two_qubit()) {
                    if (uni(rng) < noise.p2) {
                        const int code = pick2(rng);
                        state.apply_pauli(op.qubits[0], kPaulis[code / 4]);
                        state.apply_pauli(op.qubits[1], kPaulis[code % 4]);
                    }
                } else if (uni(rng) < noise.p1) {
                    state.apply_pauli(op.qubits[0], kPaulis[pick1(rng)]);
                }
            }
            cdf = state.probabilities();
            std::partial_sum(cdf.begin(), cdf.end(), cdf.begin());
        }
        const std::size_t share = shots / n_traj + (t < shots % n_traj ? 1 : 0);
        const auto &use = gate_noise ? cdf : shared_cdf;
        for (std::size_t s = 0; s < share; ++s) {
            out.add(flip_bits(draw_index(use, rng), n, noise.readout_alpha, rng));
        }
    }
    return out;
}

EmpiricalDistribution sample_ideal(const StateVector &state, std::size_t shots, std::uint64_t seed) {
    const auto idx = sim::sample_indices(state, shots, seed);
    return EmpiricalDistribution::from_indices(state.n_qubits(), idx);
}

EmpiricalDistribution apply_readout_flips(const EmpiricalDistribution &dist, double alpha,
                                          std::uint64_t seed) {
    if (!(alpha >= 0.0 && alpha < 0.5)) {
        throw std::invalid_argument("readout alpha must lie in [0, 0.5)");
    }
    std::mt19937_64 rng(seed);
    EmpiricalDistribution out(dist.n_qubits());
    for (const auto &[k, v] : dist.counts()) {
        for (std::uint64_t c = 0; c < v; ++c) {
            out.add(flip_bits(k, dist.n_qubits(), alpha, rng));
        }
    }
    return out;
}

double expected_hamming_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("marginal vectors have different qubit counts");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        d += p[i] * (1.0 - q[i]) + q[i] * (1.0 - p[i]);
    }
    return d;
}

double expected_hamming_distance(const EmpiricalDistribution &p, const EmpiricalDistribution &q) {
    if (p.n_qubits() != q.n_qubits()) {
        throw std::invalid_argument("distributions have different qubit counts");
    }
    const auto pm = p.marginals();
    const auto qm = q.marginals();
    return expected_hamming_distance(pm, qm);
}

double sampling_control_distance(const StateVector &state, std::size_t shots,
                                 std::pair<std::uint64_t, std::uint64_t> seeds) {
    const auto a = sample_ideal(state, shots, seeds.first);
    const auto b = sample_ideal(state, shots, seeds.second);
    return expected_hamming_distance(a, b);
}

// ---------------------------------------------------------------------------
// Mitigation

void ConfusionMatrix::validate() const {
    if (per_qubit.empty()) {
        throw std::invalid_argument("confusion matrix has no qubits");
    }
    for (const auto &m : per_qubit) {
        for (const auto &row : m) {
            if (row[0] < 0.0 || row[0] > 1.0 || row[1] < 0.0 || row[1] > 1.0 ||
                std::abs(row[0] + row[1] - 1.0) > 1e-12) {
                throw std::invalid_argument("confusion matrix rows must be stochastic");
            }
        }
    }
}

ConfusionMatrix ConfusionMatrix::uniform(int n_qubits, double alpha) {
    ConfusionMatrix cm;
    cm.per_qubit.assign(static_cast<std::size_t>(n_qubits),
                        {{{1.0 - alpha, alpha}, {alpha, 1.0 - alpha}}});
    return cm;
}

namespace {

using Mat2 = std::array<std::array<double, 2>, 2>;

std::vector<Mat2> inverses(const ConfusionMatrix &cm) {
    cm.validate();
    std::vector<Mat2> inv;
    for (std::size_t q = 0; q < cm.per_qubit.size(); ++q) {
        const auto &m = cm.per_qubit[q];
        const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if (std::abs(det) < 1e-12) {
            throw std::invalid_argument("confusion matrix for qubit " + std::to_string(q) +
                                        " is singular");
        }
        inv.push_back({{{m[1][1] / det, -m[0][1] / det}, {-m[1][0] / det, m[0][0] / det}}});
    }
    return inv;
}

} // namespace

ProbabilityMap apply_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm) {
    cm.validate();
    const int n = cm.n_qubits();
    const std::uint64_t dim = std::uint64_t{1} << n;
    ProbabilityMap out;
    for (std::uint64_t j = 0; j < dim; ++j) {
        double acc = 0.0;
        for (const auto &[i, p] : probs) {
            double w = p;
            for (int q = 0; q < n; ++q) w *= cm.per_qubit[q][(i >> q) & 1U][(j >> q) & 1U];
            acc += w;
        }
        if (acc != 0.0) out[j] = acc;
    }
    return out;
}

ProbabilityMap invert_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm) {
    const auto inv = inverses(cm);
    const int n = cm.n_qubits();
    ProbabilityMap out;
    // p_true(i) = sum_j (A^-1)(j, i) p_meas(j), A = kron of per-qubit matrices.
    for (const auto &[i, unused] : probs) {
        double acc = 0.0;
        for (const auto &[j, p] : probs) {
            double w = p;
            for (int q = 0; q < n; ++q) w *= inv[q][(j >> q) & 1U][(i >> q) & 1U];
            acc += w;
        }
        out[i] = acc;
    }
    return out;
}

ProbabilityMap mitigate_confusion(const ProbabilityMap &probs, const ConfusionMatrix &cm) {
    auto out = invert_confusion(probs, cm);
    double total = 0.0;
    for (auto &[k, v] : out) {
        v = std::max(v, 0.0);
        total += v;
    }
    if (total <= 0.0) {
        throw std::runtime_error("mitigation removed all probability mass");
    }
    for (auto &[k, v] : out) v /= total;
    return out;
}

ProbabilityMap mitigate_confusion(const EmpiricalDistribution &dist, const ConfusionMatrix &cm) {
    if (dist.n_qubits() != cm.n_qubits()) {
        throw std::invalid_argument("confusion matrix width does not match the distribution");
    }
    return mitigate_confusion(to_probabilities(dist), cm);
}

} // namespace qlatent::noise
