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

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qlatent::sim {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_qubit_count(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw std::invalid_argument("qubit count " + std::to_string(n_qubits) +
                                    " outside [1, " + std::to_string(kMaxQubits) + "]");
    }
}

// 2x2 matrices in row-major order {m00, m01, m10, m11}.
std::array<Complex, 4> ry_matrix(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {Complex{c}, Complex{-s}, Complex{s}, Complex{c}};
}

std::array<Complex, 4> rz_matrix(double phi) {
    return {std::exp(-kI * (phi / 2)), Complex{}, Complex{}, std::exp(kI * (phi / 2))};
}

std::array<Complex, 4> matmul2(const std::array<Complex, 4> &a, const std::array<Complex, 4> &b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

std::array<Complex, 4> u3_matrix(double theta, double phi, double lambda) {
    return matmul2(rz_matrix(phi), matmul2(ry_matrix(theta), rz_matrix(lambda)));
}

} // namespace

int gate_arity(GateKind kind) noexcept {
    switch (kind) {
    case GateKind::CNOT:
    case GateKind::CZ:
    case GateKind::SWAP:
        return 2;
    default:
        return 1;
    }
}

int gate_param_count(GateKind kind) noexcept {
    switch (kind) {
    case GateKind::RY:
    case GateKind::RZ:
        return 1;
    case GateKind::U3:
        return 3;
    default:
        return 0;
    }
}

std::string gate_name(GateKind kind) {
    switch (kind) {
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::U3: return "U3";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
    case GateKind::SWAP: return "SWAP";
    }
    return "?";
}

void validate_gate(const GateOp &op, int n_qubits) {
    const int arity = gate_arity(op.kind);
    for (int k = 0; k < arity; ++k) {
        if (op.qubits[k] < 0 || op.qubits[k] >= n_qubits) {
            throw std::invalid_argument(gate_name(op.kind) + ": qubit index " +
                                        std::to_string(op.qubits[k]) + " out of range for " +
                                        std::to_string(n_qubits) + " qubits");
        }
    }
    if (arity == 2 && op.qubits[0] == op.qubits[1]) {
        throw std::invalid_argument(gate_name(op.kind) + ": targets must be distinct");
    }
    for (int k = 0; k < gate_param_count(op.kind); ++k) {
        if (!std::isfinite(op.params[k])) {
            throw std::invalid_argument(gate_name(op.kind) + ": non-finite angle");
        }
    }
}

// ---------------------------------------------------------------------------
// Circuit

Circuit::Circuit(int n_qubits) : n_qubits_(n_qubits) { check_qubit_count(n_qubits); }

std::size_t Circuit::two_qubit_gate_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(ops_.begin(), ops_.end(), [](const GateOp &op) { return op.is_two_qubit(); }));
}

std::size_t Circuit::one_qubit_gate_count() const noexcept {
    return ops_.size() - two_qubit_gate_count();
}

void Circuit::add(const GateOp &op) {
    validate_gate(op, n_qubits_);
    ops_.push_back(op);
}

void Circuit::add_trainable(const GateOp &op) {
    add(op);
    for (int k = 0; k < gate_param_count(op.kind); ++k) {
        slots_.push_back({ops_.size() - 1, k});
    }
}

void Circuit::append(const Circuit &other) {
    if (other.n_qubits_ != n_qubits_) {
        throw std::invalid_argument("cannot append circuits with different qubit counts");
    }
    const std::size_t offset = ops_.size();
    ops_.insert(ops_.end(), other.ops_.begin(), other.ops_.end());
    for (const auto &slot : other.slots_) {
        slots_.push_back({slot.op + offset, slot.angle});
    }
}

std::vector<GateOp> Circuit::bind(std::span<const double> params) const {
    if (params.size() != slots_.size()) {
        throw std::invalid_argument("parameter count " + std::to_string(params.size()) +
                                    " does not match " + std::to_string(slots_.size()) +
                                    " trainable slots");
    }
    std::vector<GateOp> bound = ops_;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (!std::isfinite(params[i])) {
            throw std::invalid_argument("non-finite circuit parameter");
        }
        bound[slots_[i].op].params[slots_[i].angle] = params[i];
    }
    return bound;
}

std::vector<double> Circuit::trainable_values() const {
    std::vector<double> out;
    out.reserve(slots_.size());
    for (const auto &slot : slots_) {
        out.push_back(ops_[slot.op].params[slot.angle]);
    }
    return out;
}

Circuit make_circuit(int n_qubits, std::vector<GateOp> ops, std::vector<ParamSlot> slots) {
    Circuit c(n_qubits);
    for (const auto &op : ops) {
        validate_gate(op, n_qubits);
    }
    for (const auto &slot : slots) {
        if (slot.op >= ops.size() || slot.angle < 0 ||
            slot.angle >= gate_param_count(ops[slot.op].kind)) {
            throw std::invalid_argument("parameter slot does not reference a gate angle");
        }
    }
    c.ops_ = std::move(ops);
    c.slots_ = std::move(slots);
    return c;
}

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
    check_qubit_count(n_qubits);
    amps_.assign(std::size_t{1} << n_qubits, Complex{});
    amps_[0] = 1.0;
}

StateVector::StateVector(int n_qubits, std::vector<Complex> amps)
    : n_qubits_(n_qubits), amps_(std::move(amps)) {}

StateVector StateVector::from_amplitudes(std::vector<Complex> amplitudes) {
    const std::size_t len = amplitudes.size();
    if (len < 2 || (len & (len - 1)) != 0) {
        throw std::invalid_argument("amplitude count must be a power of two >= 2");
    }
    const int n = std::countr_zero(len);
    check_qubit_count(n);
    double norm = 0.0;
    for (const auto &a : amplitudes) {
        norm += std::norm(a);
    }
    if (std::abs(norm - 1.0) > 1e-10) {
        throw std::invalid_argument("amplitudes are not normalized");
    }
    return StateVector(n, std::move(amplitudes));
}

StateVector StateVector::basis(int n_qubits, std::uint64_t index) {
    StateVector s(n_qubits);
    if (index >= s.size()) {
        throw std::invalid_argument("basis index out of range");
    }
    s.amps_[0] = 0.0;
    s.amps_[index] = 1.0;
    return s;
}

double StateVector::norm_squared() const noexcept {
    double total = 0.0;
    for (const auto &a : amps_) {
        total += std::norm(a);
    }
    return total;
}

std::vector<double> StateVector::probabilities() const {
    std::vector<double> p(amps_.size());
    std::transform(amps_.begin(), amps_.end(), p.begin(), [](const Complex &a) { return std::norm(a); });
    return p;
}

void StateVector::apply_single(int q, const std::array<Complex, 4> &m) {
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t n = amps_.size();
    for (std::size_t base = 0; base < n; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const Complex a0 = amps_[i];
            const Complex a1 = amps_[i + stride];
            amps_[i] = m[0] * a0 + m[1] * a1;
            amps_[i + stride] = m[2] * a0 + m[3] * a1;
        }
    }
}

void StateVector::apply(const GateOp &op) {
    validate_gate(op, n_qubits_);
    const std::size_t n = amps_.size();
    switch (op.kind) {
    case GateKind::RY:
        apply_single(op.qubits[0], ry_matrix(op.params[0]));
        break;
    case GateKind::RZ:
        apply_single(op.qubits[0], rz_matrix(op.params[0]));
        break;
    case GateKind::U3:
        apply_single(op.qubits[0], u3_matrix(op.params[0], op.params[1], op.params[2]));
        break;
    case GateKind::CNOT: {
        const std::size_t cmask = std::size_t{1} << op.qubits[0];
        const std::size_t tmask = std::size_t{1} << op.qubits[1];
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & cmask) && !(i & tmask)) {
                std::swap(amps_[i], amps_[i | tmask]);
            }
        }
        break;
    }
    case GateKind::CZ: {
        const std::size_t mask = (std::size_t{1} << op.qubits[0]) | (std::size_t{1} << op.qubits[1]);
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & mask) == mask) {
                amps_[i] = -amps_[i];
            }
        }
        break;
    }
    case GateKind::SWAP: {
        const std::size_t amask = std::size_t{1} << op.qubits[0];
        const std::size_t bmask = std::size_t{1} << op.qubits[1];
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & amask) && !(i & bmask)) {
                std::swap(amps_[i], amps_[(i & ~amask) | bmask]);
            }
        }
        break;
    }
    }
}

void StateVector::apply_pauli(int qubit, char pauli) {
    if (qubit < 0 || qubit >= n_qubits_) {
        throw std::invalid_argument("pauli target out of range");
    }
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t n = amps_.size();
    switch (pauli) {
    case 'I':
        return;
    case 'X':
        for (std::size_t i = 0; i < n; ++i) {
            if (!(i & mask)) std::swap(amps_[i], amps_[i | mask]);
        }
        return;
    case 'Y':
        // Y = [[0, -i], [i, 0]]
        for (std::size_t i = 0; i < n; ++i) {
            if (!(i & mask)) {
                const Complex a0 = amps_[i];
                amps_[i] = -kI * amps_[i | mask];
                amps_[i | mask] = kI * a0;
            }
        }
        return;
    case 'Z':
        for (std::size_t i = 0; i < n; ++i) {
            if (i & mask) amps_[i] = -amps_[i];
        }
        return;
    default:
        throw std::invalid_argument(std::string("unknown pauli '") + pauli + "'");
    }
}

StateVector init_zero_state(int n_qubits) { return StateVector(n_qubits); }

StateVector apply_gate(StateVector state, const GateOp &op) {
    state.apply(op);
    return state;
}

StateVector run_circuit_on(StateVector state, const Circuit &circuit, std::span<const double> params) {
    if (state.n_qubits() != circuit.n_qubits()) {
        throw std::invalid_argument("state and circuit qubit counts differ");
    }
    for (const auto &op : circuit.bind(params)) {
        state.apply(op);
    }
    return state;
}

StateVector run_circuit(const Circuit &circuit, std::span<const double> params) {
    return run_circuit_on(StateVector(circuit.n_qubits()), circuit, params);
}

StateVector run_circuit(const Circuit &circuit) {
    const auto values = circuit.trainable_values();
    return run_circuit(circuit, values);
}

std::vector<double> pauli_z_expectations(const StateVector &state) {
    const int nq = state.n_qubits();
    std::vector<double> z(nq, 0.0);
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const double p = std::norm(amps[i]);
        if (p == 0.0) continue;
        for (int q = 0; q < nq; ++q) {
            z[q] += ((i >> q) & 1U) ? -p : p;
        }
    }
    return z;
}

std::vector<std::uint64_t> sample_indices(const StateVector &state, std::size_t shots,
                                          std::uint64_t seed) {
    if (shots == 0) {
        throw std::invalid_argument("shots must be >= 1");
    }
    const auto probs = state.probabilities();
    std::vector<double> cdf(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cdf.begin());
    const double total = cdf.back();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, total);
    std::vector<std::uint64_t> out(shots);
    for (auto &o : out) {
        const double u = uni(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        // Skip zero-probability entries that share a cdf value with the draw.
        while (probs[static_cast<std::size_t>(it - cdf.begin())] == 0.0 && it != cdf.begin()) --it;
        o = static_cast<std::uint64_t>(it - cdf.begin());
    }
    return out;
}

std::vector<std::string> sample_bitstrings(const StateVector &state, std::size_t shots,
                                           std::uint64_t seed) {
    const auto idx = sample_indices(state, shots, seed);
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(index_to_bitstring(i, state.n_qubits()));
    }
    return out;
}

std::string index_to_bitstring(std::uint64_t index, int n_qubits) {
    std::string s(static_cast<std::size_t>(n_qubits), '0');
    for (int q = 0; q < n_qubits; ++q) {
        if ((index >> q) & 1U) s[q] = '1';
    }
    return s;
}

std::uint64_t bitstring_to_index(const std::string &bits) {
    std::uint64_t index = 0;
    for (std::size_t q = 0; q < bits.size(); ++q) {
        if (bits[q] == '1') {
            index |= std::uint64_t{1} << q;
        } else if (bits[q] != '0') {
            throw std::invalid_argument("bitstring contains a character other than 0/1");
        }
    }
    return index;
}

DensityMatrix reduced_density_matrix(const StateVector &state, std::span<const int> keep) {
    const int nq = state.n_qubits();
    std::vector<int> kept(keep.begin(), keep.end());
    std::sort(kept.begin(), kept.end());
    if (kept.empty() || static_cast<int>(kept.size()) >= nq) {
        throw std::invalid_argument("kept qubit set must be a nonempty proper subset");
    }
    if (std::adjacent_find(kept.begin(), kept.end()) != kept.end()) {
        throw std::invalid_argument("kept qubit set contains duplicates");
    }
    for (int q : kept) {
        if (q < 0 || q >= nq) throw std::invalid_argument("kept qubit out of range");
    }
    std::vector<int> traced;
    for (int q = 0; q < nq; ++q) {
        if (!std::binary_search(kept.begin(), kept.end(), q)) traced.push_back(q);
    }

    auto scatter = [](std::size_t compact, const std::vector<int> &positions) {
        std::size_t full = 0;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            if ((compact >> k) & 1U) full |= std::size_t{1} << positions[k];
        }
        return full;
    };

    const std::size_t dk = std::size_t{1} << kept.size();
    const std::size_t dt = std::size_t{1} << traced.size();
    std::vector<std::size_t> kept_offsets(dk), traced_offsets(dt);
    for (std::size_t i = 0; i < dk; ++i) kept_offsets[i] = scatter(i, kept);
    for (std::size_t j = 0; j < dt; ++j) traced_offsets[j] = scatter(j, traced);

    const auto amps = state.amplitudes();
    DensityMatrix rho{dk, std::vector<Complex>(dk * dk)};
    for (std::size_t j = 0; j < dt; ++j) {
        const std::size_t tj = traced_offsets[j];
        for (std::size_t r = 0; r < dk; ++r) {
            const Complex ar = amps[kept_offsets[r] | tj];
            if (ar == Complex{}) continue;
            for (std::size_t c = 0; c < dk; ++c) {
                rho.data[r * dk + c] += ar * std::conj(amps[kept_offsets[c] | tj]);
            }
        }
    }
    return rho;
}

} // namespace qlatent::sim
