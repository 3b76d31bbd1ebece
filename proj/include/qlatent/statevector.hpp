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
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

/**
 * @file statevector.hpp
 * Exact statevector simulation for the small gate set used by the ansatz
 * builders and the linear-chain router.
 *
 * Indexing convention: qubit 0 is the least-significant bit of the amplitude
 * index. Bitstrings rendered as text list qubit 0 first (leftmost).
 */
namespace qlatent::sim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 20;

enum class GateKind { RY, RZ, U3, CNOT, CZ, SWAP };

/// Number of qubits a gate of this kind acts on.
[[nodiscard]] int gate_arity(GateKind kind) noexcept;
/// Number of angles a gate of this kind carries.
[[nodiscard]] int gate_param_count(GateKind kind) noexcept;
[[nodiscard]] std::string gate_name(GateKind kind);

/**
 * One gate application. For two-qubit gates `qubits[0]` is the control
 * (CNOT) and `qubits[1]` the target; CZ and SWAP are symmetric.
 * U3 angles are ordered (theta, phi, lambda) and realize
 * RZ(phi) * RY(theta) * RZ(lambda).
 */
struct GateOp {
    GateKind kind = GateKind::RY;
    std::array<int, 2> qubits{0, 0};
    std::array<double, 3> params{0.0, 0.0, 0.0};

    [[nodiscard]] bool is_two_qubit() const noexcept { return gate_arity(kind) == 2; }

    static GateOp ry(int q, double theta) { return {GateKind::RY, {q, q}, {theta, 0, 0}}; }
    static GateOp rz(int q, double phi) { return {GateKind::RZ, {q, q}, {phi, 0, 0}}; }
    static GateOp u3(int q, double theta, double phi, double lambda) {
        return {GateKind::U3, {q, q}, {theta, phi, lambda}};
    }
    static GateOp cnot(int control, int target) { return {GateKind::CNOT, {control, target}, {}}; }
    static GateOp cz(int a, int b) { return {GateKind::CZ, {a, b}, {}}; }
    static GateOp swap(int a, int b) { return {GateKind::SWAP, {a, b}, {}}; }

    friend bool operator==(const GateOp &, const GateOp &) = default;
};

/// Throws std::invalid_argument if `op` is not applicable on `n_qubits`.
void validate_gate(const GateOp &op, int n_qubits);

/// Position of a trainable angle inside a circuit.
struct ParamSlot {
    std::size_t op = 0;
    int angle = 0;

    friend bool operator==(const ParamSlot &, const ParamSlot &) = default;
};

/**
 * Ordered gate list plus the mapping from trainable-parameter slots to angle
 * positions. Angles stored in the ops are used for non-trainable gates and
 * as defaults for trainable ones.
 */
class Circuit {
  public:
    explicit Circuit(int n_qubits);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] const std::vector<GateOp> &ops() const noexcept { return ops_; }
    [[nodiscard]] const std::vector<ParamSlot> &slots() const noexcept { return slots_; }
    [[nodiscard]] std::size_t n_trainable() const noexcept { return slots_.size(); }
    [[nodiscard]] std::size_t two_qubit_gate_count() const noexcept;
    [[nodiscard]] std::size_t one_qubit_gate_count() const noexcept;

    /// Appends a fixed gate.
    void add(const GateOp &op);
    /// Appends a gate whose angles all become trainable slots, in angle order.
    void add_trainable(const GateOp &op);
    /// Appends every op of `other` (same qubit count); its slots follow ours.
    void append(const Circuit &other);

    /// Ops with trainable angles replaced by `params`.
    [[nodiscard]] std::vector<GateOp> bind(std::span<const double> params) const;
    /// Current angles of the trainable slots.
    [[nodiscard]] std::vector<double> trainable_values() const;

    friend bool operator==(const Circuit &, const Circuit &) = default;

  private:
    friend Circuit make_circuit(int, std::vector<GateOp>, std::vector<ParamSlot>);

    int n_qubits_;
    std::vector<GateOp> ops_;
    std::vector<ParamSlot> slots_;
};

/// Builds a circuit from raw parts, validating every op and slot.
[[nodiscard]] Circuit make_circuit(int n_qubits, std::vector<GateOp> ops,
                                   std::vector<ParamSlot> slots);

class StateVector {
  public:
    /// |0...0> on `n_qubits` qubits.
    explicit StateVector(int n_qubits);
    /// Takes ownership of amplitudes; length must be a power of two and the
    /// vector normalized within 1e-10.
    static StateVector from_amplitudes(std::vector<Complex> amplitudes);
    /// Computational basis state |index>.
    static StateVector basis(int n_qubits, std::uint64_t index);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t size() const noexcept { return amps_.size(); }
    [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amps_; }
    [[nodiscard]] const Complex &operator[](std::size_t i) const { return amps_[i]; }
    [[nodiscard]] double norm_squared() const noexcept;
    [[nodiscard]] std::vector<double> probabilities() const;

    // In-place kernels. The free functions below are the pure interface.
    void apply(const GateOp &op);
    void apply_pauli(int qubit, char pauli);

  private:
    StateVector(int n_qubits, std::vector<Complex> amps);
    void apply_single(int q, const std::array<Complex, 4> &m);

    int n_qubits_;
    std::vector<Complex> amps_;
};

[[nodiscard]] StateVector init_zero_state(int n_qubits);
[[nodiscard]] StateVector apply_gate(StateVector state, const GateOp &op);

/// Applies the circuit to |0...0> with trainable slots bound to `params`.
[[nodiscard]] StateVector run_circuit(const Circuit &circuit, std::span<const double> params);
/// Applies the circuit with its stored angles.
[[nodiscard]] StateVector run_circuit(const Circuit &circuit);
/// Applies the bound circuit to an arbitrary initial state.
[[nodiscard]] StateVector run_circuit_on(StateVector state, const Circuit &circuit,
                                         std::span<const double> params);

/// <Z_q> for every qubit q.
[[nodiscard]] std::vector<double> pauli_z_expectations(const StateVector &state);

/// Basis-state indices drawn i.i.d. from |a_i|^2.
[[nodiscard]] std::vector<std::uint64_t> sample_indices(const StateVector &state,
                                                        std::size_t shots, std::uint64_t seed);
/// Same draws as sample_indices, rendered as bitstrings (qubit 0 first).
[[nodiscard]] std::vector<std::string> sample_bitstrings(const StateVector &state,
                                                         std::size_t shots, std::uint64_t seed);

[[nodiscard]] std::string index_to_bitstring(std::uint64_t index, int n_qubits);
[[nodiscard]] std::uint64_t bitstring_to_index(const std::string &bits);

/// Row-major dim x dim complex matrix, dim = 2^|keep|.
struct DensityMatrix {
    std::size_t dim = 0;
    std::vector<Complex> data;

    [[nodiscard]] Complex operator()(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
};

/**
 * Partial trace over the complement of `keep`. Bit k of the reduced index
 * corresponds to keep[k] after sorting ascending.
 */
[[nodiscard]] DensityMatrix reduced_density_matrix(const StateVector &state,
                                                   std::span<const int> keep);

} // namespace qlatent::sim
