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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qlatent/statevector.hpp"

namespace qlatent::ansatz {

/// Entangling-layer templates. ESE1/ESE2 are the chain-friendly SE variants.
enum class AnsatzKind { S2D, BE, SE, ESE1, ESE2 };

inline constexpr AnsatzKind kAllKinds[] = {AnsatzKind::S2D, AnsatzKind::BE, AnsatzKind::SE,
                                           AnsatzKind::ESE1, AnsatzKind::ESE2};

[[nodiscard]] std::string to_string(AnsatzKind kind);
/// Case-insensitive; throws std::invalid_argument on unknown names.
[[nodiscard]] AnsatzKind parse_kind(std::string_view name);

struct AnsatzSpec {
    AnsatzKind kind = AnsatzKind::ESE2;
    int n_qubits = 4;
    int n_layers = 1;
};

void validate(const AnsatzSpec &spec);

/// Trainable angle count: S2D n + 2L(n-1), BE Ln, SE/ESE1/ESE2 3Ln.
[[nodiscard]] int param_count(const AnsatzSpec &spec);

/// Entangling range used by SE/ESE1 in layer `layer` (0-based): 1, 2, ..., n-1, 1, ...
[[nodiscard]] int se_range(int layer, int n_qubits);

/**
 * Builds the ansatz circuit. Parameters are consumed layer-major, then
 * qubit-major, then angle-major for U3 (theta, phi, lambda). For S2D the
 * initial RY layer comes first, then for each layer the even pairs followed
 * by the odd pairs, two angles per pair (lower qubit first).
 */
[[nodiscard]] sim::Circuit build_ansatz(const AnsatzSpec &spec, std::span<const double> params);

/// One RY(feature_q) per qubit.
[[nodiscard]] sim::Circuit build_angle_encoder(std::span<const double> features, int n_qubits);

} // namespace qlatent::ansatz
