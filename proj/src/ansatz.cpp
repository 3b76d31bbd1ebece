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

#include "qlatent/ansatz.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace qlatent::ansatz {

using sim::Circuit;
using sim::GateOp;

std::string to_string(AnsatzKind kind) {
    switch (kind) {
    case AnsatzKind::S2D: return "S2D";
    case AnsatzKind::BE: return "BE";
    case AnsatzKind::SE: return "SE";
    case AnsatzKind::ESE1: return "ESE1";
    case AnsatzKind::ESE2: return "ESE2";
    }
    return "?";
}

AnsatzKind parse_kind(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (auto kind : kAllKinds) {
        if (to_string(kind) == upper) return kind;
    }
    throw std::invalid_argument("unknown ansatz kind '" + std::string(name) + "'");
}

void validate(const AnsatzSpec &spec) {
    if (spec.n_qubits < 2 || spec.n_qubits > sim::kMaxQubits) {
        throw std::invalid_argument("ansatz needs between 2 and " + std::to_string(sim::kMaxQubits) +
                                    " qubits, got " + std::to_string(spec.n_qubits));
    }
    if (spec.n_layers < 1) {
        throw std::invalid_argument("ansatz needs at least one layer");
    }
}

int param_count(const AnsatzSpec &spec) {
    validate(spec);
    const int n = spec.n_qubits, L = spec.n_layers;
    switch (spec.kind) {
    case AnsatzKind::S2D: return n + 2 * L * (n - 1);
    case AnsatzKind::BE: return L * n;
    case AnsatzKind::SE:
    case AnsatzKind::ESE1:
    case AnsatzKind::ESE2: return 3 * L * n;
    }
    return 0;
}

int se_range(int layer, int n_qubits) { return layer % (n_qubits - 1) + 1; }

Circuit build_ansatz(const AnsatzSpec &spec, std::span<const double> params) {
    const int expected = param_count(spec);
    if (static_cast<int>(params.size()) != expected) {
        throw std::invalid_argument(to_string(spec.kind) + " expects " + std::to_string(expected) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    const int n = spec.n_qubits;
    Circuit c(n);
    std::size_t next = 0;
    auto take = [&] { return params[next++]; };

    switch (spec.kind) {
    case AnsatzKind::S2D: {
        for (int q = 0; q < n; ++q) c.add_trainable(GateOp::ry(q, take()));
        for (int l = 0; l < spec.n_layers; ++l) {
            for (int start : {0, 1}) {
                for (int q = start; q + 1 < n; q += 2) {
                    c.add(GateOp::cz(q, q + 1));
                    c.add_trainable(GateOp::ry(q, take()));
                    c.add_trainable(GateOp::ry(q + 1, take()));
                }
            }
        }
        break;
    }
    case AnsatzKind::BE: {
        for (int l = 0; l < spec.n_layers; ++l) {
            for (int q = 0; q < n; ++q) c.add_trainable(GateOp::ry(q, take()));
            for (int q = 0; q < n; ++q) c.add(GateOp::cnot(q, (q + 1) % n));
        }
        break;
    }
    case AnsatzKind::SE:
    case AnsatzKind::ESE1:
    case AnsatzKind::ESE2: {
        for (int l = 0; l < spec.n_layers; ++l) {
            for (int q = 0; q < n; ++q) {
                const double theta = take(), phi = take(), lambda = take();
                c.add_trainable(GateOp::u3(q, theta, phi, lambda));
            }
            const int range = spec.kind == AnsatzKind::ESE2 ? 1 : se_range(l, n);
            for (int q = 0; q < n; ++q) {
                const int target = q + range;
                if (target < n) {
                    c.add(GateOp::cnot(q, target));
                } else if (spec.kind == AnsatzKind::SE) {
                    c.add(GateOp::cnot(q, target % n));
                }
            }
        }
        break;
    }
    }
    return c;
}

Circuit build_angle_encoder(std::span<const double> features, int n_qubits) {
    if (static_cast<int>(features.size()) != n_qubits) {
        throw std::invalid_argument("angle encoder expects " + std::to_string(n_qubits) +
                                    " features, got " + std::to_string(features.size()));
    }
    Circuit c(n_qubits);
    for (int q = 0; q < n_qubits; ++q) {
        if (!std::isfinite(features[q])) {
            throw std::invalid_argument("angle encoder feature " + std::to_string(q) + " is not finite");
        }
        c.add_trainable(GateOp::ry(q, features[q]));
    }
    return c;
}

} // namespace qlatent::ansatz
