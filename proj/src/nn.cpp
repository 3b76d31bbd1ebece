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

#include "qlatent/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qlatent/noise.hpp"
#include "qlatent/statevector.hpp"

namespace qlatent::nn {

Tensor init_truncated_normal(ad::Shape shape, double sigma, std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> d(ad::shape_numel(shape));
    for (auto &x : d) {
        do {
            x = g(rng);
        } while (std::abs(x) > 2 * sigma);
    }
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

Tensor init_uniform(ad::Shape shape, double lo, double hi, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> d(ad::shape_numel(shape));
    for (auto &x : d) x = u(rng);
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

Tensor init_constant(ad::Shape shape, double value) { return Tensor::full(std::move(shape), value, true); }

std::size_t count_parameters(const NamedParams &params) {
    std::size_t n = 0;
    for (const auto &[name, t] : params) n += t.numel();
    return n;
}

int default_groups(int channels) {
    for (int g = std::min(4, channels); g > 1; --g) {
        if (channels % g == 0) return g;
    }
    return 1;
}

// ---------------------------------------------------------------------------

Linear::Linear(int in, int out, std::mt19937_64 &rng, bool with_bias) {
    if (in < 1 || out < 1) throw std::invalid_argument("Linear: features must be >= 1");
    weight = init_truncated_normal({static_cast<std::size_t>(in), static_cast<std::size_t>(out)}, kInitSigma, rng);
    if (with_bias) bias = init_constant({static_cast<std::size_t>(out)}, 0.0);
}

Tensor Linear::forward(const Tensor &x) const {
    auto y = ad::matmul(x, weight);
    return bias.defined() ? ad::add_row_bias(y, bias) : y;
}

void Linear::collect(const std::string &prefix, NamedParams &out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

Conv2d::Conv2d(int in, int out, int kernel, int stride_, std::mt19937_64 &rng)
    : stride(stride_), padding(kernel / 2) {
    if (in < 1 || out < 1) throw std::invalid_argument("Conv2d: channels must be >= 1");
    if (kernel != 1 && kernel != 3) throw std::invalid_argument("Conv2d: kernel must be 1 or 3");
    if (stride_ != 1 && stride_ != 2) throw std::invalid_argument("Conv2d: stride must be 1 or 2");
    const auto k = static_cast<std::size_t>(kernel);
    weight = init_truncated_normal({static_cast<std::size_t>(out), static_cast<std::size_t>(in), k, k}, kInitSigma, rng);
    bias = init_constant({static_cast<std::size_t>(out)}, 0.0);
}

Tensor Conv2d::forward(const Tensor &x) const { return ad::conv2d(x, weight, bias, stride, padding); }

void Conv2d::collect(const std::string &prefix, NamedParams &out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

GroupNorm::GroupNorm(int channels) : groups(default_groups(channels)) {
    gamma = init_constant({static_cast<std::size_t>(channels)}, 1.0);
    beta = init_constant({static_cast<std::size_t>(channels)}, 0.0);
}

Tensor GroupNorm::forward(const Tensor &x) const { return ad::group_norm(x, gamma, beta, groups); }

void GroupNorm::collect(const std::string &prefix, NamedParams &out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

// ---------------------------------------------------------------------------
// Quantum layer

void QuantumLayerConfig::validate() const {
    if (n_qubits < 2 || n_qubits > 14) {
        throw std::invalid_argument("quantum layer n_qubits must be in [2, 14], got " + std::to_string(n_qubits));
    }
    if (in_features < 1 || out_features < 1) {
        throw std::invalid_argument("quantum layer features must be >= 1");
    }
    ansatz::validate(ansatz_spec());
}

namespace {

std::vector<double> z_expectations(const sim::Circuit &c, std::span<const double> params) {
    return sim::pauli_z_expectations(sim::run_circuit(c, params));
}

} // namespace

Tensor quantum_expectation(const Tensor &angles, const Tensor &theta, std::shared_ptr<const sim::Circuit> circuit) {
    if (angles.rank() != 2 || static_cast<int>(angles.dim(1)) != circuit->n_qubits()) {
        throw std::invalid_argument("quantum layer: angles " + ad::shape_str(angles.shape()) +
                                    " do not match " + std::to_string(circuit->n_qubits()) + " qubits");
    }
    const std::size_t B = angles.dim(0), n = angles.dim(1), P = theta.numel();
    if (circuit->n_trainable() != n + P) {
        throw std::invalid_argument("quantum layer: parameter vector does not match the circuit");
    }
    for (double a : angles.data()) {
        if (!std::isfinite(a)) throw std::invalid_argument("quantum layer: non-finite activation");
    }
    std::vector<double> params(n + P);
    std::copy(theta.data().begin(), theta.data().end(), params.begin() + static_cast<long>(n));
    std::vector<double> out(B * n);
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(angles.data().begin() + static_cast<long>(b * n), n, params.begin());
        const auto z = z_expectations(*circuit, params);
        std::copy(z.begin(), z.end(), out.begin() + static_cast<long>(b * n));
    }
    return ad::make_result({B, n}, std::move(out), {angles, theta}, [circuit, B, n, P](ad::Node &self) {
        ad::Node &pa = *self.parents[0], &pt = *self.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pt.requires_grad) pt.ensure_grad();
        std::vector<double> params(n + P);
        std::copy(pt.data.begin(), pt.data.end(), params.begin() + static_cast<long>(n));
        constexpr double shift = std::numbers::pi / 2;
        for (std::size_t b = 0; b < B; ++b) {
            const double *g = self.grad.data() + b * n;
            if (std::all_of(g, g + n, [](double v) { return v == 0.0; })) continue;
            std::copy_n(pa.data.begin() + static_cast<long>(b * n), n, params.begin());
            for (std::size_t j = 0; j < n + P; ++j) {
                const bool is_angle = j < n;
                if (is_angle ? !pa.requires_grad : !pt.requires_grad) continue;
                const double orig = params[j];
                params[j] = orig + shift;
                const auto zp = z_expectations(*circuit, params);
                params[j] = orig - shift;
                const auto zm = z_expectations(*circuit, params);
                params[j] = orig;
                double contrib = 0.0;
                for (std::size_t q = 0; q < n; ++q) contrib += g[q] * 0.5 * (zp[q] - zm[q]);
                if (is_angle) {
                    pa.grad[b * n + j] += contrib;
                } else {
                    pt.grad[j - n] += contrib;
                }
            }
        }
    });
}

QuantumLayer::QuantumLayer(const QuantumLayerConfig &cfg, std::mt19937_64 &rng) : cfg_(cfg) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.n_qubits);
    const auto P = static_cast<std::size_t>(ansatz::param_count(cfg.ansatz_spec()));
    const std::vector<double> zeros_n(n, 0.0), zeros_p(P, 0.0);
    auto c = ansatz::build_angle_encoder(zeros_n, cfg.n_qubits);
    c.append(ansatz::build_ansatz(cfg.ansatz_spec(), zeros_p));
    circuit_ = std::make_shared<const sim::Circuit>(std::move(c));
    pre = init_truncated_normal({static_cast<std::size_t>(cfg.in_features), n}, kInitSigma, rng);
    theta = init_uniform({P}, 0.0, 2 * std::numbers::pi, rng);
    post = init_constant({n, static_cast<std::size_t>(cfg.out_features)}, 0.0);
}

void QuantumLayer::set_shot_mode(std::optional<ShotMode> mode) {
    shots_ = mode;
    *calls_ = 0;
}

Tensor QuantumLayer::forward(const Tensor &x) const {
    if (!circuit_) throw std::logic_error("quantum layer not initialized");
    auto angles = ad::matmul(x, pre);
    Tensor z;
    if (!shots_) {
        z = quantum_expectation(angles, theta, circuit_);
    } else {
        // Sampled estimate z_q = 1 - 2 P(bit q = 1); no gradient.
        const std::size_t B = angles.dim(0), n = angles.dim(1), P = theta.numel();
        std::vector<double> params(n + P), out(B * n);
        std::copy(theta.data().begin(), theta.data().end(), params.begin() + static_cast<long>(n));
        const std::uint64_t call = (*calls_)++;
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(angles.data().begin() + static_cast<long>(b * n), n, params.begin());
            std::seed_seq seq{shots_->seed, call, static_cast<std::uint64_t>(b)};
            std::array<std::uint64_t, 2> seeds{};
            seq.generate(seeds.begin(), seeds.end());
            auto dist = noise::sample_ideal(sim::run_circuit(*circuit_, params), shots_->shots, seeds[0]);
            if (shots_->readout_alpha > 0) dist = noise::apply_readout_flips(dist, shots_->readout_alpha, seeds[1]);
            const auto m = dist.marginals();
            for (std::size_t q = 0; q < n; ++q) out[b * n + q] = 1.0 - 2.0 * m[q];
        }
        z = Tensor::from_data({B, n}, std::move(out));
    }
    return ad::matmul(z, post);
}

void QuantumLayer::collect(const std::string &prefix, NamedParams &out) const {
    out.emplace_back(prefix + ".pre", pre);
    out.emplace_back(prefix + ".theta", theta);
    out.emplace_back(prefix + ".post", post);
}

// ---------------------------------------------------------------------------
// CDCNN

CdcnnLayer::CdcnnLayer(int features, int nodes_, std::mt19937_64 &rng) : nodes(nodes_) {
    if (nodes_ < 1) throw std::invalid_argument("CDCNN nodes must be >= 1");
    const auto n2 = static_cast<std::size_t>(nodes_ * nodes_);
    glue_in = Linear(features, static_cast<int>(n2), rng);
    w1 = init_truncated_normal({n2, 2 * n2}, kInitSigma, rng);
    w2 = init_truncated_normal({2 * n2, n2}, kInitSigma, rng);
    glue_out = Linear(static_cast<int>(n2), features, rng);
    glue_out.weight = init_constant(glue_out.weight.shape(), 0.0);
}

Tensor CdcnnLayer::forward(const Tensor &x) const {
    auto h = glue_in.forward(x);
    h = ad::matmul(ad::silu(ad::matmul(h, w1)), w2);
    return glue_out.forward(h);
}

void CdcnnLayer::collect(const std::string &prefix, NamedParams &out) const {
    glue_in.collect(prefix + ".glue_in", out);
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".w2", w2);
    glue_out.collect(prefix + ".glue_out", out);
}

// ---------------------------------------------------------------------------
// ResBlock

ResBlock::ResBlock(int in, int out, int time_dim, const BlockExtra &extra, std::mt19937_64 &rng)
    : norm1_(in), norm2_(out), conv1_(in, out, 3, 1, rng), conv2_(out, out, 3, 1, rng) {
    if (in != out) skip_ = Conv2d(in, out, 1, 1, rng);
    if (time_dim > 0) time_proj_ = Linear(time_dim, out, rng);
    if (extra.kind == BlockExtra::Kind::Quantum) {
        auto cfg = extra.quantum;
        cfg.in_features = out;
        cfg.out_features = out;
        quantum_.emplace_back(cfg, rng);
        quantum_.emplace_back(cfg, rng);
    } else if (extra.kind == BlockExtra::Kind::Cdcnn) {
        cdcnn_ = CdcnnLayer(out, extra.cdcnn_nodes, rng);
    }
}

Tensor ResBlock::forward(const Tensor &x, const Tensor &temb) const {
    auto h = conv1_.forward(ad::silu(norm1_.forward(x)));
    if (time_proj_) {
        if (!temb.defined()) throw std::invalid_argument("ResBlock: time embedding required");
        h = ad::add_channel_bias(h, time_proj_->forward(temb));
    }
    h = conv2_.forward(ad::silu(norm2_.forward(h)));
    if (!quantum_.empty()) {
        auto v = ad::global_avg_pool(h);
        for (const auto &q : quantum_) v = q.forward(v);
        h = ad::add_channel_bias(h, v);
    } else if (cdcnn_) {
        h = ad::add_channel_bias(h, cdcnn_->forward(ad::global_avg_pool(h)));
    }
    return ad::add(skip_ ? skip_->forward(x) : x, h);
}

void ResBlock::collect(const std::string &prefix, NamedParams &out) const {
    norm1_.collect(prefix + ".norm1", out);
    conv1_.collect(prefix + ".conv1", out);
    if (time_proj_) time_proj_->collect(prefix + ".time", out);
    norm2_.collect(prefix + ".norm2", out);
    conv2_.collect(prefix + ".conv2", out);
    if (skip_) skip_->collect(prefix + ".skip", out);
    for (std::size_t i = 0; i < quantum_.size(); ++i) quantum_[i].collect(prefix + ".q" + std::to_string(i), out);
    if (cdcnn_) cdcnn_->collect(prefix + ".cdcnn", out);
}

void ResBlock::set_shot_mode(const std::optional<ShotMode> &mode) {
    for (std::size_t i = 0; i < quantum_.size(); ++i) {
        auto m = mode;
        if (m) m->seed = m->seed * 31 + i + 1;
        quantum_[i].set_shot_mode(m);
    }
}

std::size_t ResBlock::quantum_parameter_count() const {
    std::size_t n = 0;
    for (const auto &q : quantum_) n += q.ansatz_parameter_count();
    return n;
}

std::size_t ResBlock::cdcnn_parameter_count() const { return cdcnn_ ? cdcnn_->core_parameter_count() : 0; }

} // namespace qlatent::nn
