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
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qlatent/ansatz.hpp"
#include "qlatent/autodiff.hpp"

/**
 * @file nn.hpp
 * Layer zoo on top of the autodiff engine: dense and convolutional layers,
 * group normalization, residual blocks, the differentiable quantum layer and
 * the classical CDCNN comparison layer.
 *
 * Every layer registers its trainable tensors under dotted names through
 * `collect`, which is what checkpoints and optimizers iterate over.
 */
namespace qlatent::nn {

using ad::Tensor;
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Truncated normal (resampled outside +-2 sigma).
[[nodiscard]] Tensor init_truncated_normal(ad::Shape shape, double sigma, std::mt19937_64 &rng);
[[nodiscard]] Tensor init_uniform(ad::Shape shape, double lo, double hi, std::mt19937_64 &rng);
[[nodiscard]] Tensor init_constant(ad::Shape shape, double value);

inline constexpr double kInitSigma = 0.02;

[[nodiscard]] std::size_t count_parameters(const NamedParams &params);

/// Largest group count <= 4 dividing `channels`.
[[nodiscard]] int default_groups(int channels);

class Linear {
  public:
    Linear() = default;
    Linear(int in, int out, std::mt19937_64 &rng, bool bias = true);
    [[nodiscard]] Tensor forward(const Tensor &x) const;
    void collect(const std::string &prefix, NamedParams &out) const;

    Tensor weight;  // [in, out]
    Tensor bias;    // [out] or undefined
};

class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(int in, int out, int kernel, int stride, std::mt19937_64 &rng);
    [[nodiscard]] Tensor forward(const Tensor &x) const;
    void collect(const std::string &prefix, NamedParams &out) const;

    Tensor weight;  // [out, in, k, k]
    Tensor bias;    // [out]
    int stride = 1;
    int padding = 1;
};

class GroupNorm {
  public:
    GroupNorm() = default;
    explicit GroupNorm(int channels);
    [[nodiscard]] Tensor forward(const Tensor &x) const;
    void collect(const std::string &prefix, NamedParams &out) const;

    Tensor gamma, beta;
    int groups = 1;
};

// ---------------------------------------------------------------------------
// Quantum layer

struct QuantumLayerConfig {
    int n_qubits = 4;
    int n_layers = 2;
    ansatz::AnsatzKind kind = ansatz::AnsatzKind::ESE2;
    int in_features = 1;
    int out_features = 1;

    void validate() const;
    [[nodiscard]] ansatz::AnsatzSpec ansatz_spec() const { return {kind, n_qubits, n_layers}; }
};

/// Inference-time measurement model: finite shots with symmetric readout flips.
struct ShotMode {
    std::size_t shots = 1000;
    double readout_alpha = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Angle-encoded variational layer. Per row: angles = x * pre, the circuit is
 * RY(angle_q) on every qubit followed by the ansatz, z_q = <Z_q>, and the
 * output is z * post. Gradients of z with respect to both the encoding
 * angles and the ansatz parameters use the two-point parameter shift.
 */
class QuantumLayer {
  public:
    QuantumLayer() = default;
    QuantumLayer(const QuantumLayerConfig &cfg, std::mt19937_64 &rng);

    [[nodiscard]] Tensor forward(const Tensor &x) const;
    void collect(const std::string &prefix, NamedParams &out) const;

    /// Switches expectation estimation to sampled shots; nullopt restores
    /// exact expectations. Resets the internal call counter.
    void set_shot_mode(std::optional<ShotMode> mode);
    [[nodiscard]] const QuantumLayerConfig &config() const noexcept { return cfg_; }
    [[nodiscard]] std::size_t ansatz_parameter_count() const { return theta.numel(); }

    Tensor pre;    // [in, n]
    Tensor theta;  // [param_count]
    Tensor post;   // [n, out]

  private:
    QuantumLayerConfig cfg_;
    std::shared_ptr<const sim::Circuit> circuit_;  // encoder + ansatz, trainable slots: n angles then theta
    std::optional<ShotMode> shots_;
    std::shared_ptr<std::uint64_t> calls_ = std::make_shared<std::uint64_t>(0);
};

/**
 * z[B, n] = <Z> expectations of `circuit` with slots bound to
 * (angles[b, :], theta). Exposed for testing; QuantumLayer wraps it.
 */
[[nodiscard]] Tensor quantum_expectation(const Tensor &angles, const Tensor &theta,
                                         std::shared_ptr<const sim::Circuit> circuit);

/**
 * Classical comparison layer: pooled feature -> (glue) -> nodes^2 ->
 * 2 nodes^2 -> SiLU -> nodes^2 -> (glue) -> out. The two inner dense
 * matrices carry 4 nodes^4 parameters; the glue maps adapt widths and are
 * reported separately.
 */
class CdcnnLayer {
  public:
    CdcnnLayer() = default;
    CdcnnLayer(int features, int nodes, std::mt19937_64 &rng);
    [[nodiscard]] Tensor forward(const Tensor &x) const;
    void collect(const std::string &prefix, NamedParams &out) const;
    [[nodiscard]] std::size_t core_parameter_count() const { return w1.numel() + w2.numel(); }

    Linear glue_in, glue_out;
    Tensor w1, w2;
    int nodes = 0;
};

// ---------------------------------------------------------------------------
// Residual blocks

/// Optional enhancement of a ResBlock with quantum or CDCNN layers.
struct BlockExtra {
    enum class Kind { None, Quantum, Cdcnn };
    Kind kind = Kind::None;
    QuantumLayerConfig quantum;  // in/out features are set from the block width
    int cdcnn_nodes = 8;
};

/**
 * norm -> act -> conv -> (+ time bias) -> norm -> act -> conv, plus skip
 * (1x1 conv when channel counts differ). With quantum extras, two quantum
 * layers act on the spatially pooled output of the second conv and the
 * result is broadcast-added to the feature map; CDCNN does the same with one
 * CdcnnLayer.
 */
class ResBlock {
  public:
    ResBlock() = default;
    ResBlock(int in, int out, int time_dim, const BlockExtra &extra, std::mt19937_64 &rng);

    [[nodiscard]] Tensor forward(const Tensor &x, const Tensor &temb = Tensor()) const;
    void collect(const std::string &prefix, NamedParams &out) const;
    void set_shot_mode(const std::optional<ShotMode> &mode);

    [[nodiscard]] std::size_t quantum_parameter_count() const;
    [[nodiscard]] std::size_t cdcnn_parameter_count() const;
    [[nodiscard]] const std::vector<QuantumLayer> &quantum_layers() const noexcept { return quantum_; }

  private:
    GroupNorm norm1_, norm2_;
    Conv2d conv1_, conv2_;
    std::optional<Conv2d> skip_;
    std::optional<Linear> time_proj_;
    std::vector<QuantumLayer> quantum_;
    std::optional<CdcnnLayer> cdcnn_;
};

/// Stride-2 3x3 convolution.
class Downsample {
  public:
    Downsample() = default;
    Downsample(int in, int out, std::mt19937_64 &rng) : conv(in, out, 3, 2, rng) {}
    [[nodiscard]] Tensor forward(const Tensor &x) const { return conv.forward(x); }
    void collect(const std::string &prefix, NamedParams &out) const { conv.collect(prefix + ".conv", out); }
    Conv2d conv;
};

/// Nearest 2x upsampling followed by a 3x3 convolution.
class Upsample {
  public:
    Upsample() = default;
    Upsample(int in, int out, std::mt19937_64 &rng) : conv(in, out, 3, 1, rng) {}
    [[nodiscard]] Tensor forward(const Tensor &x) const { return conv.forward(ad::upsample_nearest2x(x)); }
    void collect(const std::string &prefix, NamedParams &out) const { conv.collect(prefix + ".conv", out); }
    Conv2d conv;
};

} // namespace qlatent::nn
