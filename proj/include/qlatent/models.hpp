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
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qlatent/nn.hpp"

/**
 * @file models.hpp
 * Desk-scale VAE and UNet, each in a classical and a quantum-enhanced
 * variant. Images are [B, 3, S, S] in [0, 1]; latents are
 * [B, latent_channels, S/8, S/8].
 */
namespace qlatent::models {

using ad::Tensor;

struct VAEConfig {
    int image_size = 64;
    int latent_size = 8;
    int latent_channels = 4;
    int base_channels = 16;
    bool quantum = false;
    nn::QuantumLayerConfig quantum_cfg{4, 2, ansatz::AnsatzKind::ESE2, 1, 1};
    double kl_weight = 1e-6;
    double ssim_weight = 1.0;

    void validate() const;
};

struct UNetConfig {
    int in_channels = 4;
    int latent_size = 8;
    int base_channels = 32;
    int n_ublocks = 5;
    int n_mid_resblocks = 2;
    bool quantum = false;
    nn::QuantumLayerConfig quantum_cfg{4, 2, ansatz::AnsatzKind::ESE2, 1, 1};
    int n_classes = 3;
    /// CDCNN nodes for the comparison variant; 0 disables it.
    int cdcnn_nodes = 0;

    void validate() const;
};

/// Latent batch tagged with whether it came from a frozen encoder.
struct Latents {
    Tensor values;
    bool from_frozen_encoder = false;

    /// Wraps externally prepared latents (tests, toy data) as trusted.
    static Latents assume_frozen(Tensor values) { return {std::move(values), true}; }
};

class VAE {
  public:
    VAE(const VAEConfig &cfg, std::uint64_t seed);

    struct Encoded {
        Tensor mu, logvar;
    };

    [[nodiscard]] Encoded encode(const Tensor &x) const;
    /// Output passes through a sigmoid, so it always lies in [0, 1].
    [[nodiscard]] Tensor decode(const Tensor &z) const;
    /// mu + exp(logvar / 2) * eps.
    [[nodiscard]] Tensor reparameterize(const Encoded &e, std::mt19937_64 &rng) const;

    [[nodiscard]] nn::NamedParams parameters() const;
    [[nodiscard]] std::size_t parameter_count() const { return nn::count_parameters(parameters()); }
    [[nodiscard]] std::size_t quantum_parameter_count() const;
    [[nodiscard]] const VAEConfig &config() const noexcept { return cfg_; }

    void freeze() { frozen_ = true; }
    [[nodiscard]] bool frozen() const noexcept { return frozen_; }

    /// Latents fed to diffusion are mu * latent_scale; requires freeze().
    [[nodiscard]] Latents encode_latents(const Tensor &x) const;
    [[nodiscard]] Tensor decode_latents(const Tensor &z) const;
    double latent_scale = 1.0;

    void set_shot_mode(const std::optional<nn::ShotMode> &mode);

  private:
    VAEConfig cfg_;
    bool frozen_ = false;
    nn::Conv2d enc_in_;
    nn::ResBlock enc_top_;
    std::vector<nn::Downsample> enc_down_;
    std::vector<nn::ResBlock> enc_blocks_;
    nn::ResBlock enc_mid_;
    nn::GroupNorm enc_norm_;
    nn::Conv2d enc_out_;
    nn::Conv2d dec_in_;
    nn::ResBlock dec_mid_;
    std::vector<nn::ResBlock> dec_blocks_;
    std::vector<nn::Upsample> dec_up_;
    nn::GroupNorm dec_norm_;
    nn::Conv2d dec_out_;
};

struct VaeLoss {
    Tensor total;
    double pixel = 0, ssim = 0, kl = 0;
};

/**
 * total = mean|x - recon| + ssim_weight * (1 - SSIM) + kl_weight * KL,
 * KL summed over latent elements and averaged over the batch.
 */
[[nodiscard]] VaeLoss vae_loss(const Tensor &x, const Tensor &recon, const Tensor &mu, const Tensor &logvar,
                               const VAEConfig &cfg);

/// Differentiable SSIM (8x8 windows, stride 4) averaged over windows, channels and batch.
[[nodiscard]] Tensor ssim_tensor(const Tensor &x, const Tensor &y, double dynamic_range);

class UNet {
  public:
    UNet(const UNetConfig &cfg, std::uint64_t seed);

    /**
     * Noise prediction for x_t [B, C, S, S] at timesteps t[B]. labels[b] in
     * [0, n_classes) or -1 for no conditioning.
     */
    [[nodiscard]] Tensor forward(const Tensor &x, std::span<const int> t, std::span<const int> labels) const;

    [[nodiscard]] nn::NamedParams parameters() const;
    [[nodiscard]] std::size_t parameter_count() const { return nn::count_parameters(parameters()); }
    [[nodiscard]] std::size_t quantum_parameter_count() const;
    [[nodiscard]] std::size_t cdcnn_parameter_count() const;
    [[nodiscard]] std::size_t quantum_layer_count() const;
    [[nodiscard]] const UNetConfig &config() const noexcept { return cfg_; }

    void set_shot_mode(const std::optional<nn::ShotMode> &mode);

  private:
    [[nodiscard]] std::vector<nn::ResBlock *> all_blocks();
    [[nodiscard]] std::vector<const nn::ResBlock *> all_blocks() const;

    UNetConfig cfg_;
    int time_dim_ = 0;
    nn::Linear time1_, time2_;
    nn::Linear label_;
    nn::Conv2d conv_in_;
    std::vector<nn::ResBlock> down_blocks_;
    std::vector<std::optional<nn::Downsample>> downs_;
    std::vector<nn::ResBlock> mid_blocks_;
    std::vector<std::optional<nn::Upsample>> ups_;
    std::vector<nn::ResBlock> up_blocks_;
    nn::GroupNorm out_norm_;
    nn::Conv2d conv_out_;
};

/// Sinusoidal embedding [B, dim] of integer timesteps.
[[nodiscard]] Tensor timestep_embedding(std::span<const int> t, int dim);

} // namespace qlatent::models
