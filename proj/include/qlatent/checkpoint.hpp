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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qlatent/models.hpp"
#include "qlatent/optim.hpp"

/**
 * @file checkpoint.hpp
 * QLDM checkpoint files. Layout (all integers little-endian):
 *
 *   "QLDM" | u32 version | u32 kind (0 = VAE, 1 = UNet)
 *   u32 config length | config text (key = value lines)
 *   u32 tensor count | per tensor: u32 name length, name, u32 rank,
 *                       u64 dims[rank], f32 values
 *   u8 has optimizer | u64 step, then f32 first and second moments per
 *                       tensor in tensor order
 *
 * Parameters are stored as 32-bit floats, so save -> load -> save is
 * byte-identical while the first save rounds from double.
 */
namespace qlatent::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class ModelKind : std::uint32_t { VAE = 0, UNet = 1 };

[[nodiscard]] std::string to_string(ModelKind kind);

struct NamedArray {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<float> values;
};

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<std::vector<float>> m, v;
};

struct Checkpoint {
    ModelKind kind = ModelKind::VAE;
    std::string config;
    std::vector<NamedArray> tensors;
    std::optional<OptimizerState> optimizer;
};

void write_file(const std::filesystem::path &path, const Checkpoint &c);
/// Throws std::runtime_error on a bad magic, version mismatch or truncation.
[[nodiscard]] Checkpoint read_file(const std::filesystem::path &path);

// Model configs as text.
[[nodiscard]] std::string vae_config_text(const models::VAEConfig &cfg, double latent_scale);
[[nodiscard]] std::string unet_config_text(const models::UNetConfig &cfg);

[[nodiscard]] Checkpoint capture(ModelKind kind, std::string config, const nn::NamedParams &params,
                                 const optim::Optimizer *opt = nullptr);

void save_vae(const std::filesystem::path &path, const models::VAE &vae, const optim::Optimizer *opt = nullptr);
void save_unet(const std::filesystem::path &path, const models::UNet &unet, const optim::Optimizer *opt = nullptr);

struct LoadedVAE {
    models::VAE model;
    std::optional<OptimizerState> optimizer;
};
struct LoadedUNet {
    models::UNet model;
    std::optional<OptimizerState> optimizer;
};

/// Rebuilds the model from the echoed config and copies parameters by name.
[[nodiscard]] LoadedVAE load_vae(const std::filesystem::path &path);
[[nodiscard]] LoadedUNet load_unet(const std::filesystem::path &path);

/// Restores saved moments into an optimizer built over the same parameters.
void restore_optimizer(optim::Optimizer &opt, const OptimizerState &state);

} // namespace qlatent::ckpt
