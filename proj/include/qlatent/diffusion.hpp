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
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "qlatent/models.hpp"
#include "qlatent/optim.hpp"

/**
 * @file diffusion.hpp
 * Linear-beta DDPM schedule, closed-form forward noising, VAE and DDPM
 * training steps, and strided ancestral sampling.
 */
namespace qlatent::diffusion {

using ad::Tensor;

struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta, alpha, alpha_bar;
};

/// Linear beta from beta_start to beta_end over T steps.
[[nodiscard]] DiffusionSchedule build_schedule(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
[[nodiscard]] Tensor forward_diffuse(const Tensor &x0, int t, const Tensor &noise, const DiffusionSchedule &sched);
/// Per-element timesteps over the leading batch dimension.
[[nodiscard]] Tensor forward_diffuse(const Tensor &x0, std::span<const int> t, const Tensor &noise,
                                     const DiffusionSchedule &sched);

[[nodiscard]] Tensor standard_normal(const ad::Shape &shape, std::mt19937_64 &rng);

struct VaeStepReport {
    double pixel = 0, ssim = 0, kl = 0, total = 0;
};

/// One Adam step on a [B, 3, S, S] batch in [0, 1].
VaeStepReport vae_train_step(models::VAE &vae, optim::Optimizer &opt, const Tensor &batch, std::mt19937_64 &rng);

/// Noise predictor signature: (x_t, t, labels) -> eps_hat.
using NoisePredictor = std::function<Tensor(const Tensor &, std::span<const int>, std::span<const int>)>;

/**
 * Mean squared error between sampled noise and its prediction, with t
 * uniform over [0, T) per element.
 */
[[nodiscard]] Tensor diffusion_loss(const NoisePredictor &predict, const Tensor &latents, std::span<const int> labels,
                                    const DiffusionSchedule &sched, std::mt19937_64 &rng);

/// One AdamW step; refuses latents that did not come from a frozen encoder.
double ddpm_train_step(const models::UNet &unet, optim::Optimizer &opt, const models::Latents &latents,
                       std::span<const int> labels, const DiffusionSchedule &sched, std::mt19937_64 &rng);

/// Evenly spaced timesteps from T-1 down to 0, `steps` entries.
[[nodiscard]] std::vector<int> sampling_timesteps(int T, int steps);

struct SampleResult {
    Tensor latents;
    std::size_t unet_evaluations = 0;
};

/**
 * Strided ancestral sampling: starting from N(0, I) at the first timestep,
 * each step forms the predicted x0 (clipped to +-clip) and draws from the
 * DDPM posterior between consecutive timesteps of the subsequence.
 */
[[nodiscard]] SampleResult sample_latents(const NoisePredictor &predict, const ad::Shape &shape, int label,
                                          int steps, const DiffusionSchedule &sched, std::uint64_t seed,
                                          double clip = 10.0);
[[nodiscard]] SampleResult sample_latents(const models::UNet &unet, int n, int label, int steps,
                                          const DiffusionSchedule &sched, std::uint64_t seed, double clip = 10.0);

/// sample_latents followed by decoding through the VAE; images in [0, 1].
[[nodiscard]] Tensor sample_images(const models::VAE &vae, const models::UNet &unet, int n, int label, int steps,
                                   const DiffusionSchedule &sched, std::uint64_t seed);

} // namespace qlatent::diffusion
