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

#include "qlatent/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace qlatent::diffusion {

DiffusionSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw std::invalid_argument("schedule: T must be >= 2");
    if (!(beta_start > 0 && beta_start < beta_end && beta_end < 1)) {
        throw std::invalid_argument("schedule: need 0 < beta_start < beta_end < 1");
    }
    DiffusionSchedule s;
    s.T = T;
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        s.beta[i] = t == T - 1 ? beta_end : beta_start + (beta_end - beta_start) * t / (T - 1);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

Tensor standard_normal(const ad::Shape &shape, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    std::vector<double> d(ad::shape_numel(shape));
    for (auto &v : d) v = g(rng);
    return Tensor::from_data(shape, std::move(d));
}

Tensor forward_diffuse(const Tensor &x0, int t, const Tensor &noise, const DiffusionSchedule &sched) {
    std::vector<int> ts(x0.rank() ? x0.dim(0) : 1, t);
    if (x0.rank() == 0) {
        if (noise.shape() != x0.shape()) throw std::invalid_argument("forward_diffuse: noise shape mismatch");
        if (t < 0 || t >= sched.T) throw std::invalid_argument("forward_diffuse: t out of range");
        const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
        return ad::add(ad::scale(x0, std::sqrt(ab)), ad::scale(noise, std::sqrt(1 - ab)));
    }
    return forward_diffuse(x0, ts, noise, sched);
}

Tensor forward_diffuse(const Tensor &x0, std::span<const int> t, const Tensor &noise, const DiffusionSchedule &sched) {
    if (noise.shape() != x0.shape()) {
        throw std::invalid_argument("forward_diffuse: noise " + ad::shape_str(noise.shape()) + " vs x0 " +
                                    ad::shape_str(x0.shape()));
    }
    if (x0.rank() == 0 || t.size() != x0.dim(0)) throw std::invalid_argument("forward_diffuse: one t per batch row");
    const std::size_t B = x0.dim(0), per = x0.numel() / B;
    std::vector<double> a(x0.numel()), s(x0.numel());
    for (std::size_t b = 0; b < B; ++b) {
        if (t[b] < 0 || t[b] >= sched.T) throw std::invalid_argument("forward_diffuse: t out of range");
        const double ab = sched.alpha_bar[static_cast<std::size_t>(t[b])];
        std::fill_n(a.begin() + static_cast<long>(b * per), per, std::sqrt(ab));
        std::fill_n(s.begin() + static_cast<long>(b * per), per, std::sqrt(1 - ab));
    }
    return ad::add(ad::mul(x0, Tensor::from_data(x0.shape(), std::move(a))),
                   ad::mul(noise, Tensor::from_data(x0.shape(), std::move(s))));
}

namespace {

void require_finite_params(const nn::NamedParams &params) {
    for (const auto &[name, t] : params)
        for (double v : t.data())
            if (!std::isfinite(v)) throw std::runtime_error("parameter " + name + " became non-finite");
}

} // namespace

VaeStepReport vae_train_step(models::VAE &vae, optim::Optimizer &opt, const Tensor &batch, std::mt19937_64 &rng) {
    if (vae.frozen()) throw std::logic_error("vae is frozen");
    for (double v : batch.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("vae batch values must lie in [0, 1]");
    }
    opt.zero_grad();
    const auto enc = vae.encode(batch);
    const auto recon = vae.decode(vae.reparameterize(enc, rng));
    const auto loss = models::vae_loss(batch, recon, enc.mu, enc.logvar, vae.config());
    const double total = loss.total.item();
    if (!std::isfinite(total)) throw std::runtime_error("non-finite vae loss; step aborted");
    ad::backward(loss.total);
    opt.step();
    require_finite_params(opt.params());
    return {loss.pixel, loss.ssim, loss.kl, total};
}

Tensor diffusion_loss(const NoisePredictor &predict, const Tensor &latents, std::span<const int> labels,
                      const DiffusionSchedule &sched, std::mt19937_64 &rng) {
    const std::size_t B = latents.dim(0);
    std::uniform_int_distribution<int> tdist(0, sched.T - 1);
    std::vector<int> t(B);
    for (auto &v : t) v = tdist(rng);
    const auto noise = standard_normal(latents.shape(), rng);
    const auto xt = forward_diffuse(latents, t, noise, sched);
    const auto pred = predict(xt, t, labels);
    if (pred.shape() != noise.shape()) throw std::invalid_argument("noise predictor returned wrong shape");
    return ad::mean(ad::square(ad::sub(pred, noise)));
}

double ddpm_train_step(const models::UNet &unet, optim::Optimizer &opt, const models::Latents &latents,
                       std::span<const int> labels, const DiffusionSchedule &sched, std::mt19937_64 &rng) {
    if (!latents.from_frozen_encoder) {
        throw std::logic_error("diffusion training requires latents from a frozen, pretrained vae encoder");
    }
    opt.zero_grad();
    const auto loss = diffusion_loss(
        [&](const Tensor &x, std::span<const int> t, std::span<const int> y) { return unet.forward(x, t, y); },
        latents.values, labels, sched, rng);
    const double value = loss.item();
    if (!std::isfinite(value)) throw std::runtime_error("non-finite diffusion loss; step aborted");
    ad::backward(loss);
    opt.step();
    require_finite_params(opt.params());
    return value;
}

std::vector<int> sampling_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) {
        throw std::invalid_argument("sampling steps must be in [1, T]; got " + std::to_string(steps));
    }
    std::vector<int> ts(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        // Descending, first entry T-1, last entry 0 when steps > 1.
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        ts[static_cast<std::size_t>(i)] = static_cast<int>(std::lround((T - 1) * (1.0 - frac)));
    }
    return ts;
}

SampleResult sample_latents(const NoisePredictor &predict, const ad::Shape &shape, int label, int steps,
                            const DiffusionSchedule &sched, std::uint64_t seed, double clip) {
    if (shape.empty() || shape[0] < 1) throw std::invalid_argument("sample: n must be >= 1");
    const auto ts = sampling_timesteps(sched.T, steps);
    const std::size_t n = shape[0];
    std::mt19937_64 rng(seed);
    auto x = standard_normal(shape, rng);
    const std::vector<int> labels(n, label);
    SampleResult res;
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
        const bool last = i + 1 == ts.size();
        const double ab_prev = last ? 1.0 : sched.alpha_bar[static_cast<std::size_t>(ts[i + 1])];
        const std::vector<int> tv(n, t);
        const auto eps = predict(x, tv, labels);
        ++res.unet_evaluations;
        // Posterior q(x_prev | x_t, x0) between consecutive subsequence steps.
        const double a_step = ab / ab_prev, b_step = 1.0 - a_step;
        const double c0 = std::sqrt(ab_prev) * b_step / (1 - ab), ct = std::sqrt(a_step) * (1 - ab_prev) / (1 - ab);
        const double sd = last ? 0.0 : std::sqrt(b_step * (1 - ab_prev) / (1 - ab));
        std::vector<double> next(x.numel());
        const auto xd = x.data(), ed = eps.data();
        for (std::size_t k = 0; k < next.size(); ++k) {
            const double x0 = std::clamp((xd[k] - std::sqrt(1 - ab) * ed[k]) / std::sqrt(ab), -clip, clip);
            next[k] = c0 * x0 + ct * xd[k];
            if (sd > 0) next[k] += sd * g(rng);
        }
        x = Tensor::from_data(shape, std::move(next));
    }
    res.latents = x;
    return res;
}

SampleResult sample_latents(const models::UNet &unet, int n, int label, int steps, const DiffusionSchedule &sched,
                            std::uint64_t seed, double clip) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    const auto &cfg = unet.config();
    const auto C = static_cast<std::size_t>(cfg.in_channels), S = static_cast<std::size_t>(cfg.latent_size);
    return sample_latents(
        [&](const Tensor &x, std::span<const int> t, std::span<const int> y) { return unet.forward(x, t, y); },
        {static_cast<std::size_t>(n), C, S, S}, label, steps, sched, seed, clip);
}

Tensor sample_images(const models::VAE &vae, const models::UNet &unet, int n, int label, int steps,
                     const DiffusionSchedule &sched, std::uint64_t seed) {
    return vae.decode_latents(sample_latents(unet, n, label, steps, sched, seed).latents);
}

} // namespace qlatent::diffusion
