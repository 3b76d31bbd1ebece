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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "grad_check.hpp"
#include "qlatent/diffusion.hpp"
#include "qlatent/models.hpp"
#include "qlatent/synthetic.hpp"

using namespace qlatent;
using ad::Tensor;
using qlatent::testing::grad_check;
using qlatent::testing::random_projection_loss;
using qlatent::testing::random_tensor;

namespace {

models::VAEConfig small_vae() {
    models::VAEConfig c;
    c.base_channels = 8;
    return c;
}

std::size_t count_named(const nn::NamedParams &p, const std::string &suffix) {
    std::size_t n = 0;
    for (const auto &[name, t] : p)
        if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            n += t.numel();
    return n;
}

} // namespace

TEST(vae, shape_round_trip) {
    models::VAE vae(small_vae(), 1);
    std::mt19937_64 rng(2);
    const auto x = random_tensor({2, 3, 64, 64}, rng, 0.0, 1.0, false);
    const auto enc = vae.encode(x);
    EXPECT_EQ(enc.mu.shape(), (ad::Shape{2, 4, 8, 8}));
    EXPECT_EQ(enc.logvar.shape(), (ad::Shape{2, 4, 8, 8}));
    EXPECT_EQ(vae.decode(vae.reparameterize(enc, rng)).shape(), (ad::Shape{2, 3, 64, 64}));
    EXPECT_THROW((void)vae.encode(Tensor::zeros({2, 3, 32, 32})), std::invalid_argument);
    EXPECT_THROW((void)vae.decode(Tensor::zeros({2, 3, 8, 8})), std::invalid_argument);
}

TEST(vae, decode_of_zero_latent_is_in_unit_range) {
    models::VAE vae(small_vae(), 3);
    const auto img = vae.decode(Tensor::zeros({1, 4, 8, 8}));
    for (double v : img.data()) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(vae, config_validation) {
    auto c = small_vae();
    c.latent_size = 16;
    EXPECT_THROW(models::VAE(c, 1), std::invalid_argument);
}

TEST(vae_loss, identity_reconstruction_has_zero_pixel_and_ssim_terms) {
    std::mt19937_64 rng(4);
    const auto x = random_tensor({2, 3, 16, 16}, rng, 0.0, 1.0, false);
    const auto l = models::vae_loss(x, x, Tensor::zeros({2, 4, 2, 2}), Tensor::zeros({2, 4, 2, 2}), small_vae());
    EXPECT_EQ(l.pixel, 0.0);
    EXPECT_DOUBLE_EQ(1.0 - l.ssim, 0.0);
    EXPECT_EQ(l.kl, 0.0);
    EXPECT_NEAR(l.total.item(), 0.0, 1e-15);
}

TEST(vae_loss, kl_matches_closed_form_and_is_nonnegative) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_tensor({3, 3, 8, 8}, rng, 0.0, 1.0, false);
        const auto r = random_tensor({3, 3, 8, 8}, rng, 0.0, 1.0, false);
        const auto mu = random_tensor({3, 4, 1, 1}, rng, -2.0, 2.0, false);
        const auto lv = random_tensor({3, 4, 1, 1}, rng, -3.0, 3.0, false);
        const auto cfg = small_vae();
        const auto l = models::vae_loss(x, r, mu, lv, cfg);
        double kl = 0, l1 = 0;
        for (std::size_t i = 0; i < mu.numel(); ++i) {
            const double m = mu.data()[i], v = lv.data()[i];
            kl += 0.5 * (m * m + std::exp(v) - 1 - v);
        }
        kl /= 3;
        for (std::size_t i = 0; i < x.numel(); ++i) l1 += std::abs(x.data()[i] - r.data()[i]);
        l1 /= static_cast<double>(x.numel());
        EXPECT_GE(l.kl, 0.0);
        EXPECT_NEAR(l.kl, kl, 1e-12);
        EXPECT_NEAR(l.pixel, l1, 1e-12);
        EXPECT_NEAR(l.total.item(), l1 + cfg.ssim_weight * (1 - l.ssim) + cfg.kl_weight * kl, 1e-12);
    }
}

TEST(vae_loss, gradient_matches_finite_differences) {
    std::mt19937_64 rng(6);
    const auto x = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0, false);
    auto cfg = small_vae();
    cfg.kl_weight = 0.1;
    const double err = grad_check(
        {random_tensor({1, 3, 8, 8}, rng, 0.1, 0.9), random_tensor({1, 4, 1, 1}, rng), random_tensor({1, 4, 1, 1}, rng)},
        [&](const std::vector<Tensor> &in) { return models::vae_loss(x, in[0], in[1], in[2], cfg).total; });
    EXPECT_LT(err, 1e-3);
}

TEST(vae, gradient_through_encoder_and_decoder) {
    models::VAEConfig c;
    c.image_size = 16;
    c.latent_size = 2;
    c.base_channels = 4;
    models::VAE vae(c, 7);
    std::mt19937_64 rng(8);
    const auto x = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    const auto params = vae.parameters();
    std::vector<Tensor> inputs;
    for (const auto &[name, t] : params)
        if (name.find("enc.in") != std::string::npos || name.find("dec.out") != std::string::npos) inputs.push_back(t);
    ASSERT_FALSE(inputs.empty());
    const double err = grad_check(inputs, [&](const std::vector<Tensor> &) {
        const auto e = vae.encode(x);
        return random_projection_loss(ad::add(e.mu, ad::scale(e.logvar, 0.3)), 9) +
               random_projection_loss(vae.decode(e.mu), 10);
    }, 1e-5);
    EXPECT_LT(err, 1e-3);
}

TEST(vae, quantum_parameter_count_is_layers_times_3ln) {
    auto c = small_vae();
    c.quantum = true;
    models::VAE vae(c, 11);
    const std::size_t per_layer = 3 * 2 * 4;
    EXPECT_EQ(vae.quantum_parameter_count() % per_layer, 0u);
    EXPECT_EQ(vae.quantum_parameter_count(), 4 * per_layer);
    EXPECT_EQ(vae.quantum_parameter_count(), count_named(vae.parameters(), ".theta"));
    EXPECT_GT(vae.parameter_count(), models::VAE(small_vae(), 11).parameter_count());
    EXPECT_EQ(models::VAE(small_vae(), 11).quantum_parameter_count(), 0u);
}

TEST(vae, frozen_encoder_produces_scaled_latents) {
    models::VAE vae(small_vae(), 12);
    std::mt19937_64 rng(13);
    const auto x = random_tensor({2, 3, 64, 64}, rng, 0.0, 1.0, false);
    EXPECT_THROW((void)vae.encode_latents(x), std::logic_error);
    vae.freeze();
    vae.latent_scale = 2.5;
    const auto lat = vae.encode_latents(x);
    const auto mu = vae.encode(x).mu;
    ASSERT_TRUE(lat.from_frozen_encoder);
    for (std::size_t i = 0; i < mu.numel(); ++i) EXPECT_NEAR(lat.values.data()[i], 2.5 * mu.data()[i], 1e-12);
    const auto a = vae.decode_latents(lat.values), b = vae.decode(mu);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
    std::mt19937_64 r2(1);
    optim::Optimizer opt({}, vae.parameters());
    EXPECT_THROW((void)diffusion::vae_train_step(vae, opt, x, r2), std::logic_error);
}

TEST(vae, smoke_training_on_synthetic_images) {
    const auto ds = synth::generate_dataset(30, 14, 64);
    std::vector<img::Image> train;
    for (const auto *s : ds.split(synth::Split::Train)) train.push_back(s->image);
    for (const auto *s : ds.split(synth::Split::Val)) train.push_back(s->image);
    train.resize(64);
    models::VAE vae(small_vae(), 15);
    optim::Optimizer opt({}, vae.parameters());
    std::mt19937_64 rng(16);
    std::vector<double> totals;
    for (int step = 0; step < 200; ++step) {
        const std::size_t off = static_cast<std::size_t>(step % 4) * 16;
        const auto batch = img::to_tensor(std::span(train).subspan(off, 16));
        const auto rep = diffusion::vae_train_step(vae, opt, batch, rng);
        ASSERT_TRUE(std::isfinite(rep.total));
        ASSERT_GE(rep.kl, 0.0);
        totals.push_back(rep.total);
    }
    EXPECT_LT(totals.back(), totals.front());
    vae.freeze();
    const auto mu = vae.encode(img::to_tensor(train)).mu;
    for (std::size_t c = 0; c < 4; ++c) {
        double m = 0;
        for (std::size_t b = 0; b < 64; ++b)
            for (std::size_t i = 0; i < 64; ++i) m += mu.data()[(b * 4 + c) * 64 + i];
        m /= 64.0 * 64.0;
        EXPECT_GT(m, -1.0) << c;
        EXPECT_LT(m, 1.0) << c;
    }
}

TEST(unet, output_shape_and_label_validation) {
    models::UNetConfig c;
    c.base_channels = 8;
    models::UNet unet(c, 17);
    std::mt19937_64 rng(18);
    const auto x = random_tensor({3, 4, 8, 8}, rng, -1, 1, false);
    const std::vector<int> t{0, 500, 999}, l{0, -1, 2}, bad{0, 3, 1};
    EXPECT_EQ(unet.forward(x, t, l).shape(), x.shape());
    EXPECT_THROW((void)unet.forward(x, t, bad), std::invalid_argument);
    EXPECT_THROW((void)unet.forward(x, std::vector<int>{1, 2}, l), std::invalid_argument);
}

TEST(unet, quantum_and_cdcnn_parameter_accounting) {
    models::UNetConfig c;
    c.base_channels = 8;
    c.quantum = true;
    models::UNet q(c, 19);
    EXPECT_EQ(q.quantum_layer_count(), 24u);
    EXPECT_EQ(q.quantum_parameter_count(), q.quantum_layer_count() * 3 * 2 * 4);
    EXPECT_EQ(q.quantum_parameter_count(), count_named(q.parameters(), ".theta"));
    models::UNetConfig d;
    d.base_channels = 8;
    d.cdcnn_nodes = 8;
    models::UNet cd(d, 20);
    EXPECT_EQ(cd.cdcnn_parameter_count(), 16384u);
    EXPECT_EQ(cd.quantum_parameter_count(), 0u);
}

TEST(unet, gradient_matches_finite_differences) {
    models::UNetConfig c;
    c.base_channels = 4;
    c.latent_size = 4;
    c.n_ublocks = 2;
    c.n_mid_resblocks = 1;
    models::UNet unet(c, 21);
    std::mt19937_64 rng(22);
    const auto x = random_tensor({2, 4, 4, 4}, rng, -1, 1, false);
    const std::vector<int> t{3, 700}, l{1, -1};
    std::vector<Tensor> inputs;
    for (const auto &[name, p] : unet.parameters())
        if (name.rfind("label", 0) == 0 || name.rfind("time1", 0) == 0 || name.rfind("out.conv", 0) == 0)
            inputs.push_back(p);
    const double err = grad_check(
        inputs, [&](const std::vector<Tensor> &) { return random_projection_loss(unet.forward(x, t, l), 23); });
    EXPECT_LT(err, 1e-3);
}

TEST(unet, timestep_embedding_values) {
    const std::vector<int> t{0, 7};
    const auto e = models::timestep_embedding(t, 4);
    EXPECT_EQ(e.shape(), (ad::Shape{2, 4}));
    EXPECT_DOUBLE_EQ(e.data()[0], 0.0);
    EXPECT_DOUBLE_EQ(e.data()[2], 1.0);
    EXPECT_NEAR(e.data()[4], std::sin(7.0), 1e-15);
    EXPECT_NEAR(e.data()[5], std::sin(7.0 / 100.0), 1e-15);
    EXPECT_NEAR(e.data()[7], std::cos(7.0 / 100.0), 1e-15);
    EXPECT_THROW((void)models::timestep_embedding(t, 3), std::invalid_argument);
}
