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

#include "qlatent/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qlatent::models {

namespace {

nn::BlockExtra quantum_extra(bool quantum, const nn::QuantumLayerConfig &cfg) {
    nn::BlockExtra e;
    if (quantum) {
        e.kind = nn::BlockExtra::Kind::Quantum;
        e.quantum = cfg;
    }
    return e;
}

void require_image_batch(const Tensor &x, std::size_t channels, std::size_t size, const char *what) {
    if (x.rank() != 4 || x.dim(1) != channels || x.dim(2) != size || x.dim(3) != size) {
        throw std::invalid_argument(std::string(what) + ": expected [B, " + std::to_string(channels) + ", " +
                                    std::to_string(size) + ", " + std::to_string(size) + "], got " +
                                    ad::shape_str(x.shape()));
    }
}

} // namespace

void VAEConfig::validate() const {
    if (latent_size < 1 || image_size != 8 * latent_size) {
        throw std::invalid_argument("vae: image_size must be 8 * latent_size (got " + std::to_string(image_size) +
                                    " and " + std::to_string(latent_size) + ")");
    }
    if (latent_channels < 1) throw std::invalid_argument("vae: latent_channels must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("vae: base_channels must be >= 1");
    if (!(kl_weight >= 0) || !(ssim_weight >= 0)) throw std::invalid_argument("vae: loss weights must be >= 0");
    if (quantum) quantum_cfg.validate();
}

void UNetConfig::validate() const {
    if (in_channels < 1) throw std::invalid_argument("unet: in_channels must be >= 1");
    if (latent_size < 1) throw std::invalid_argument("unet: latent_size must be >= 1");
    if (base_channels < 2 || base_channels % 2 != 0) {
        throw std::invalid_argument("unet: base_channels must be even and >= 2");
    }
    if (n_ublocks < 1) throw std::invalid_argument("unet: n_ublocks must be >= 1");
    if (n_mid_resblocks < 0) throw std::invalid_argument("unet: n_mid_resblocks must be >= 0");
    if (n_classes < 0) throw std::invalid_argument("unet: n_classes must be >= 0");
    if (cdcnn_nodes < 0) throw std::invalid_argument("unet: cdcnn_nodes must be >= 0");
    if (cdcnn_nodes > 0 && quantum) throw std::invalid_argument("unet: quantum and cdcnn variants are exclusive");
    if (cdcnn_nodes > 0 && n_mid_resblocks < 1) throw std::invalid_argument("unet: cdcnn needs a mid block");
    if (quantum) quantum_cfg.validate();
}

// ---------------------------------------------------------------------------
// VAE

VAE::VAE(const VAEConfig &cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const int b = cfg.base_channels, lc = cfg.latent_channels;
    const auto extra = quantum_extra(cfg.quantum, cfg.quantum_cfg);
    const int enc_ch[3] = {b, 2 * b, 2 * b};

    enc_in_ = nn::Conv2d(3, b, 3, 1, rng);
    enc_top_ = nn::ResBlock(b, b, 0, {}, rng);
    int c = b;
    for (int i = 0; i < 3; ++i) {
        enc_down_.emplace_back(c, enc_ch[i], rng);
        enc_blocks_.emplace_back(enc_ch[i], enc_ch[i], 0, nn::BlockExtra{}, rng);
        c = enc_ch[i];
    }
    enc_mid_ = nn::ResBlock(c, c, 0, extra, rng);
    enc_norm_ = nn::GroupNorm(c);
    enc_out_ = nn::Conv2d(c, 2 * lc, 3, 1, rng);

    const int dec_ch[3] = {2 * b, 2 * b, b};
    dec_in_ = nn::Conv2d(lc, 2 * b, 3, 1, rng);
    dec_mid_ = nn::ResBlock(2 * b, 2 * b, 0, extra, rng);
    c = 2 * b;
    for (int i = 0; i < 3; ++i) {
        dec_blocks_.emplace_back(c, dec_ch[i], 0, nn::BlockExtra{}, rng);
        dec_up_.emplace_back(dec_ch[i], dec_ch[i], rng);
        c = dec_ch[i];
    }
    dec_norm_ = nn::GroupNorm(c);
    dec_out_ = nn::Conv2d(c, 3, 3, 1, rng);
}

VAE::Encoded VAE::encode(const Tensor &x) const {
    require_image_batch(x, 3, static_cast<std::size_t>(cfg_.image_size), "vae encode");
    auto h = enc_top_.forward(enc_in_.forward(x));
    for (std::size_t i = 0; i < enc_blocks_.size(); ++i) h = enc_blocks_[i].forward(enc_down_[i].forward(h));
    h = enc_mid_.forward(h);
    h = enc_out_.forward(ad::silu(enc_norm_.forward(h)));
    const auto lc = static_cast<std::size_t>(cfg_.latent_channels);
    return {ad::slice_channels(h, 0, lc), ad::clamp(ad::slice_channels(h, lc, lc), -20.0, 10.0)};
}

Tensor VAE::decode(const Tensor &z) const {
    require_image_batch(z, static_cast<std::size_t>(cfg_.latent_channels), static_cast<std::size_t>(cfg_.latent_size),
                        "vae decode");
    auto h = dec_mid_.forward(dec_in_.forward(z));
    for (std::size_t i = 0; i < dec_blocks_.size(); ++i) h = dec_up_[i].forward(dec_blocks_[i].forward(h));
    return ad::sigmoid(dec_out_.forward(ad::silu(dec_norm_.forward(h))));
}

Tensor VAE::reparameterize(const Encoded &e, std::mt19937_64 &rng) const {
    std::normal_distribution<double> g;
    std::vector<double> eps(e.mu.numel());
    for (auto &v : eps) v = g(rng);
    auto noise = Tensor::from_data(e.mu.shape(), std::move(eps));
    return ad::add(e.mu, ad::mul(ad::exp(ad::scale(e.logvar, 0.5)), noise));
}

nn::NamedParams VAE::parameters() const {
    nn::NamedParams p;
    enc_in_.collect("enc.in", p);
    enc_top_.collect("enc.top", p);
    for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
        enc_down_[i].collect("enc.down" + std::to_string(i), p);
        enc_blocks_[i].collect("enc.block" + std::to_string(i), p);
    }
    enc_mid_.collect("enc.mid", p);
    enc_norm_.collect("enc.norm", p);
    enc_out_.collect("enc.out", p);
    dec_in_.collect("dec.in", p);
    dec_mid_.collect("dec.mid", p);
    for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
        dec_blocks_[i].collect("dec.block" + std::to_string(i), p);
        dec_up_[i].collect("dec.up" + std::to_string(i), p);
    }
    dec_norm_.collect("dec.norm", p);
    dec_out_.collect("dec.out", p);
    return p;
}

std::size_t VAE::quantum_parameter_count() const {
    return enc_mid_.quantum_parameter_count() + dec_mid_.quantum_parameter_count();
}

Latents VAE::encode_latents(const Tensor &x) const {
    if (!frozen_) throw std::logic_error("vae must be frozen before producing diffusion latents");
    return {ad::scale(encode(x).mu, latent_scale).detach(), true};
}

Tensor VAE::decode_latents(const Tensor &z) const { return decode(ad::scale(z, 1.0 / latent_scale)); }

void VAE::set_shot_mode(const std::optional<nn::ShotMode> &mode) {
    auto m = mode;
    enc_mid_.set_shot_mode(m);
    if (m) m->seed += 0x5eed;
    dec_mid_.set_shot_mode(m);
}

// ---------------------------------------------------------------------------
// Losses

Tensor ssim_tensor(const Tensor &x, const Tensor &y, double R) {
    if (x.shape() != y.shape() || x.rank() != 4) {
        throw std::invalid_argument("ssim: shape mismatch " + ad::shape_str(x.shape()) + " vs " +
                                    ad::shape_str(y.shape()));
    }
    const double c1 = (0.01 * R) * (0.01 * R), c2 = (0.03 * R) * (0.03 * R);
    auto pool = [](const Tensor &t) { return ad::avg_pool2d(t, 8, 4); };
    auto mx = pool(x), my = pool(y);
    auto sxx = ad::sub(pool(ad::mul(x, x)), ad::mul(mx, mx));
    auto syy = ad::sub(pool(ad::mul(y, y)), ad::mul(my, my));
    auto sxy = ad::sub(pool(ad::mul(x, y)), ad::mul(mx, my));
    auto num = ad::mul(ad::add_scalar(ad::scale(ad::mul(mx, my), 2.0), c1), ad::add_scalar(ad::scale(sxy, 2.0), c2));
    auto den = ad::mul(ad::add_scalar(ad::add(ad::mul(mx, mx), ad::mul(my, my)), c1),
                       ad::add_scalar(ad::add(sxx, syy), c2));
    return ad::mean(ad::div(num, den));
}

VaeLoss vae_loss(const Tensor &x, const Tensor &recon, const Tensor &mu, const Tensor &logvar, const VAEConfig &cfg) {
    if (x.shape() != recon.shape()) throw std::invalid_argument("vae loss: reconstruction shape mismatch");
    auto pixel = ad::mean(ad::abs(ad::sub(x, recon)));
    auto ssim = ssim_tensor(x, recon, 1.0);
    // 0.5 * sum(mu^2 + e^lv - 1 - lv) / B
    auto kl_elems = ad::sub(ad::add_scalar(ad::add(ad::square(mu), ad::exp(logvar)), -1.0), logvar);
    auto kl = ad::scale(ad::sum(kl_elems), 0.5 / static_cast<double>(x.dim(0)));
    auto total = ad::add(ad::add(pixel, ad::scale(ad::add_scalar(ad::scale(ssim, -1.0), 1.0), cfg.ssim_weight)),
                         ad::scale(kl, cfg.kl_weight));
    return {total, pixel.item(), ssim.item(), kl.item()};
}

// ---------------------------------------------------------------------------
// UNet

Tensor timestep_embedding(std::span<const int> t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("timestep embedding dim must be even");
    const std::size_t half = static_cast<std::size_t>(dim / 2);
    std::vector<double> out(t.size() * static_cast<std::size_t>(dim));
    for (std::size_t b = 0; b < t.size(); ++b) {
        for (std::size_t k = 0; k < half; ++k) {
            const double f = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
            out[b * static_cast<std::size_t>(dim) + k] = std::sin(t[b] * f);
            out[b * static_cast<std::size_t>(dim) + half + k] = std::cos(t[b] * f);
        }
    }
    return Tensor::from_data({t.size(), static_cast<std::size_t>(dim)}, std::move(out));
}

UNet::UNet(const UNetConfig &cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const int b = cfg.base_channels;
    time_dim_ = 2 * b;
    time1_ = nn::Linear(b, time_dim_, rng);
    time2_ = nn::Linear(time_dim_, time_dim_, rng);
    if (cfg.n_classes > 0) label_ = nn::Linear(cfg.n_classes, b, rng, false);
    conv_in_ = nn::Conv2d(cfg.in_channels, b, 3, 1, rng);
    const auto extra = quantum_extra(cfg.quantum, cfg.quantum_cfg);

    std::vector<int> widths;
    int c = b, size = cfg.latent_size, downs = 0;
    for (int i = 0; i < cfg.n_ublocks; ++i) {
        const int w = downs >= 1 ? 2 * b : b;
        down_blocks_.emplace_back(c, w, time_dim_, extra, rng);
        widths.push_back(w);
        c = w;
        if (i % 2 == 1 && size >= 4 && size % 2 == 0) {
            downs_.emplace_back(nn::Downsample(c, c, rng));
            size /= 2;
            ++downs;
        } else {
            downs_.emplace_back(std::nullopt);
        }
    }
    for (int i = 0; i < cfg.n_mid_resblocks; ++i) {
        nn::BlockExtra e = extra;
        if (cfg.cdcnn_nodes > 0 && i == 0) {
            e.kind = nn::BlockExtra::Kind::Cdcnn;
            e.cdcnn_nodes = cfg.cdcnn_nodes;
        }
        mid_blocks_.emplace_back(c, c, time_dim_, e, rng);
    }
    for (int i = cfg.n_ublocks - 1; i >= 0; --i) {
        const auto ii = static_cast<std::size_t>(i);
        if (downs_[ii]) {
            ups_.emplace_back(nn::Upsample(c, c, rng));
        } else {
            ups_.emplace_back(std::nullopt);
        }
        up_blocks_.emplace_back(c + widths[ii], widths[ii], time_dim_, extra, rng);
        c = widths[ii];
    }
    out_norm_ = nn::GroupNorm(c);
    conv_out_ = nn::Conv2d(c, cfg.in_channels, 3, 1, rng);
}

Tensor UNet::forward(const Tensor &x, std::span<const int> t, std::span<const int> labels) const {
    require_image_batch(x, static_cast<std::size_t>(cfg_.in_channels), static_cast<std::size_t>(cfg_.latent_size),
                        "unet");
    const std::size_t B = x.dim(0);
    if (t.size() != B || labels.size() != B) throw std::invalid_argument("unet: t/labels length must match batch");

    auto temb = time2_.forward(ad::silu(time1_.forward(timestep_embedding(t, cfg_.base_channels))));
    auto h = conv_in_.forward(x);
    std::vector<Tensor> skips;
    for (std::size_t i = 0; i < down_blocks_.size(); ++i) {
        h = down_blocks_[i].forward(h, temb);
        if (i == 0 && cfg_.n_classes > 0) {
            std::vector<double> onehot(B * static_cast<std::size_t>(cfg_.n_classes), 0.0);
            for (std::size_t r = 0; r < B; ++r) {
                if (labels[r] < -1 || labels[r] >= cfg_.n_classes) {
                    throw std::invalid_argument("unet: label " + std::to_string(labels[r]) + " out of range");
                }
                if (labels[r] >= 0) onehot[r * static_cast<std::size_t>(cfg_.n_classes) + static_cast<std::size_t>(labels[r])] = 1.0;
            }
            h = ad::add_channel_bias(
                h, label_.forward(Tensor::from_data({B, static_cast<std::size_t>(cfg_.n_classes)}, std::move(onehot))));
        }
        skips.push_back(h);
        if (downs_[i]) h = downs_[i]->forward(h);
    }
    for (const auto &blk : mid_blocks_) h = blk.forward(h, temb);
    for (std::size_t j = 0; j < up_blocks_.size(); ++j) {
        const std::size_t i = down_blocks_.size() - 1 - j;
        if (ups_[j]) h = ups_[j]->forward(h);
        h = up_blocks_[j].forward(ad::concat_channels(h, skips[i]), temb);
    }
    return conv_out_.forward(ad::silu(out_norm_.forward(h)));
}

nn::NamedParams UNet::parameters() const {
    nn::NamedParams p;
    time1_.collect("time1", p);
    time2_.collect("time2", p);
    if (cfg_.n_classes > 0) label_.collect("label", p);
    conv_in_.collect("in", p);
    for (std::size_t i = 0; i < down_blocks_.size(); ++i) {
        down_blocks_[i].collect("down" + std::to_string(i), p);
        if (downs_[i]) downs_[i]->collect("down" + std::to_string(i) + ".sample", p);
    }
    for (std::size_t i = 0; i < mid_blocks_.size(); ++i) mid_blocks_[i].collect("mid" + std::to_string(i), p);
    for (std::size_t j = 0; j < up_blocks_.size(); ++j) {
        if (ups_[j]) ups_[j]->collect("up" + std::to_string(j) + ".sample", p);
        up_blocks_[j].collect("up" + std::to_string(j), p);
    }
    out_norm_.collect("out.norm", p);
    conv_out_.collect("out.conv", p);
    return p;
}

std::vector<nn::ResBlock *> UNet::all_blocks() {
    std::vector<nn::ResBlock *> v;
    for (auto &b : down_blocks_) v.push_back(&b);
    for (auto &b : mid_blocks_) v.push_back(&b);
    for (auto &b : up_blocks_) v.push_back(&b);
    return v;
}

std::vector<const nn::ResBlock *> UNet::all_blocks() const {
    std::vector<const nn::ResBlock *> v;
    for (const auto &b : down_blocks_) v.push_back(&b);
    for (const auto &b : mid_blocks_) v.push_back(&b);
    for (const auto &b : up_blocks_) v.push_back(&b);
    return v;
}

std::size_t UNet::quantum_parameter_count() const {
    std::size_t n = 0;
    for (const auto *b : all_blocks()) n += b->quantum_parameter_count();
    return n;
}

std::size_t UNet::quantum_layer_count() const {
    std::size_t n = 0;
    for (const auto *b : all_blocks()) n += b->quantum_layers().size();
    return n;
}

std::size_t UNet::cdcnn_parameter_count() const {
    std::size_t n = 0;
    for (const auto *b : all_blocks()) n += b->cdcnn_parameter_count();
    return n;
}

void UNet::set_shot_mode(const std::optional<nn::ShotMode> &mode) {
    std::uint64_t k = 0;
    for (auto *b : all_blocks()) {
        auto m = mode;
        if (m) m->seed = m->seed * 1000003 + (++k);
        b->set_shot_mode(m);
    }
}

} // namespace qlatent::models
