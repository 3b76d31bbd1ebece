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

#include "qlatent/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qlatent::synth {

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kFundus{0.62, 0.26, 0.12};
constexpr Rgb kDisc{0.96, 0.82, 0.56};
constexpr Rgb kCup{1.0, 0.95, 0.82};
constexpr Rgb kVessel{0.36, 0.06, 0.04};
constexpr Rgb kLesion{0.97, 0.92, 0.62};

void blend(img::Image &im, std::size_t y, std::size_t x, const Rgb &c, double a) {
    for (std::size_t k = 0; k < 3; ++k) im.at(k, y, x) = (1 - a) * im.at(k, y, x) + a * c[k];
}

// Soft disc of radius r (pixels) centered at (cx, cy), edge width ~1 px.
void stamp(img::Image &im, double cx, double cy, double r, const Rgb &c, double alpha) {
    const auto S = static_cast<long>(im.size);
    const long x0 = std::max(0L, static_cast<long>(cx - r - 2)), x1 = std::min(S - 1, static_cast<long>(cx + r + 2));
    const long y0 = std::max(0L, static_cast<long>(cy - r - 2)), y1 = std::min(S - 1, static_cast<long>(cy + r + 2));
    for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) {
            const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
            const double cover = std::clamp(r + 0.5 - d, 0.0, 1.0);
            if (cover > 0) blend(im, static_cast<std::size_t>(y), static_cast<std::size_t>(x), c, alpha * cover);
        }
}

} // namespace

void FundusParams::validate() const {
    if (class_id < 0 || class_id > 2) throw std::invalid_argument("fundus: class_id must be 0, 1 or 2");
    if (image_size < 8) throw std::invalid_argument("fundus: image_size must be >= 8");
    if (!(fov_radius > 0 && fov_radius <= 0.5)) throw std::invalid_argument("fundus: fov_radius must be in (0, 0.5]");
    if (!(cup_radius_ratio > 0 && cup_radius_ratio < 1)) {
        throw std::invalid_argument("fundus: cup_radius_ratio must be in (0, 1)");
    }
    if (!(disc_radius > 0) || std::hypot(disc_x, disc_y) + disc_radius >= fov_radius) {
        throw std::invalid_argument("fundus: optic disc must lie inside the field of view");
    }
    if (vessel_walks < 0 || vessel_steps < 0 || !(vessel_step > 0) || !(vessel_width > 0)) {
        throw std::invalid_argument("fundus: invalid vessel parameters");
    }
    if (class_id == 2 ? !(haze_opacity >= 0.3 && haze_opacity <= 0.6) : haze_opacity != 0.0) {
        throw std::invalid_argument("fundus: haze_opacity must be in [0.3, 0.6] for class 2 and 0 otherwise");
    }
    if (class_id == 1 ? lesion_count < 1 : lesion_count != 0) {
        throw std::invalid_argument("fundus: lesions only (and at least one) for class 1");
    }
}

FundusParams sample_params(std::uint64_t seed, int class_id, int image_size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FundusParams p;
    p.seed = seed;
    p.class_id = class_id;
    p.image_size = image_size;
    const double side = u(rng) < 0.5 ? -1.0 : 1.0;
    p.disc_x = side * (0.12 + 0.08 * u(rng));
    p.disc_y = (u(rng) - 0.5) * 0.12;
    p.disc_radius = 0.06 + 0.03 * u(rng);
    p.cup_radius_ratio = 0.3 + 0.3 * u(rng);
    p.vessel_walks = 6 + static_cast<int>(u(rng) * 5);
    p.vessel_width = 0.008 + 0.008 * u(rng);
    if (class_id == 1) p.lesion_count = 4 + static_cast<int>(u(rng) * 6);
    if (class_id == 2) p.haze_opacity = 0.3 + 0.3 * u(rng);
    p.validate();
    return p;
}

img::Image generate_image(const FundusParams &p) {
    p.validate();
    const auto S = static_cast<std::size_t>(p.image_size);
    const double Sd = static_cast<double>(S), c0 = Sd / 2, R = p.fov_radius * Sd;
    img::Image im(S);
    // Shared geometry draws come from a stream independent of the class.
    std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;

    // Fundus background with vignetting; black outside the field of view.
    for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
            const double r = std::hypot(x + 0.5 - c0, y + 0.5 - c0) / R;
            const double inside = std::clamp((1.0 - r) * R + 0.5, 0.0, 1.0);
            const double shade = 1.0 - 0.4 * r * r;
            for (std::size_t k = 0; k < 3; ++k) im.at(k, y, x) = inside * shade * kFundus[k];
        }

    const double dx = c0 + p.disc_x * Sd, dy = c0 + p.disc_y * Sd, dr = p.disc_radius * Sd;

    // Vessels: random walks leaving the disc, drawn beneath it.
    for (int w = 0; w < p.vessel_walks; ++w) {
        double angle = 2 * std::numbers::pi * (w + u(rng)) / p.vessel_walks;
        double x = dx + 0.6 * dr * std::cos(angle), y = dy + 0.6 * dr * std::sin(angle);
        double width = p.vessel_width * Sd * (0.7 + 0.6 * u(rng));
        for (int s = 0; s < p.vessel_steps; ++s) {
            if (std::hypot(x - c0, y - c0) > R - 1) break;
            angle += 0.25 * g(rng);
            const double sx = p.vessel_step * Sd * std::cos(angle), sy = p.vessel_step * Sd * std::sin(angle);
            const double rad = std::max(0.4, width / 2);
            const int sub = std::max(1, static_cast<int>(std::ceil(p.vessel_step * Sd / rad)));
            for (int k = 0; k < sub; ++k) stamp(im, x + sx * k / sub, y + sy * k / sub, rad, kVessel, 0.6);
            x += sx;
            y += sy;
            width *= 0.985;
        }
    }

    stamp(im, dx, dy, dr, kDisc, 1.0);
    stamp(im, dx, dy, dr * p.cup_radius_ratio, kCup, 1.0);

    // Class-specific layers use their own stream so shared geometry matches.
    std::mt19937_64 crng(p.seed ^ 0xc1a55e5ULL);
    std::uniform_real_distribution<double> cu(0.0, 1.0);
    if (p.class_id == 1) {
        for (int l = 0; l < p.lesion_count; ++l) {
            const double rr = (R - 3) * std::sqrt(cu(crng)), th = 2 * std::numbers::pi * cu(crng);
            stamp(im, c0 + rr * std::cos(th), c0 + rr * std::sin(th), Sd * (0.015 + 0.015 * cu(crng)), kLesion, 0.9);
        }
    }
    if (p.class_id == 2) {
        // Smooth bright field from a few wide Gaussian bumps, alpha-blended everywhere.
        std::array<std::array<double, 3>, 4> bumps{};
        for (auto &b : bumps) b = {cu(crng) * Sd, cu(crng) * Sd, 0.3 * Sd + 0.3 * Sd * cu(crng)};
        for (std::size_t y = 0; y < S; ++y)
            for (std::size_t x = 0; x < S; ++x) {
                double f = 0.78;
                for (const auto &b : bumps) {
                    const double d2 = std::pow(x - b[0], 2) + std::pow(y - b[1], 2);
                    f += 0.04 * std::exp(-d2 / (2 * b[2] * b[2]));
                }
                blend(im, y, x, {f, f, 0.95 * f}, p.haze_opacity);
            }
    }
    for (auto &v : im.data) v = std::clamp(v, 0.0, 1.0);
    return im;
}

std::string to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string &s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + s + "'");
}

std::vector<const Sample *> Dataset::split(Split s) const {
    std::vector<const Sample *> out;
    for (const auto &x : samples)
        if (x.split == s) out.push_back(&x);
    return out;
}

std::vector<const Sample *> Dataset::split(Split s, int class_id) const {
    std::vector<const Sample *> out;
    for (const auto &x : samples)
        if (x.split == s && x.class_id == class_id) out.push_back(&x);
    return out;
}

Dataset generate_dataset(int n_per_class, std::uint64_t base_seed, int image_size) {
    if (n_per_class < 5) throw std::invalid_argument("dataset: n_per_class must be >= 5");
    Dataset ds;
    ds.image_size = image_size;
    const int n_val = n_per_class / 5, n_test = n_per_class / 5;
    for (int c = 0; c < 3; ++c) {
        std::vector<int> order(static_cast<std::size_t>(n_per_class));
        for (int i = 0; i < n_per_class; ++i) order[static_cast<std::size_t>(i)] = i;
        std::mt19937_64 perm(base_seed * 3 + static_cast<std::uint64_t>(c) + 1);
        std::shuffle(order.begin(), order.end(), perm);
        std::vector<Split> split_of(order.size(), Split::Train);
        for (int k = 0; k < n_val; ++k) split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = Split::Val;
        for (int k = n_val; k < n_val + n_test; ++k)
            split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = Split::Test;
        for (int i = 0; i < n_per_class; ++i) {
            std::seed_seq seq{base_seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)};
            std::array<std::uint64_t, 1> s{};
            seq.generate(s.begin(), s.end());
            Sample smp;
            smp.class_id = c;
            smp.seed = s[0];
            smp.split = split_of[static_cast<std::size_t>(i)];
            char name[32];
            std::snprintf(name, sizeof name, "c%d_%05d.ppm", c, i);
            smp.filename = name;
            smp.image = generate_image(sample_params(smp.seed, c, image_size));
            ds.samples.push_back(std::move(smp));
        }
    }
    return ds;
}

Dataset quarter_train(const Dataset &dataset, std::uint64_t seed) {
    Dataset out;
    out.image_size = dataset.image_size;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            const auto &s = dataset.samples[i];
            if (s.class_id == c && s.split == Split::Train) train.push_back(i);
        }
        std::mt19937_64 rng(seed * 7 + static_cast<std::uint64_t>(c));
        std::shuffle(train.begin(), train.end(), rng);
        train.resize(train.size() / 4);
        std::sort(train.begin(), train.end());
        for (auto i : train) out.samples.push_back(dataset.samples[i]);
    }
    for (const auto &s : dataset.samples)
        if (s.split != Split::Train) out.samples.push_back(s);
    return out;
}

} // namespace qlatent::synth
