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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

using namespace qlatent;

namespace {

double pixel_stddev(const img::Image &im) {
    double m = 0;
    for (double v : im.data) m += v;
    m /= static_cast<double>(im.data.size());
    double s = 0;
    for (double v : im.data) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(im.data.size()));
}

} // namespace

TEST(generate_image, deterministic_per_seed) {
    for (int c = 0; c < 3; ++c) {
        const auto p = synth::sample_params(123, c, 64);
        EXPECT_EQ(synth::generate_image(p), synth::generate_image(p));
    }
}

TEST(generate_image, pixels_in_unit_range) {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        for (int c = 0; c < 3; ++c)
            for (double v : synth::generate_image(synth::sample_params(seed, c, 48)).data) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
}

TEST(generate_image, haze_lowers_contrast) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto healthy = synth::generate_image(synth::sample_params(seed, 0, 64));
        const auto hazy = synth::generate_image(synth::sample_params(seed, 2, 64));
        EXPECT_LT(pixel_stddev(hazy), pixel_stddev(healthy)) << "seed " << seed;
    }
}

TEST(generate_image, distinct_seeds_differ) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = synth::generate_image(synth::sample_params(seed, 0, 64));
        const auto b = synth::generate_image(synth::sample_params(seed + 1000, 0, 64));
        std::size_t diff = 0;
        for (std::size_t i = 0; i < a.data.size(); ++i) diff += a.data[i] != b.data[i];
        EXPECT_GT(static_cast<double>(diff) / static_cast<double>(a.data.size()), 0.01);
    }
}

TEST(generate_image, lesions_only_in_class_one) {
    auto p = synth::sample_params(5, 1, 64);
    EXPECT_GE(p.lesion_count, 1);
    EXPECT_EQ(synth::sample_params(5, 0, 64).lesion_count, 0);
    const auto h = synth::sample_params(5, 2, 64).haze_opacity;
    EXPECT_GE(h, 0.3);
    EXPECT_LE(h, 0.6);
}

TEST(generate_image, degenerate_geometry_rejected) {
    auto p = synth::sample_params(1, 0, 64);
    p.cup_radius_ratio = 1.0;
    EXPECT_THROW((void)synth::generate_image(p), std::invalid_argument);
    p = synth::sample_params(1, 0, 64);
    p.disc_x = 0.45;
    EXPECT_THROW((void)synth::generate_image(p), std::invalid_argument);
    p = synth::sample_params(1, 0, 64);
    p.haze_opacity = 0.5;
    EXPECT_THROW((void)synth::generate_image(p), std::invalid_argument);
    EXPECT_THROW((void)synth::sample_params(1, 3, 64), std::invalid_argument);
    EXPECT_THROW((void)synth::sample_params(1, 0, 4), std::invalid_argument);
}

TEST(dataset, split_sizes) {
    const auto ds = synth::generate_dataset(100, 7, 16);
    EXPECT_EQ(ds.split(synth::Split::Train).size(), 180u);
    EXPECT_EQ(ds.split(synth::Split::Val).size(), 60u);
    EXPECT_EQ(ds.split(synth::Split::Test).size(), 60u);
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(ds.split(synth::Split::Train, c).size(), 60u);
        EXPECT_EQ(ds.split(synth::Split::Val, c).size(), 20u);
        EXPECT_EQ(ds.split(synth::Split::Test, c).size(), 20u);
    }
}

TEST(dataset, remainder_goes_to_train) {
    for (int n : {5, 7, 9, 13, 24}) {
        const auto ds = synth::generate_dataset(n, 1, 8);
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(ds.split(synth::Split::Val, c).size(), static_cast<std::size_t>(n / 5));
            EXPECT_EQ(ds.split(synth::Split::Test, c).size(), static_cast<std::size_t>(n / 5));
            EXPECT_EQ(ds.split(synth::Split::Train, c).size(), static_cast<std::size_t>(n - 2 * (n / 5)));
        }
    }
    EXPECT_THROW((void)synth::generate_dataset(4, 1, 8), std::invalid_argument);
}

TEST(dataset, quarter_mode) {
    const auto ds = synth::quarter_train(synth::generate_dataset(100, 7, 8), 3);
    EXPECT_EQ(ds.split(synth::Split::Train).size(), 45u);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(ds.split(synth::Split::Train, c).size(), 15u);
    EXPECT_EQ(ds.split(synth::Split::Val).size(), 60u);
    EXPECT_EQ(ds.split(synth::Split::Test).size(), 60u);
}

TEST(dataset, splits_disjoint_and_deterministic) {
    const auto a = synth::generate_dataset(20, 9, 8);
    const auto b = synth::generate_dataset(20, 9, 8);
    std::set<std::string> names;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        EXPECT_TRUE(names.insert(a.samples[i].filename).second);
        EXPECT_EQ(a.samples[i].split, b.samples[i].split);
        EXPECT_EQ(a.samples[i].image, b.samples[i].image);
    }
    EXPECT_EQ(names.size(), 60u);
}

TEST(ppm, round_trip) {
    const auto dir = std::filesystem::temp_directory_path() / "qlatent_ppm_test";
    std::filesystem::create_directories(dir);
    const auto im = img::quantize8(synth::generate_image(synth::sample_params(3, 1, 32)));
    img::write_ppm(dir / "a.ppm", im);
    EXPECT_EQ(img::read_ppm(dir / "a.ppm"), im);
    {
        std::ofstream bad(dir / "bad.ppm");
        bad << "P3\n2 2\n255\n";
    }
    EXPECT_THROW((void)img::read_ppm(dir / "bad.ppm"), std::runtime_error);
    {
        std::ofstream trunc(dir / "trunc.ppm", std::ios::binary);
        trunc << "P6\n4 4\n255\n" << "abc";
    }
    EXPECT_THROW((void)img::read_ppm(dir / "trunc.ppm"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(image, tensor_round_trip) {
    std::vector<img::Image> ims{synth::generate_image(synth::sample_params(1, 0, 16)),
                                synth::generate_image(synth::sample_params(2, 2, 16))};
    const auto t = img::to_tensor(ims);
    EXPECT_EQ(t.shape(), (ad::Shape{2, 3, 16, 16}));
    EXPECT_EQ(img::from_tensor(t), ims);
}
