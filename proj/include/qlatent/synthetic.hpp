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
#include <string>
#include <vector>

#include "qlatent/image.hpp"

/**
 * @file synthetic.hpp
 * Deterministic retina-like images in three classes: 0 healthy, 1 with
 * bright lesions, 2 hazy. Geometry is shared across classes for one seed;
 * class-specific draws happen last.
 */
namespace qlatent::synth {

struct FundusParams {
    std::uint64_t seed = 0;
    int class_id = 0;
    int image_size = 64;
    // Fractions of the image size, relative to the image center.
    double fov_radius = 0.46;
    double disc_x = 0.0, disc_y = 0.0;
    double disc_radius = 0.08;
    double cup_radius_ratio = 0.4;
    int vessel_walks = 8;
    int vessel_steps = 40;
    double vessel_step = 0.015;
    double vessel_width = 0.012;
    double haze_opacity = 0.0;  // class 2 only, in [0.3, 0.6]
    int lesion_count = 0;       // class 1 only

    /// Throws std::invalid_argument on degenerate geometry.
    void validate() const;
};

/// Draws all geometry from `seed`, then the class-specific extras.
[[nodiscard]] FundusParams sample_params(std::uint64_t seed, int class_id, int image_size);

[[nodiscard]] img::Image generate_image(const FundusParams &params);

enum class Split { Train, Val, Test };
[[nodiscard]] std::string to_string(Split s);
[[nodiscard]] Split parse_split(const std::string &s);

struct Sample {
    std::string filename;
    int class_id = 0;
    Split split = Split::Train;
    std::uint64_t seed = 0;
    img::Image image;
};

struct Dataset {
    int image_size = 0;
    std::vector<Sample> samples;

    [[nodiscard]] std::vector<const Sample *> split(Split s) const;
    [[nodiscard]] std::vector<const Sample *> split(Split s, int class_id) const;
};

/**
 * n_per_class images of each class. Per class, floor(20%) go to val and to
 * test and the remainder to train; assignment is a seeded permutation.
 */
[[nodiscard]] Dataset generate_dataset(int n_per_class, std::uint64_t base_seed, int image_size);

/// Keeps a seeded quarter (floor) of each class's training samples; val/test untouched.
[[nodiscard]] Dataset quarter_train(const Dataset &dataset, std::uint64_t seed);

} // namespace qlatent::synth
