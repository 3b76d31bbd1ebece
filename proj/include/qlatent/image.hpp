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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "qlatent/autodiff.hpp"

/**
 * @file image.hpp
 * RGB images stored channel-major ([3, S, S]) as doubles in [0, 1], binary
 * PPM (P6, 8-bit) I/O and batch conversion to tensors.
 */
namespace qlatent::img {

struct Image {
    std::size_t size = 0;       // square side
    std::vector<double> data;   // 3 * size * size, channel-major

    Image() = default;
    explicit Image(std::size_t s) : size(s), data(3 * s * s, 0.0) {}

    [[nodiscard]] double &at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * size + y) * size + x]; }
    [[nodiscard]] double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * size + y) * size + x];
    }
    friend bool operator==(const Image &, const Image &) = default;
};

/// Writes P6 with 8-bit channels (values rounded from [0, 1]).
void write_ppm(const std::filesystem::path &path, const Image &image);
/// Reads a square P6 image with maxval 255. Throws std::runtime_error on malformed files.
[[nodiscard]] Image read_ppm(const std::filesystem::path &path);

/// Rounds every channel to the 8-bit grid, as a PPM round trip would.
[[nodiscard]] Image quantize8(Image image);

/// [B, 3, S, S] tensor; all images must share one size.
[[nodiscard]] ad::Tensor to_tensor(std::span<const Image> images);
[[nodiscard]] std::vector<Image> from_tensor(const ad::Tensor &batch);

} // namespace qlatent::img
