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

#include <filesystem>
#include <string>
#include <vector>

#include "qlatent/image.hpp"
#include "qlatent/synthetic.hpp"

/**
 * @file manifest.hpp
 * Image directories described by manifest.csv with the header
 * "filename,class_id,split". Filenames are relative to the directory.
 */
namespace qlatent::data {

inline constexpr const char *kManifestName = "manifest.csv";

struct Entry {
    std::string filename;
    int class_id = 0;
    std::string split;
};

/// Writes every sample as PPM plus the manifest.
void write_dataset(const std::filesystem::path &dir, const synth::Dataset &ds);
/// Writes images with the given entries (same length) plus the manifest.
void write_images(const std::filesystem::path &dir, const std::vector<Entry> &entries,
                  const std::vector<img::Image> &images);

/// Throws std::runtime_error if the manifest is missing or malformed.
[[nodiscard]] std::vector<Entry> read_manifest(const std::filesystem::path &dir);

struct LoadedImages {
    std::vector<Entry> entries;
    std::vector<img::Image> images;
};

/// Loads the images of `split` ("" for all), in manifest order.
[[nodiscard]] LoadedImages load_images(const std::filesystem::path &dir, const std::string &split = "");

/// Per-class fraction of entries, indexed by class id.
[[nodiscard]] std::vector<double> class_proportions(const std::vector<Entry> &entries, int n_classes);

} // namespace qlatent::data
