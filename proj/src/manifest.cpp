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

#include "qlatent/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qlatent::data {

namespace {

void write_manifest(const std::filesystem::path &dir, const std::vector<Entry> &entries) {
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / kManifestName).string());
    out << "filename,class_id,split\n";
    for (const auto &e : entries) out << e.filename << ',' << e.class_id << ',' << e.split << '\n';
}

} // namespace

void write_dataset(const std::filesystem::path &dir, const synth::Dataset &ds) {
    std::vector<Entry> entries;
    std::vector<img::Image> images;
    for (const auto &s : ds.samples) {
        entries.push_back({s.filename, s.class_id, synth::to_string(s.split)});
        images.push_back(s.image);
    }
    write_images(dir, entries, images);
}

void write_images(const std::filesystem::path &dir, const std::vector<Entry> &entries,
                  const std::vector<img::Image> &images) {
    if (entries.size() != images.size()) throw std::invalid_argument("write_images: entries and images differ");
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < entries.size(); ++i) img::write_ppm(dir / entries[i].filename, images[i]);
    write_manifest(dir, entries);
}

std::vector<Entry> read_manifest(const std::filesystem::path &dir) {
    const auto path = dir / kManifestName;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest not found: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "filename,class_id,split") {
        throw std::runtime_error(path.string() + ": expected header 'filename,class_id,split'");
    }
    std::vector<Entry> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        Entry e;
        std::string cls;
        if (!std::getline(ss, e.filename, ',') || !std::getline(ss, cls, ',') || !std::getline(ss, e.split)) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
        }
        const auto [p, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), e.class_id);
        if (ec != std::errc() || p != cls.data() + cls.size() || e.class_id < 0 || e.filename.empty() ||
            e.filename.find('/') != std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        out.push_back(std::move(e));
    }
    return out;
}

LoadedImages load_images(const std::filesystem::path &dir, const std::string &split) {
    LoadedImages out;
    for (auto &e : read_manifest(dir)) {
        if (!split.empty() && e.split != split) continue;
        out.images.push_back(img::read_ppm(dir / e.filename));
        out.entries.push_back(std::move(e));
    }
    return out;
}

std::vector<double> class_proportions(const std::vector<Entry> &entries, int n_classes) {
    std::vector<double> p(static_cast<std::size_t>(n_classes), 0.0);
    for (const auto &e : entries)
        if (e.class_id < n_classes) p[static_cast<std::size_t>(e.class_id)] += 1.0;
    for (auto &v : p) v /= entries.empty() ? 1.0 : static_cast<double>(entries.size());
    return p;
}

} // namespace qlatent::data
