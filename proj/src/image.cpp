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

#include "qlatent/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace qlatent::img {

namespace {

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Next whitespace-separated header token, skipping '#' comments.
std::string header_token(std::istream &in) {
    std::string tok;
    while (tok.empty()) {
        const int c = in.get();
        if (c == EOF) throw std::runtime_error("ppm: truncated header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while (in.peek() != EOF && !std::isspace(in.peek())) tok.push_back(static_cast<char>(in.get()));
        }
    }
    return tok;
}

} // namespace

void write_ppm(const std::filesystem::path &path, const Image &image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::size_t S = image.size;
    out << "P6\n" << S << " " << S << "\n255\n";
    std::vector<unsigned char> buf(3 * S * S);
    for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x)
            for (std::size_t c = 0; c < 3; ++c) buf[(y * S + x) * 3 + c] = to_byte(image.at(c, y, x));
    out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    if (header_token(in) != "P6") throw std::runtime_error(path.string() + ": not a binary PPM (P6)");
    std::size_t w = 0, h = 0;
    int maxval = 0;
    try {
        w = std::stoul(header_token(in));
        h = std::stoul(header_token(in));
        maxval = std::stoi(header_token(in));
    } catch (const std::logic_error &) {
        throw std::runtime_error(path.string() + ": malformed PPM header");
    }
    if (w != h || w == 0) throw std::runtime_error(path.string() + ": only square images are supported");
    if (maxval != 255) throw std::runtime_error(path.string() + ": only 8-bit PPM is supported");
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(3 * w * h);
    in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw std::runtime_error(path.string() + ": truncated pixel data");
    Image img(w);
    for (std::size_t y = 0; y < w; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = buf[(y * w + x) * 3 + c] / 255.0;
    return img;
}

Image quantize8(Image image) {
    for (auto &v : image.data) v = to_byte(v) / 255.0;
    return image;
}

ad::Tensor to_tensor(std::span<const Image> images) {
    if (images.empty()) throw std::invalid_argument("to_tensor: empty image list");
    const std::size_t S = images[0].size, per = 3 * S * S;
    std::vector<double> d;
    d.reserve(images.size() * per);
    for (const auto &im : images) {
        if (im.size != S) throw std::invalid_argument("to_tensor: images differ in size");
        d.insert(d.end(), im.data.begin(), im.data.end());
    }
    return ad::Tensor::from_data({images.size(), 3, S, S}, std::move(d));
}

std::vector<Image> from_tensor(const ad::Tensor &batch) {
    if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != batch.dim(3)) {
        throw std::invalid_argument("from_tensor: expected [B, 3, S, S]");
    }
    const std::size_t S = batch.dim(2), per = 3 * S * S;
    std::vector<Image> out;
    for (std::size_t b = 0; b < batch.dim(0); ++b) {
        Image im(S);
        std::copy_n(batch.data().begin() + static_cast<long>(b * per), per, im.data.begin());
        out.push_back(std::move(im));
    }
    return out;
}

} // namespace qlatent::img
