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

/// @file plot.hpp
/// Minimal SVG line plots.
namespace qlatent::plot {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Figure {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

[[nodiscard]] std::string render_svg(const Figure &fig);
void write_svg(const std::filesystem::path &path, const Figure &fig);

} // namespace qlatent::plot
