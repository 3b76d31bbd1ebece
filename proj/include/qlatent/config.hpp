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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

/**
 * @file config.hpp
 * INI key/value configuration with command-line overrides. Every typed read
 * records the resolved value (explicit or default) so a run can echo the
 * exact settings it used. Malformed values and unknown keys raise
 * std::invalid_argument naming the key.
 */
namespace qlatent::cfg {

class Config {
  public:
    Config() = default;
    /// Parses an INI file; keys inside [section] become "section.key".
    static Config from_file(const std::filesystem::path &path);
    static Config from_string(const std::string &ini);

    /// Applies one "key=value" override.
    void set(const std::string &assignment);
    void set(const std::string &key, const std::string &value);
    [[nodiscard]] bool has(const std::string &key) const;

    [[nodiscard]] std::string get_string(const std::string &key, const std::string &fallback);
    /// Required key; throws if absent.
    [[nodiscard]] std::string require_string(const std::string &key);
    [[nodiscard]] long long get_int(const std::string &key, long long fallback, long long lo, long long hi);
    [[nodiscard]] double get_double(const std::string &key, double fallback, double lo, double hi);
    [[nodiscard]] bool get_bool(const std::string &key, bool fallback);
    /// Comma-separated list; empty string gives an empty list.
    [[nodiscard]] std::vector<std::string> get_list(const std::string &key, const std::string &fallback);
    [[nodiscard]] std::vector<double> get_doubles(const std::string &key, const std::string &fallback, double lo,
                                                  double hi);
    /// "a..b" or "a..b:step", or a comma list.
    [[nodiscard]] std::vector<int> get_int_range(const std::string &key, const std::string &fallback, int lo,
                                                 int hi);

    /// Throws for any supplied key no getter has read.
    void reject_unused() const;
    /// Resolved settings as INI text, sorted by key.
    [[nodiscard]] std::string resolved_ini() const;

  private:
    [[nodiscard]] std::string raw(const std::string &key, const std::string &fallback);

    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> resolved_;
    std::set<std::string> used_;
};

} // namespace qlatent::cfg
