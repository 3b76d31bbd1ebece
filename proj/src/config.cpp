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

#include "qlatent/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>

namespace qlatent::cfg {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string &key, const std::string &what, const std::string &value) {
    throw std::invalid_argument("config key '" + key + "': " + what + ", got '" + value + "'");
}

long long parse_int(const std::string &key, const std::string &s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, "expected an integer", s);
    return v;
}

double parse_double(const std::string &key, const std::string &s) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(key, "expected a finite number", s);
    return v;
}

void flatten(const boost::property_tree::ptree &tree, const std::string &prefix, std::map<std::string, std::string> &out) {
    for (const auto &[k, child] : tree) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (child.empty()) {
            out[key] = trim(child.data());
        } else {
            flatten(child, key, out);
        }
    }
}

} // namespace

Config Config::from_file(const std::filesystem::path &path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error &e) {
        throw std::invalid_argument("config file " + path.string() + ": " + e.message() + " (line " +
                                    std::to_string(e.line()) + ")");
    }
    Config c;
    flatten(tree, "", c.values_);
    return c;
}

Config Config::from_string(const std::string &ini) {
    std::istringstream in(ini);
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error &e) {
        throw std::invalid_argument("config text: " + e.message());
    }
    Config c;
    flatten(tree, "", c.values_);
    return c;
}

void Config::set(const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("override '" + assignment + "' must look like key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string &key, const std::string &value) { values_[key] = value; }

bool Config::has(const std::string &key) const { return values_.count(key) != 0; }

std::string Config::raw(const std::string &key, const std::string &fallback) {
    used_.insert(key);
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    resolved_[key] = v;
    return v;
}

std::string Config::get_string(const std::string &key, const std::string &fallback) { return raw(key, fallback); }

std::string Config::require_string(const std::string &key) {
    if (!has(key)) throw std::invalid_argument("config key '" + key + "' is required");
    return raw(key, "");
}

long long Config::get_int(const std::string &key, long long fallback, long long lo, long long hi) {
    const auto s = raw(key, std::to_string(fallback));
    const long long v = parse_int(key, s);
    if (v < lo || v > hi) bad(key, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", s);
    return v;
}

double Config::get_double(const std::string &key, double fallback, double lo, double hi) {
    std::ostringstream def;
    def << fallback;
    const auto s = raw(key, def.str());
    const double v = parse_double(key, s);
    if (v < lo || v > hi) {
        std::ostringstream range;
        range << "expected a number in [" << lo << ", " << hi << "]";
        bad(key, range.str(), s);
    }
    return v;
}

bool Config::get_bool(const std::string &key, bool fallback) {
    auto s = raw(key, fallback ? "true" : "false");
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(key, "expected a boolean", s);
}

std::vector<std::string> Config::get_list(const std::string &key, const std::string &fallback) {
    const auto s = raw(key, fallback);
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad(key, "empty list element", s);
        out.push_back(item);
    }
    return out;
}

std::vector<double> Config::get_doubles(const std::string &key, const std::string &fallback, double lo, double hi) {
    std::vector<double> out;
    for (const auto &item : get_list(key, fallback)) {
        const double v = parse_double(key, item);
        if (v < lo || v > hi) bad(key, "list value out of range", item);
        out.push_back(v);
    }
    return out;
}

std::vector<int> Config::get_int_range(const std::string &key, const std::string &fallback, int lo, int hi) {
    const auto s = raw(key, fallback);
    std::vector<int> out;
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        const auto colon = s.find(':', dots);
        const long long a = parse_int(key, trim(s.substr(0, dots)));
        const long long b = parse_int(key, trim(s.substr(dots + 2, colon == std::string::npos ? std::string::npos
                                                                                              : colon - dots - 2)));
        const long long step = colon == std::string::npos ? 1 : parse_int(key, trim(s.substr(colon + 1)));
        if (step < 1 || b < a) bad(key, "expected a..b[:step] with a <= b and step >= 1", s);
        for (long long v = a; v <= b; v += step) out.push_back(static_cast<int>(v));
    } else {
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
    }
    if (out.empty()) bad(key, "expected at least one value", s);
    for (int v : out)
        if (v < lo || v > hi) bad(key, "values must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", s);
    return out;
}

void Config::reject_unused() const {
    for (const auto &[k, v] : values_) {
        if (!used_.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
    }
}

std::string Config::resolved_ini() const {
    std::string out;
    for (const auto &[k, v] : resolved_) out += k + " = " + v + "\n";
    return out;
}

} // namespace qlatent::cfg
