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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qlatent/config.hpp"

/**
 * @file commands.hpp
 * Experiment commands behind the qlatent CLI. Each command reads and
 * validates all of its settings before doing any work, writes only inside
 * `out`, and leaves:
 *
 *   config.resolved.ini  every setting with its resolved value
 *   run.log              deterministic summary lines ("key = value")
 *   timing.txt           wall-clock seconds (kept apart so reruns match)
 *
 * Validation failures throw std::invalid_argument; missing inputs and
 * runtime failures throw std::runtime_error.
 */
namespace qlatent::cmd {

/// Summary values also written to run.log.
using Summary = std::map<std::string, double>;

using CommandFn = std::function<Summary(cfg::Config &, const std::filesystem::path &out)>;

struct CommandInfo {
    std::string name;
    std::string help;
    CommandFn fn;
};

[[nodiscard]] const std::vector<CommandInfo> &commands();

/// Runs a command by name, creating `out` and writing the run files.
Summary run(const std::string &name, cfg::Config &config, const std::filesystem::path &out);

// Individual commands (also reachable through run()).
Summary ansatz_bench(cfg::Config &c, const std::filesystem::path &out);
Summary make_dataset(cfg::Config &c, const std::filesystem::path &out);
Summary train_vae(cfg::Config &c, const std::filesystem::path &out);
Summary train_ddpm(cfg::Config &c, const std::filesystem::path &out);
Summary sample(cfg::Config &c, const std::filesystem::path &out);
Summary evaluate(cfg::Config &c, const std::filesystem::path &out);
Summary compare_models(cfg::Config &c, const std::filesystem::path &out);

/// Directory name used by `sample` for one readout-noise level.
[[nodiscard]] std::string alpha_dir_name(double alpha);

} // namespace qlatent::cmd
