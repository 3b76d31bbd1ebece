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

// qlatent <command> --config <path> [--set key=value ...] --out <dir>
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlatent/commands.hpp"

namespace {

struct Args {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum-enhanced latent diffusion experiments"};
    app.require_subcommand(1);
    std::vector<Args> args(qlatent::cmd::commands().size());
    std::vector<CLI::App *> subs;
    for (std::size_t i = 0; i < qlatent::cmd::commands().size(); ++i) {
        const auto &info = qlatent::cmd::commands()[i];
        auto *sub = app.add_subcommand(info.name, info.help);
        sub->add_option("--config", args[i].config, "INI settings file")->check(CLI::ExistingFile);
        sub->add_option("--set", args[i].sets, "override, key=value (repeatable)");
        sub->add_option("--out", args[i].out, "output directory")->required();
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 1;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        const auto &name = qlatent::cmd::commands()[i].name;
        try {
            auto config = args[i].config.empty() ? qlatent::cfg::Config()
                                                 : qlatent::cfg::Config::from_file(args[i].config);
            for (const auto &s : args[i].sets) config.set(s);
            const auto summary = qlatent::cmd::run(name, config, args[i].out);
            for (const auto &[k, v] : summary) std::cout << k << " = " << v << '\n';
            return 0;
        } catch (const std::invalid_argument &e) {
            std::cerr << "qlatent " << name << ": invalid configuration: " << e.what() << '\n';
            return 1;
        } catch (const std::exception &e) {
            std::cerr << "qlatent " << name << ": " << e.what() << '\n';
            return 2;
        }
    }
    return 1;
}
