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
#include <vector>

#include "qlatent/nn.hpp"

/**
 * @file optim.hpp
 * Adam and AdamW with bias correction.
 */
namespace qlatent::optim {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // AdamW only

    void validate() const;
};

class Optimizer {
  public:
    Optimizer(const OptimizerConfig &cfg, nn::NamedParams params);

    /**
     * One update from the current gradients (missing gradients count as
     * zero). Throws std::runtime_error before touching any parameter if a
     * gradient is non-finite.
     */
    void step();
    void zero_grad();

    [[nodiscard]] const OptimizerConfig &config() const noexcept { return cfg_; }
    [[nodiscard]] const nn::NamedParams &params() const noexcept { return params_; }
    [[nodiscard]] std::uint64_t step_count() const noexcept { return step_; }

    // State access for checkpoints.
    [[nodiscard]] const std::vector<std::vector<double>> &first_moments() const noexcept { return m_; }
    [[nodiscard]] const std::vector<std::vector<double>> &second_moments() const noexcept { return v_; }
    /// Restores moments and step count; shapes must match the parameters.
    void load_state(std::uint64_t step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

  private:
    OptimizerConfig cfg_;
    nn::NamedParams params_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t step_ = 0;
};

} // namespace qlatent::optim
