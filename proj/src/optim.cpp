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

#include "qlatent/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace qlatent::optim {

void OptimizerConfig::validate() const {
    if (!(lr > 0)) throw std::invalid_argument("optimizer lr must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
        throw std::invalid_argument("optimizer betas must be in [0, 1)");
    }
    if (!(eps > 0)) throw std::invalid_argument("optimizer eps must be > 0");
    if (!(weight_decay >= 0)) throw std::invalid_argument("optimizer weight_decay must be >= 0");
}

Optimizer::Optimizer(const OptimizerConfig &cfg, nn::NamedParams params) : cfg_(cfg), params_(std::move(params)) {
    cfg.validate();
    for (const auto &[name, t] : params_) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Optimizer::zero_grad() {
    for (auto &[name, t] : params_) t.zero_grad();
}

void Optimizer::step() {
    for (const auto &[name, t] : params_) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) {
            if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in " + name + "; step rejected");
        }
    }
    if (step_ >= (std::uint64_t{1} << 31)) throw std::runtime_error("optimizer step count exhausted");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto &t = params_[i].second;
        auto p = t.mutable_data();
        const bool has = t.has_grad();
        auto &m = m_[i];
        auto &v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double g = has ? t.grad()[k] : 0.0;
            if (cfg_.kind == OptimizerKind::AdamW) p[k] -= cfg_.lr * cfg_.weight_decay * p[k];
            m[k] = cfg_.beta1 * m[k] + (1 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1 - cfg_.beta2) * g * g;
            p[k] -= cfg_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
        }
    }
}

void Optimizer::load_state(std::uint64_t step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
        throw std::invalid_argument("optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (m[i].size() != params_[i].second.numel() || v[i].size() != params_[i].second.numel()) {
            throw std::invalid_argument("optimizer moment shape mismatch for " + params_[i].first);
        }
    }
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace qlatent::optim
