// Copyright 2026 The dualsplat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dualsplat/optim.hpp"

#include <cmath>
#include <string>

#include "dualsplat/error.hpp"

namespace dualsplat {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamW::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!params_[k].has_grad()) continue;
    for (Real g : params_[k].grad()) {
      if (!std::isfinite(g)) {
        const std::string& name = params_[k].name();
        throw Error(ErrorCode::kNonFiniteGrad,
                    "parameter '" + (name.empty() ? "#" + std::to_string(k) : name) + "'");
      }
    }
  }
  ++step_;
  const Real bc1 = 1.0 - std::pow(config_.beta1, static_cast<Real>(step_));
  const Real bc2 = 1.0 - std::pow(config_.beta2, static_cast<Real>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k].mutable_values();
    const bool has = params_[k].has_grad();
    auto g = has ? params_[k].grad() : std::span<const Real>{};
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Real gi = has ? g[i] : 0.0;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const Real mhat = m[i] / bc1;
      const Real vhat = v[i] / bc2;
      w[i] -= config_.lr * config_.weight_decay * w[i];
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace dualsplat
