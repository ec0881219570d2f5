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

#pragma once

#include <cstdint>
#include <vector>

#include "dualsplat/autodiff.hpp"

namespace dualsplat {

struct AdamWConfig {
  Real lr = 1e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 0.01;
};

// Decoupled-weight-decay Adam with bias correction. Moments are kept per
// registered parameter, in registration order.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config = {});

  // Applies one update from the accumulated gradients. Throws
  // Error(kNonFiniteGrad) naming the first parameter with a non-finite
  // gradient; no parameter is modified in that case.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  void set_lr(Real lr) { config_.lr = lr; }

  const std::vector<std::vector<Real>>& first_moments() const { return m_; }
  const std::vector<std::vector<Real>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig config_;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
  std::int64_t step_ = 0;
};

}  // namespace dualsplat
