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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dualsplat/error.hpp"
#include "dualsplat/optim.hpp"

namespace dualsplat {
namespace {

TEST(AdamW, ZeroGradZeroDecayLeavesParameter) {
  Tensor p({1, 3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  AdamW opt({p}, {.lr = 1e-2, .weight_decay = 0.0});
  opt.step();
  EXPECT_EQ(p.values()[0], 1.0);
  EXPECT_EQ(p.values()[1], -2.0);
  EXPECT_EQ(p.values()[2], 0.5);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Tensor p({1, 3}, {1.0, -2.0, 0.5}, true);
  const std::vector<Real> g{0.3, -7.0, 1e-3};
  std::copy(g.begin(), g.end(), p.mutable_grad().begin());
  AdamW opt({p}, {.lr = 1e-4, .weight_decay = 0.0});
  opt.step();
  // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
  EXPECT_NEAR(p.values()[0], 1.0 - 1e-4, 1e-9);
  EXPECT_NEAR(p.values()[1], -2.0 + 1e-4, 1e-9);
  EXPECT_NEAR(p.values()[2], 0.5 - 1e-4, 1e-9);
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(AdamW, DecayOnly) {
  Tensor p({1, 2}, {2.0, -4.0}, true);
  p.zero_grad();
  AdamW opt({p}, {.lr = 0.1, .weight_decay = 0.5});
  opt.step();
  EXPECT_DOUBLE_EQ(p.values()[0], 2.0 * (1.0 - 0.1 * 0.5));
  EXPECT_DOUBLE_EQ(p.values()[1], -4.0 * (1.0 - 0.1 * 0.5));
}

TEST(AdamW, ZeroLearningRateIsIdentity) {
  Tensor p({2, 2}, {1, 2, 3, 4}, true);
  for (auto& g : p.mutable_grad()) g = 0.7;
  AdamW opt({p}, {.lr = 0.0});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_EQ(std::vector<Real>(p.values().begin(), p.values().end()),
            (std::vector<Real>{1, 2, 3, 4}));
}

TEST(AdamW, NonFiniteGradientNamesParameter) {
  Tensor a({1, 1}, {1.0}, true);
  Tensor b({1, 2}, {1.0, 2.0}, true);
  b.set_name("decoder.w");
  a.mutable_grad()[0] = 0.5;
  b.mutable_grad()[1] = std::numeric_limits<Real>::quiet_NaN();
  AdamW opt({a, b});
  try {
    opt.step();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteGrad);
    EXPECT_NE(std::string(e.what()).find("decoder.w"), std::string::npos);
  }
  EXPECT_EQ(a.values()[0], 1.0);
}

TEST(AdamW, DefaultsFollowConfiguredBaseRate) {
  const AdamWConfig c;
  EXPECT_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.beta1, 0.9);
  EXPECT_EQ(c.beta2, 0.999);
  EXPECT_EQ(c.eps, 1e-8);
  EXPECT_EQ(c.weight_decay, 0.01);
}

}  // namespace
}  // namespace dualsplat
