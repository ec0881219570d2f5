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

// Finite-difference checks over every differentiable stage: rasterizer,
// bilinear sampler, each loss, and a micro-config network.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualsplat/grad_check.hpp"

namespace dualsplat {

struct GradCheckCase {
  std::string name;
  Real tolerance = 0.0;
  GradCheckResult result;
  std::string worst_param;
  bool passed() const { return result.max_rel_error <= tolerance; }
};

GradCheckCase gradcheck_rasterizer(std::uint64_t seed);
GradCheckCase gradcheck_bilinear(std::uint64_t seed);
GradCheckCase gradcheck_ssim(std::uint64_t seed);
GradCheckCase gradcheck_loss_rgb(std::uint64_t seed);
GradCheckCase gradcheck_loss_sem(std::uint64_t seed);
GradCheckCase gradcheck_loss_geo(std::uint64_t seed);
GradCheckCase gradcheck_loss_recalib(std::uint64_t seed);
GradCheckCase gradcheck_network_micro(std::uint64_t seed);

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed = 0);

// One JSON object per case.
void write_gradcheck_jsonl(std::ostream& os, const GradCheckCase& c);

}  // namespace dualsplat
