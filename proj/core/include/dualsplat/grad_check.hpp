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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dualsplat/autodiff.hpp"

namespace dualsplat {

struct GradCheckResult {
  Real max_rel_error = 0.0;
  // Offending location: parameter position in the input list and flat index.
  std::size_t param = 0;
  std::size_t index = 0;
  Real analytic = 0.0;
  Real numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  Real step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // near-zero gradients from dominating.
  Real floor = 1e-6;
  // Coordinates per parameter to probe; 0 means all.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

// Compares tape gradients of the scalar `f` against central differences over
// every coordinate of `params`. `f` must rebuild its graph on every call and
// be deterministic.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           const GradCheckOptions& options = {});

// Same comparison with externally supplied analytic gradients (one vector
// per parameter), used for kernels that are not tape ops.
GradCheckResult grad_check_external(const std::function<Real()>& f, std::vector<Tensor> params,
                                    const std::vector<std::vector<Real>>& analytic,
                                    const GradCheckOptions& options = {});

}  // namespace dualsplat
