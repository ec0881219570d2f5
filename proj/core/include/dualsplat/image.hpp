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
#include <span>
#include <vector>

#include "dualsplat/autodiff.hpp"

namespace dualsplat {

struct ImageSize {
  int width = 0;
  int height = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  bool operator==(const ImageSize&) const = default;
};

// Dense H x W x C plane, row-major with channels innermost.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<Real> data;

  Image() = default;
  Image(int h, int w, int c, Real fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  ImageSize size() const { return {width, height}; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }

  Real& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  Real at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::span<const Real> pixel(std::size_t index) const {
    return {data.data() + index * channels, static_cast<std::size_t>(channels)};
  }
};

}  // namespace dualsplat
