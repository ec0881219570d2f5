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

// File formats for renders: binary PPM (P6) and USPL float planes
// ("USPL", u32 H, u32 W, u32 C, then f32 little-endian values).

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dualsplat/image.hpp"

namespace dualsplat {

// Values are clamped to [0, 1] and rounded to 8 bits. `rgb` must have 3 channels.
void write_ppm(std::ostream& os, const Image& rgb);
Image read_ppm(std::istream& is);

void write_plane(std::ostream& os, const Image& plane);
Image read_plane(std::istream& is);

// `v<idx>: <bitstring>` with 1 marking a hidden patch.
std::string mask_line(std::size_t view, std::span<const std::uint8_t> hidden);

void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace dualsplat
