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


#include "dualsplat/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int ch = is.get();
    if (ch == std::char_traits<char>::eof()) throw Error(ErrorCode::kIoError, "plane truncated");
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

}  // namespace

void write_ppm(std::ostream& os, const Image& rgb) {
  if (rgb.channels != 3) throw Error(ErrorCode::kShapeError, "PPM needs 3 channels");
  os << "P6\n" << rgb.width << " " << rgb.height << "\n255\n";
  for (Real x : rgb.data)
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0))));
  if (!os) throw Error(ErrorCode::kIoError, "PPM write failed");
}

Image read_ppm(std::istream& is) {
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::kIoError, "not an 8-bit P6 PPM");
  is.get();
  Image img(h, w, 3);
  for (auto& x : img.data) {
    const int ch = is.get();
    if (ch == std::char_traits<char>::eof()) throw Error(ErrorCode::kIoError, "PPM truncated");
    x = static_cast<unsigned char>(ch) / 255.0;
  }
  return img;
}

void write_plane(std::ostream& os, const Image& plane) {
  os.write("USPL", 4);
  put_u32(os, static_cast<std::uint32_t>(plane.height));
  put_u32(os, static_cast<std::uint32_t>(plane.width));
  put_u32(os, static_cast<std::uint32_t>(plane.channels));
  for (Real x : plane.data) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  if (!os) throw Error(ErrorCode::kIoError, "plane write failed");
}

Image read_plane(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "USPL") throw Error(ErrorCode::kIoError, "not a USPL plane");
  const auto h = get_u32(is), w = get_u32(is), c = get_u32(is);
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (auto& x : img.data) x = std::bit_cast<float>(get_u32(is));
  return img;
}

std::string mask_line(std::size_t view, std::span<const std::uint8_t> hidden) {
  std::string out = "v" + std::to_string(view) + ": ";
  for (auto m : hidden) out += m ? '1' : '0';
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace dualsplat
