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

#include "dualsplat/error.hpp"

namespace dualsplat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateRotation: return "DegenerateRotation";
    case ErrorCode::kFanOutMismatch: return "FanOutMismatch";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kNoForwardTape: return "NoForwardTape";
    case ErrorCode::kBadPatchGrid: return "BadPatchGrid";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFiniteGrad: return "NonFiniteGrad";
    case ErrorCode::kGraphError: return "GraphError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dualsplat
