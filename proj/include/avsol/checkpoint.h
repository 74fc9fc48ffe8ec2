// Copyright 2026 The AVSOL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AVSOL_CHECKPOINT_H_
#define AVSOL_CHECKPOINT_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avsol/parameter.h"
#include "avsol/tensor.h"

namespace avsol {

// Parameter checkpoint ("AVWT" v1): magic, u16 version, u32 count, then per
// parameter a u16-prefixed name, u8 rank, u32 dims and f64 values.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::string EncodeCheckpoint(std::span<const Parameter* const> params);
std::vector<NamedArray> DecodeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const std::filesystem::path& path,
                    std::span<const Parameter* const> params);

// Copies checkpoint values into `params`. Names, order and shapes must match
// exactly; otherwise ValidationError and `params` is left untouched.
void LoadCheckpoint(const std::filesystem::path& path,
                    std::span<Parameter* const> params);
void AssignCheckpoint(const std::vector<NamedArray>& arrays,
                      std::span<Parameter* const> params);

}  // namespace avsol

#endif  // AVSOL_CHECKPOINT_H_
