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

#include "avsol/checkpoint.h"

#include <algorithm>
#include <limits>

#include "avsol/binary_io.h"
#include "avsol/errors.h"

namespace avsol {

namespace {
constexpr std::string_view kMagic = "AVWT";
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string EncodeCheckpoint(std::span<const Parameter* const> params) {
  ByteWriter w;
  w.Magic(kMagic);
  w.U16(kVersion);
  w.U32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.String16(p->name);
    const Shape& shape = p->value.shape();
    w.U8(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) w.U32(static_cast<std::uint32_t>(d));
    for (double v : p->value.data()) w.F64(v);
  }
  return w.bytes();
}

std::vector<NamedArray> DecodeCheckpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  r.ExpectMagic(kMagic);
  const std::uint16_t version = r.U16();
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " +
                     std::to_string(version));
  }
  const std::uint32_t count = r.U32();
  std::vector<NamedArray> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.String16();
    const std::uint8_t rank = r.U8();
    for (std::uint8_t k = 0; k < rank; ++k) a.shape.push_back(r.U32());
    const std::size_t n = NumElements(a.shape);
    if (n > bytes.size() / sizeof(double)) {
      throw ParseError("checkpoint: parameter '" + a.name +
                       "' larger than the file");
    }
    a.values.resize(n);
    for (double& v : a.values) v = r.F64();
    out.push_back(std::move(a));
  }
  r.ExpectEnd();
  return out;
}

void SaveCheckpoint(const std::filesystem::path& path,
                    std::span<const Parameter* const> params) {
  WriteFile(path, EncodeCheckpoint(params));
}

void AssignCheckpoint(const std::vector<NamedArray>& arrays,
                      std::span<Parameter* const> params) {
  if (arrays.size() != params.size()) {
    throw ValidationError("checkpoint has " + std::to_string(arrays.size()) +
                          " parameters, model expects " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (arrays[i].name != params[i]->name) {
      throw ValidationError("checkpoint parameter " + std::to_string(i) +
                            " is '" + arrays[i].name + "', model expects '" +
                            params[i]->name + "'");
    }
    if (arrays[i].shape != params[i]->value.shape()) {
      throw ValidationError("checkpoint parameter '" + arrays[i].name +
                            "' has shape " + ShapeToString(arrays[i].shape) +
                            ", model expects " +
                            ShapeToString(params[i]->value.shape()));
    }
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    auto dst = params[i]->value.mutable_data();
    std::copy(arrays[i].values.begin(), arrays[i].values.end(), dst.begin());
  }
}

void LoadCheckpoint(const std::filesystem::path& path,
                    std::span<Parameter* const> params) {
  AssignCheckpoint(DecodeCheckpoint(ReadFile(path)), params);
}

}  // namespace avsol
