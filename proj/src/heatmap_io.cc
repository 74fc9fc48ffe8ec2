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

#include "avsol/heatmap_io.h"

#include <cmath>
#include <limits>

#include "avsol/binary_io.h"
#include "avsol/errors.h"

namespace avsol {

namespace {
constexpr std::string_view kMagic = "AVHM";
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string EncodeHeatmaps(std::span<const HeatmapRecord> records) {
  ByteWriter w;
  w.Magic(kMagic);
  w.U16(kVersion);
  w.U32(static_cast<std::uint32_t>(records.size()));
  for (const HeatmapRecord& r : records) {
    const Heatmap& h = r.heatmap;
    if (r.frame_index < 0 || r.frame_index > UINT32_MAX || h.width < 1 ||
        h.height < 1 || h.width > UINT16_MAX || h.height > UINT16_MAX ||
        h.values.size() != static_cast<std::size_t>(h.width) * h.height) {
      throw DataError("heatmap " + r.video_id + "#" +
                      std::to_string(r.frame_index) +
                      " cannot be encoded (index or size out of range)");
    }
    w.String16(r.video_id);
    w.U32(static_cast<std::uint32_t>(r.frame_index));
    w.U16(static_cast<std::uint16_t>(h.width));
    w.U16(static_cast<std::uint16_t>(h.height));
    for (double v : h.values) w.F32(static_cast<float>(v));
  }
  return w.bytes();
}

std::vector<HeatmapRecord> DecodeHeatmaps(std::string_view bytes) {
  ByteReader r(bytes, "heatmap file");
  r.ExpectMagic(kMagic);
  const std::uint16_t version = r.U16();
  if (version != kVersion) {
    throw ParseError("heatmap file: unsupported version " +
                     std::to_string(version));
  }
  const std::uint32_t count = r.U32();
  std::vector<HeatmapRecord> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    HeatmapRecord rec;
    rec.video_id = r.String16();
    rec.frame_index = r.U32();
    rec.heatmap.width = r.U16();
    rec.heatmap.height = r.U16();
    const std::size_t n =
        static_cast<std::size_t>(rec.heatmap.width) * rec.heatmap.height;
    if (n * sizeof(float) > bytes.size()) {
      throw ParseError("heatmap file: record " + std::to_string(i) +
                       " larger than the file");
    }
    rec.heatmap.values.resize(n);
    for (double& v : rec.heatmap.values) {
      v = r.F32();
      if (!std::isfinite(v)) {
        throw ParseError("heatmap file: non-finite value in " + rec.video_id +
                         "#" + std::to_string(rec.frame_index));
      }
    }
    out.push_back(std::move(rec));
  }
  r.ExpectEnd();
  return out;
}

void WriteHeatmapFile(const std::filesystem::path& path,
                      std::span<const HeatmapRecord> records) {
  WriteFile(path, EncodeHeatmaps(records));
}

std::vector<HeatmapRecord> ReadHeatmapFile(const std::filesystem::path& path) {
  return DecodeHeatmaps(ReadFile(path));
}

HeatmapSet ToHeatmapSet(std::span<const HeatmapRecord> records) {
  HeatmapSet set;
  for (const HeatmapRecord& r : records) {
    if (!set.emplace(HeatmapKey{r.video_id, r.frame_index}, r.heatmap).second) {
      throw DataError("duplicate heatmap for " + r.video_id + "#" +
                      std::to_string(r.frame_index));
    }
  }
  return set;
}

Heatmap QuantizeToFloat(Heatmap heatmap) {
  for (double& v : heatmap.values) v = static_cast<double>(static_cast<float>(v));
  return heatmap;
}

}  // namespace avsol
