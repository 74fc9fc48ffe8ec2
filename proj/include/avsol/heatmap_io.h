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

#ifndef AVSOL_HEATMAP_IO_H_
#define AVSOL_HEATMAP_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avsol/metrics.h"

namespace avsol {

// "AVHM" v1, little-endian: magic, u16 version, u32 frame count, then per
// frame a u16-prefixed video id, u32 frame index, u16 width, u16 height and
// width*height f32 values, row-major.
struct HeatmapRecord {
  std::string video_id;
  std::int64_t frame_index = 0;
  Heatmap heatmap;
};

std::string EncodeHeatmaps(std::span<const HeatmapRecord> records);
std::vector<HeatmapRecord> DecodeHeatmaps(std::string_view bytes);

void WriteHeatmapFile(const std::filesystem::path& path,
                      std::span<const HeatmapRecord> records);
std::vector<HeatmapRecord> ReadHeatmapFile(const std::filesystem::path& path);

// Keyed view; duplicate (video_id, frame_index) is a DataError.
HeatmapSet ToHeatmapSet(std::span<const HeatmapRecord> records);

// Rounds every value through float32, the precision of the file format.
Heatmap QuantizeToFloat(Heatmap heatmap);

}  // namespace avsol

#endif  // AVSOL_HEATMAP_IO_H_
