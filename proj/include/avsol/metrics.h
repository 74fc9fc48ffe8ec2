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

#ifndef AVSOL_METRICS_H_
#define AVSOL_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avsol/annotation.h"

namespace avsol {

// Row-major grid of localization scores; values[y * width + x].
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[y * width + x]; }
  double max() const;
  friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

struct PrecisionRecall {
  // Absent when the threshold selects no cell (0/0).
  std::optional<double> precision;
  double recall = 0.0;
};

// precision = |{h >= tau} & {g = 1}| / |{h >= tau}|,
// recall    = |{h >= tau} & {g = 1}| / |{g = 1}|.
PrecisionRecall PrecisionRecallAt(const Heatmap& heatmap, const Mask& mask,
                                  double tau);

// Area under the precision/recall curve, summed exactly over the distinct
// heatmap values taken as thresholds in decreasing order:
//   sum_d precision(tau_d) * (recall(tau_d) - recall(tau_{d-1})),
// with recall 0 before the first threshold.
double HmBoxAuc(const Heatmap& heatmap, const Mask& mask);

struct EvalFrame {
  Heatmap heatmap;
  FrameAnnotation annotation;
  FrameClass frame_class = FrameClass::kNonAveNoise;
};

// Fraction of AVE frames whose peak lies inside a sounding box. A frame counts
// as a hit if any cell attaining the maximum is foreground.
double Pibr(std::span<const EvalFrame> frames);

// Mean non-AVE peak divided by the mean AVE peak taken over in-box cells.
// Heatmaps are used as given; no per-frame normalization.
double Pnsr(std::span<const EvalFrame> frames);

// (h - min) / (max - min); a constant map becomes all zeros.
Heatmap MinMaxNormalize(const Heatmap& heatmap);

// Heatmaps keyed by (video_id, frame_index).
using HeatmapKey = std::pair<std::string, std::int64_t>;
using HeatmapSet = std::map<HeatmapKey, Heatmap>;

struct MetricValue {
  std::optional<double> value;  // absent when `frames` is zero
  std::size_t frames = 0;
};

struct MetricsReport {
  MetricValue hmbox_all, hmbox_single, hmbox_multi;
  MetricValue pibr_all, pibr_single, pibr_multi;
  MetricValue pnsr_all, pnsr_visible, pnsr_audible, pnsr_noise;
  std::map<FrameClass, std::size_t> class_counts;
  std::size_t total_frames = 0;
  // AVE frames whose boxes cover no cell centre at the evaluation grid; they
  // are left out of every metric.
  std::size_t excluded_empty_mask = 0;
  int grid_w = 0;
  int grid_h = 0;
};

// HmBoxAUC and PiBR are per-frame means over AVE frames (all / single /
// multi); PNSR numerators use all non-AVE frames or one subclass, against the
// shared AVE denominator. Throws DataError naming every frame with no heatmap
// or with a heatmap of the wrong size.
MetricsReport Evaluate(const DatasetIndex& index, const HeatmapSet& heatmaps,
                       int grid_w, int grid_h);

std::string ReportToJson(const MetricsReport& report);
std::string ReportToTable(const MetricsReport& report);

}  // namespace avsol

#endif  // AVSOL_METRICS_H_
