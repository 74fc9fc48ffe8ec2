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

#include "avsol/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "avsol/errors.h"
#include "json.hpp"

namespace avsol {

namespace {

void RequireMatchingMask(const char* op, const Heatmap& heatmap,
                         const Mask& mask) {
  if (heatmap.width != mask.width || heatmap.height != mask.height ||
      heatmap.values.size() != mask.cells.size()) {
    throw std::invalid_argument(
        std::string(op) + ": heatmap " + std::to_string(heatmap.width) + "x" +
        std::to_string(heatmap.height) + " vs mask " +
        std::to_string(mask.width) + "x" + std::to_string(mask.height));
  }
  if (mask.count() == 0) {
    throw std::invalid_argument(std::string(op) + ": mask has no foreground");
  }
}

Mask FrameMask(const EvalFrame& f) {
  return RasterizeBoxes(f.annotation, f.heatmap.width, f.heatmap.height);
}

double InBoxPeak(const Heatmap& heatmap, const Mask& mask) {
  double best = -INFINITY;
  for (std::size_t i = 0; i < mask.cells.size(); ++i)
    if (mask.cells[i]) best = std::max(best, heatmap.values[i]);
  return best;
}

bool PeakInMask(const Heatmap& heatmap, const Mask& mask) {
  const double peak = heatmap.max();
  for (std::size_t i = 0; i < mask.cells.size(); ++i)
    if (mask.cells[i] && heatmap.values[i] == peak) return true;
  return false;
}

}  // namespace

double Heatmap::max() const {
  if (values.empty()) throw std::invalid_argument("heatmap has no cells");
  return *std::max_element(values.begin(), values.end());
}

PrecisionRecall PrecisionRecallAt(const Heatmap& heatmap, const Mask& mask,
                                  double tau) {
  RequireMatchingMask("precision_recall_at", heatmap, mask);
  std::size_t selected = 0, hits = 0;
  for (std::size_t i = 0; i < heatmap.values.size(); ++i) {
    if (heatmap.values[i] >= tau) {
      ++selected;
      if (mask.cells[i]) ++hits;
    }
  }
  PrecisionRecall pr;
  pr.recall = static_cast<double>(hits) / static_cast<double>(mask.count());
  if (selected > 0) {
    pr.precision = static_cast<double>(hits) / static_cast<double>(selected);
  }
  return pr;
}

double HmBoxAuc(const Heatmap& heatmap, const Mask& mask) {
  RequireMatchingMask("hmbox_auc", heatmap, mask);
  const std::size_t n = heatmap.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return heatmap.values[a] > heatmap.values[b];
  });
  const double positives = static_cast<double>(mask.count());
  double auc = 0.0, prev_recall = 0.0;
  std::size_t selected = 0, hits = 0;
  for (std::size_t k = 0; k < n;) {
    // Lowering the threshold to the next distinct value admits every cell
    // that shares it.
    const double tau = heatmap.values[order[k]];
    while (k < n && heatmap.values[order[k]] == tau) {
      ++selected;
      if (mask.cells[order[k]]) ++hits;
      ++k;
    }
    const double recall = static_cast<double>(hits) / positives;
    const double precision =
        static_cast<double>(hits) / static_cast<double>(selected);
    auc += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return auc;
}

double Pibr(std::span<const EvalFrame> frames) {
  if (frames.empty()) throw std::invalid_argument("pibr: no frames");
  std::size_t hits = 0;
  for (const EvalFrame& f : frames) {
    if (!IsAve(f.frame_class)) {
      throw std::invalid_argument("pibr: frame " + f.annotation.video_id + "#" +
                                  std::to_string(f.annotation.frame_index) +
                                  " is not an AVE frame");
    }
    if (PeakInMask(f.heatmap, FrameMask(f))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(frames.size());
}

double Pnsr(std::span<const EvalFrame> frames) {
  double noise = 0.0, signal = 0.0;
  std::size_t n_noise = 0, n_signal = 0;
  for (const EvalFrame& f : frames) {
    if (IsAve(f.frame_class)) {
      const Mask mask = FrameMask(f);
      if (mask.count() == 0) {
        throw std::invalid_argument("pnsr: AVE frame " + f.annotation.video_id +
                                    "#" +
                                    std::to_string(f.annotation.frame_index) +
                                    " has an empty box mask");
      }
      signal += InBoxPeak(f.heatmap, mask);
      ++n_signal;
    } else {
      noise += f.heatmap.max();
      ++n_noise;
    }
  }
  if (n_signal == 0) throw std::invalid_argument("pnsr: no AVE frames");
  if (n_noise == 0) throw std::invalid_argument("pnsr: no non-AVE frames");
  const double denominator = signal / static_cast<double>(n_signal);
  if (denominator == 0.0) throw std::domain_error("pnsr: zero denominator");
  return (noise / static_cast<double>(n_noise)) / denominator;
}

Heatmap MinMaxNormalize(const Heatmap& heatmap) {
  Heatmap out = heatmap;
  if (out.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : out.values) v = range > 0.0 ? (v - min) / range : 0.0;
  return out;
}

MetricsReport Evaluate(const DatasetIndex& index, const HeatmapSet& heatmaps,
                       int grid_w, int grid_h) {
  MetricsReport report;
  report.grid_w = grid_w;
  report.grid_h = grid_h;
  report.total_frames = index.size();

  std::vector<std::string> problems;
  for (const FrameAnnotation& f : index.frames()) {
    auto it = heatmaps.find({f.video_id, f.frame_index});
    if (it == heatmaps.end()) {
      problems.push_back(f.video_id + "#" + std::to_string(f.frame_index) +
                         ": missing heatmap");
    } else if (it->second.width != grid_w || it->second.height != grid_h ||
               it->second.values.size() !=
                   static_cast<std::size_t>(grid_w) * grid_h) {
      problems.push_back(f.video_id + "#" + std::to_string(f.frame_index) +
                         ": heatmap is " + std::to_string(it->second.width) +
                         "x" + std::to_string(it->second.height) +
                         ", expected " + std::to_string(grid_w) + "x" +
                         std::to_string(grid_h));
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << problems.size() << " frame(s) without a usable heatmap:";
    for (const auto& p : problems) os << "\n  " << p;
    throw DataError(os.str());
  }

  // Per-frame terms, reduced in index order so results are bit-stable.
  double auc_sum[2] = {0, 0}, pibr_sum[2] = {0, 0}, signal_sum = 0;
  std::size_t ave_count[2] = {0, 0};
  double noise_sum[3] = {0, 0, 0};
  std::size_t noise_count[3] = {0, 0, 0};
  for (std::size_t j = 0; j < index.size(); ++j) {
    const FrameAnnotation& f = index.frames()[j];
    const FrameClass c = index.frame_class(j);
    ++report.class_counts[c];
    const Heatmap& h = heatmaps.at({f.video_id, f.frame_index});
    if (IsAve(c)) {
      const Mask mask = RasterizeBoxes(f, grid_w, grid_h);
      if (mask.count() == 0) {
        ++report.excluded_empty_mask;
        continue;
      }
      const int b = c == FrameClass::kAveSingle ? 0 : 1;
      auc_sum[b] += HmBoxAuc(h, mask);
      pibr_sum[b] += PeakInMask(h, mask) ? 1.0 : 0.0;
      signal_sum += InBoxPeak(h, mask);
      ++ave_count[b];
    } else {
      const int b = c == FrameClass::kNonAveVisible
                        ? 0
                        : (c == FrameClass::kNonAveAudible ? 1 : 2);
      noise_sum[b] += h.max();
      ++noise_count[b];
    }
  }

  auto mean = [](double sum, std::size_t n) {
    MetricValue m;
    m.frames = n;
    if (n > 0) m.value = sum / static_cast<double>(n);
    return m;
  };
  report.hmbox_single = mean(auc_sum[0], ave_count[0]);
  report.hmbox_multi = mean(auc_sum[1], ave_count[1]);
  report.hmbox_all = mean(auc_sum[0] + auc_sum[1], ave_count[0] + ave_count[1]);
  report.pibr_single = mean(pibr_sum[0], ave_count[0]);
  report.pibr_multi = mean(pibr_sum[1], ave_count[1]);
  report.pibr_all = mean(pibr_sum[0] + pibr_sum[1], ave_count[0] + ave_count[1]);

  const std::size_t n_signal = ave_count[0] + ave_count[1];
  const double denominator =
      n_signal > 0 ? signal_sum / static_cast<double>(n_signal) : 0.0;
  auto ratio = [&](double sum, std::size_t n) {
    MetricValue m;
    m.frames = n;
    if (n > 0 && n_signal > 0 && denominator != 0.0) {
      m.value = (sum / static_cast<double>(n)) / denominator;
    }
    return m;
  };
  report.pnsr_visible = ratio(noise_sum[0], noise_count[0]);
  report.pnsr_audible = ratio(noise_sum[1], noise_count[1]);
  report.pnsr_noise = ratio(noise_sum[2], noise_count[2]);
  report.pnsr_all = ratio(noise_sum[0] + noise_sum[1] + noise_sum[2],
                          noise_count[0] + noise_count[1] + noise_count[2]);
  return report;
}

namespace {

nlohmann::ordered_json ValueJson(const MetricValue& m) {
  nlohmann::ordered_json j;
  j["value"] = m.value ? nlohmann::ordered_json(*m.value) : nullptr;
  j["frames"] = m.frames;
  return j;
}

std::string Cell(const MetricValue& m) {
  if (!m.value) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << *m.value;
  return os.str();
}

}  // namespace

std::string ReportToJson(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["grid"] = {{"width", r.grid_w}, {"height", r.grid_h}};
  j["hmbox_auc"] = {{"all", ValueJson(r.hmbox_all)},
                    {"single", ValueJson(r.hmbox_single)},
                    {"multi", ValueJson(r.hmbox_multi)}};
  j["pibr"] = {{"all", ValueJson(r.pibr_all)},
               {"single", ValueJson(r.pibr_single)},
               {"multi", ValueJson(r.pibr_multi)}};
  j["pnsr"] = {{"all", ValueJson(r.pnsr_all)},
               {"visible", ValueJson(r.pnsr_visible)},
               {"audible", ValueJson(r.pnsr_audible)},
               {"noise", ValueJson(r.pnsr_noise)}};
  nlohmann::ordered_json counts;
  counts["total"] = r.total_frames;
  for (FrameClass c : kAllFrameClasses) {
    auto it = r.class_counts.find(c);
    counts[std::string(FrameClassName(c))] =
        it == r.class_counts.end() ? 0 : it->second;
  }
  j["frame_counts"] = counts;
  j["excluded_empty_mask"] = r.excluded_empty_mask;
  return j.dump(2) + "\n";
}

std::string ReportToTable(const MetricsReport& r) {
  std::ostringstream os;
  os << "          HmBoxAUC                PiBR                    PNSR\n";
  os << "     all  single  multi     all  single  multi     all  visible  "
        "audible  noise\n";
  auto col = [&](const MetricValue& m, int width) {
    os << std::setw(width) << Cell(m);
  };
  col(r.hmbox_all, 8);
  col(r.hmbox_single, 8);
  col(r.hmbox_multi, 7);
  col(r.pibr_all, 8);
  col(r.pibr_single, 8);
  col(r.pibr_multi, 7);
  col(r.pnsr_all, 8);
  col(r.pnsr_visible, 9);
  col(r.pnsr_audible, 9);
  col(r.pnsr_noise, 7);
  os << "\n\nframes: " << r.total_frames;
  for (FrameClass c : kAllFrameClasses) {
    auto it = r.class_counts.find(c);
    os << "  " << FrameClassName(c) << "="
       << (it == r.class_counts.end() ? 0 : it->second);
  }
  if (r.excluded_empty_mask > 0) {
    os << "\nexcluded (box covers no grid cell centre): "
       << r.excluded_empty_mask;
  }
  os << "\n";
  return os.str();
}

}  // namespace avsol
