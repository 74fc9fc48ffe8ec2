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

#ifndef AVSOL_TRAIN_H_
#define AVSOL_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avsol/dnm.h"
#include "avsol/heatmap_io.h"
#include "avsol/parameter.h"
#include "avsol/synth.h"

namespace avsol {

struct AugmentOptions {
  double flip_probability = 0.5;
  double crop_probability = 0.5;
  double crop_min_scale = 0.8;
};

struct TrainOptions {
  int epochs = 60;
  std::uint64_t seed = 0;
  // Samples per Adam step; half positives, half their negatives.
  int batch_size = 8;
  AdamOptions adam{.lr = 3e-3};
  // The learning rate follows a cosine from adam.lr at the first epoch down
  // to adam.lr * final_lr_fraction at the last.
  double final_lr_fraction = 0.1;
  AugmentOptions augment;
  // Keep the parameters of the epoch with the best validation score.
  bool select_best_on_val = true;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double avc_loss = 0.0;
  double cls_loss = 0.0;
  int positives = 0;
  int negatives = 0;
  double train_avc_accuracy = 0.0;
  double val_avc_accuracy = 0.0;
  double val_cls_accuracy = 0.0;
  double val_score = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

struct ClipTensors {
  Tensor video;   // [T, H, W, 1]
  Tensor logmel;  // [mel_bins, T]
};
ClipTensors ClipToTensors(const ClipSample& clip);

// K-vector of 0/1 from a label bitmap.
std::vector<double> ClassTarget(std::uint32_t labels, int num_classes);

// Throws ValidationError unless clips of `data` fit the model's inputs.
void CheckCompatible(const ModelConfig& model, const GeneratorConfig& data);

// AVE clips of a split are the positive pairs; everything else only donates
// audio to negatives.
std::vector<const ClipSample*> PositiveClips(const SyntheticSplit& split);

// Each positive is paired with one negative per epoch whose donor audio is
// drawn from the whole training split by that epoch's seeded stream.
TrainResult Train(DnmModel& model, const SyntheticDataset& data,
                  const TrainOptions& options,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct Accuracy {
  double avc = 0.0;  // over positives and one fixed negative each
  double cls = 0.0;  // top-1 logit is one of the clip's categories
  int pairs = 0;
  int clips = 0;
};
Accuracy EvaluateAccuracy(const DnmModel& model, const SyntheticSplit& split,
                          std::uint64_t seed);

// One map per annotated frame. The clip-level map (M_loc, or w_att for a
// classification-only model) is shared by all frames of its clip and stored
// at 32-bit precision.
std::vector<HeatmapRecord> PredictHeatmaps(const DnmModel& model,
                                           const SyntheticSplit& split);

std::string EpochLogToJson(const EpochLog& log);

}  // namespace avsol

#endif  // AVSOL_TRAIN_H_
