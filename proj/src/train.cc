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

#include "avsol/train.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "avsol/errors.h"
#include "avsol/rng.h"
#include "json.hpp"

namespace avsol {

namespace {

constexpr std::uint64_t kEpochStream = 0x65706f6368;
constexpr std::uint64_t kEvalStream = 0x6576616c;

int ArgMax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

double ValScore(TrainingMode mode, const Accuracy& acc) {
  switch (mode) {
    case TrainingMode::kAvcOnly:
      return acc.avc;
    case TrainingMode::kClsOnly:
      return acc.cls;
    case TrainingMode::kDnm:
      return 0.5 * (acc.avc + acc.cls);
  }
  return 0.0;
}

}  // namespace

ClipTensors ClipToTensors(const ClipSample& clip) {
  ClipTensors out;
  out.video = Tensor({static_cast<std::size_t>(clip.frames),
                      static_cast<std::size_t>(clip.height),
                      static_cast<std::size_t>(clip.width), 1},
                     std::vector<double>(clip.video.begin(), clip.video.end()));
  out.logmel = Tensor({static_cast<std::size_t>(clip.mel_bins),
                       static_cast<std::size_t>(clip.audio_steps)},
                      std::vector<double>(clip.logmel.begin(), clip.logmel.end()));
  return out;
}

std::vector<double> ClassTarget(std::uint32_t labels, int num_classes) {
  std::vector<double> out(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) out[k] = (labels >> k) & 1u ? 1.0 : 0.0;
  return out;
}

void CheckCompatible(const ModelConfig& model, const GeneratorConfig& data) {
  auto mismatch = [](const std::string& what, int m, int d) {
    throw ValidationError("model/dataset mismatch: " + what + " is " +
                          std::to_string(m) + " in the model config but " +
                          std::to_string(d) + " in the dataset");
  };
  if (model.steps != data.frames) mismatch("frames per clip", model.steps, data.frames);
  if (model.steps != data.audio_steps)
    mismatch("audio steps", model.steps, data.audio_steps);
  if (model.image_h != data.image_h) mismatch("image height", model.image_h, data.image_h);
  if (model.image_w != data.image_w) mismatch("image width", model.image_w, data.image_w);
  if (model.mel_bins != data.mel_bins) mismatch("mel bins", model.mel_bins, data.mel_bins);
  if (model.num_classes != data.num_classes)
    mismatch("categories", model.num_classes, data.num_classes);
}

std::vector<const ClipSample*> PositiveClips(const SyntheticSplit& split) {
  std::vector<const ClipSample*> out;
  for (const ClipSample& c : split.clips)
    if (IsAve(c.scenario)) out.push_back(&c);
  return out;
}

TrainResult Train(DnmModel& model, const SyntheticDataset& data,
                  const TrainOptions& options,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  CheckCompatible(model.config(), data.config);
  if (options.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (options.batch_size < 2 || options.batch_size % 2 != 0) {
    throw std::invalid_argument("train: batch_size must be even and >= 2");
  }
  if (!(options.final_lr_fraction >= 0.0 && options.final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("train: final_lr_fraction must be in [0, 1]");
  }
  if (data.train.clips.size() < 2) {
    throw std::invalid_argument(
        "train: at least 2 training clips are needed to form negative pairs");
  }
  const std::vector<const ClipSample*> positives = PositiveClips(data.train);
  if (positives.empty()) throw std::invalid_argument("train: no AVE training clips");

  const ModelConfig& cfg = model.config();
  const TrainingMode mode = cfg.mode;
  std::vector<Parameter*> params = model.parameters();
  const std::size_t pairs_per_step = static_cast<std::size_t>(options.batch_size / 2);

  TrainResult result;
  double best_score = -1.0;
  std::vector<std::vector<double>> best_values;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng(options.seed, {kEpochStream, static_cast<std::uint64_t>(epoch)});
    std::vector<const ClipSample*> order = positives;
    rng.Shuffle(order.begin(), order.end());

    AdamOptions adam = options.adam;
    if (options.epochs > 1) {
      const double progress = static_cast<double>(epoch - 1) / (options.epochs - 1);
      const double f = options.final_lr_fraction;
      adam.lr *= f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    }

    EpochLog log;
    log.epoch = epoch;
    int correct = 0;
    for (std::size_t start = 0; start < order.size(); start += pairs_per_step) {
      const std::size_t end = std::min(order.size(), start + pairs_per_step);
      const double weight = 1.0 / static_cast<double>(2 * (end - start));
      ZeroGrads(params);
      for (std::size_t p = start; p < end; ++p) {
        ClipSample positive = *order[p];
        if (rng.Bernoulli(options.augment.flip_probability)) HorizontalFlip(positive);
        if (rng.Bernoulli(options.augment.crop_probability))
          ResizedCrop(positive, options.augment.crop_min_scale, rng);
        ClipSample negative = MakeNegativePair(positive, data.train.clips, rng);
        const std::vector<double> target = ClassTarget(positive.labels, cfg.num_classes);

        for (const ClipSample* sample : {&positive, &negative}) {
          const int label = sample->avc_positive ? 1 : 0;
          if (label) ++log.positives; else ++log.negatives;
          // A negative contributes nothing to a classification-only model.
          if (mode == TrainingMode::kClsOnly && !label) continue;
          ClipTensors in = ClipToTensors(*sample);
          ModelOutput out = model.Forward(in.video, in.logmel);
          if ((out.avc_logit.item() >= 0.0) == (label == 1)) ++correct;
          LossTerms loss = MultitaskLoss(
              out, label, label ? std::optional(target) : std::nullopt, mode);
          log.avc_loss += loss.avc * weight;
          log.cls_loss += loss.cls * weight;
          if (loss.total.defined()) {
            log.loss += loss.total.item() * weight;
            Backward(Scale(loss.total, weight));
          }
        }
      }
      AdamStep(params, adam);
    }
    // Per-step means are summed; turn them into a per-epoch mean.
    const double steps = std::ceil(static_cast<double>(order.size()) /
                                   static_cast<double>(pairs_per_step));
    log.loss /= steps;
    log.avc_loss /= steps;
    log.cls_loss /= steps;
    log.train_avc_accuracy =
        static_cast<double>(correct) / static_cast<double>(2 * order.size());

    if (!data.val.clips.empty() && !PositiveClips(data.val).empty()) {
      Accuracy acc = EvaluateAccuracy(model, data.val, options.seed);
      log.val_avc_accuracy = acc.avc;
      log.val_cls_accuracy = acc.cls;
      log.val_score = ValScore(mode, acc);
    }
    if (!options.select_best_on_val || log.val_score > best_score) {
      best_score = log.val_score;
      result.best_epoch = epoch;
      if (options.select_best_on_val) best_values = model.SnapshotValues();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (options.select_best_on_val) model.RestoreValues(best_values);
  return result;
}

Accuracy EvaluateAccuracy(const DnmModel& model, const SyntheticSplit& split,
                          std::uint64_t seed) {
  const std::vector<const ClipSample*> positives = PositiveClips(split);
  Accuracy acc;
  if (positives.empty()) return acc;
  Rng rng(seed, {kEvalStream});
  int avc_correct = 0, cls_correct = 0;
  for (const ClipSample* clip : positives) {
    ClipTensors in = ClipToTensors(*clip);
    ModelOutput out = model.Forward(in.video, in.logmel);
    if (out.avc_logit.item() >= 0.0) ++avc_correct;
    if ((clip->labels >> ArgMax(out.class_logits.data())) & 1u) ++cls_correct;

    ClipSample negative = MakeNegativePair(*clip, split.clips, rng);
    ClipTensors neg_in = ClipToTensors(negative);
    if (model.Forward(neg_in.video, neg_in.logmel).avc_logit.item() < 0.0) ++avc_correct;
  }
  acc.pairs = static_cast<int>(2 * positives.size());
  acc.clips = static_cast<int>(positives.size());
  acc.avc = static_cast<double>(avc_correct) / acc.pairs;
  acc.cls = static_cast<double>(cls_correct) / acc.clips;
  return acc;
}

std::vector<HeatmapRecord> PredictHeatmaps(const DnmModel& model,
                                           const SyntheticSplit& split) {
  const ModelConfig& cfg = model.config();
  std::vector<HeatmapRecord> out;
  for (const ClipSample& clip : split.clips) {
    ClipTensors in = ClipToTensors(clip);
    ModelOutput result = model.Forward(in.video, in.logmel);
    Heatmap map;
    map.width = cfg.grid_w;
    map.height = cfg.grid_h;
    map.values = LocalizationMap(result, cfg.mode);
    map = QuantizeToFloat(std::move(map));
    for (const FrameAnnotation& frame : clip.annotations)
      out.push_back({frame.video_id, frame.frame_index, map});
  }
  return out;
}

std::string EpochLogToJson(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["loss"] = log.loss;
  j["avc_loss"] = log.avc_loss;
  j["cls_loss"] = log.cls_loss;
  j["positives"] = log.positives;
  j["negatives"] = log.negatives;
  j["train_avc_accuracy"] = log.train_avc_accuracy;
  j["val_avc_accuracy"] = log.val_avc_accuracy;
  j["val_cls_accuracy"] = log.val_cls_accuracy;
  j["val_score"] = log.val_score;
  return j.dump();
}

}  // namespace avsol
