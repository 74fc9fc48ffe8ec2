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

#include <gtest/gtest.h>

#include <set>

#include "avsol/errors.h"

namespace avsol {
namespace {

GeneratorConfig TinyData() {
  GeneratorConfig g;
  g.image_h = 21;
  g.image_w = 21;
  g.frames = 4;
  g.audio_steps = 4;
  g.mel_bins = 6;
  g.num_classes = 3;
  g.train_clips = 24;
  g.val_clips = 8;
  g.test_clips = 8;
  g.seed = 5;
  return g;
}

ModelConfig TinyModel() {
  ModelConfig c;
  c.image_h = 21;
  c.image_w = 21;
  c.mel_bins = 6;
  c.steps = 4;
  c.grid_w = 3;
  c.grid_h = 3;
  c.feature_dim = 4;
  c.gru_hidden = 4;
  c.cls_dim = 3;
  c.num_classes = 3;
  c.visual_channels = 3;
  c.audio_channels = 3;
  return c;
}

TrainOptions Quick(int epochs, std::uint64_t seed = 0) {
  TrainOptions o;
  o.epochs = epochs;
  o.seed = seed;
  o.batch_size = 8;
  o.adam.lr = 3e-3;
  return o;
}

const SyntheticDataset& Data() {
  static const SyntheticDataset data = GenerateDataset(TinyData());
  return data;
}

TEST(ClassTarget, Bits) {
  EXPECT_EQ(ClassTarget(0b101, 4), (std::vector<double>{1, 0, 1, 0}));
  EXPECT_EQ(ClassTarget(0, 2), (std::vector<double>{0, 0}));
  EXPECT_EQ(ClassTarget(0b1000, 3), (std::vector<double>{0, 0, 0}));
}

TEST(CheckCompatible, NamesTheMismatch) {
  EXPECT_NO_THROW(CheckCompatible(TinyModel(), TinyData()));
  GeneratorConfig g = TinyData();
  g.mel_bins = 8;
  try {
    CheckCompatible(TinyModel(), g);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("mel bins"), std::string::npos);
  }
  g = TinyData();
  g.frames = 5;
  EXPECT_THROW(CheckCompatible(TinyModel(), g), ValidationError);
  g = TinyData();
  g.audio_steps = 5;
  EXPECT_THROW(CheckCompatible(TinyModel(), g), ValidationError);
  g = TinyData();
  g.num_classes = 4;
  EXPECT_THROW(CheckCompatible(TinyModel(), g), ValidationError);
  g = TinyData();
  g.image_w = 24;
  EXPECT_THROW(CheckCompatible(TinyModel(), g), ValidationError);
}

TEST(PositiveClips, AreExactlyTheAveClips) {
  const auto positives = PositiveClips(Data().train);
  std::set<const ClipSample*> chosen(positives.begin(), positives.end());
  for (const ClipSample& c : Data().train.clips)
    EXPECT_EQ(chosen.count(&c) == 1, IsAve(c.scenario)) << c.clip_id;
}

TEST(ClipToTensors, Layout) {
  const ClipSample& c = Data().train.clips[0];
  const ClipTensors t = ClipToTensors(c);
  EXPECT_EQ(t.video.shape(), (Shape{4, 21, 21, 1}));
  EXPECT_EQ(t.logmel.shape(), (Shape{6, 4}));
  EXPECT_EQ(t.video.data()[(2 * 21 + 5) * 21 + 7], c.pixel(2, 5, 7));
  EXPECT_EQ(t.logmel.data()[3 * 4 + 1], c.mel(3, 1));
}

TEST(Train, EachEpochPairsEveryPositiveWithOneNegative) {
  DnmModel model(TinyModel(), 1);
  const int positives = static_cast<int>(PositiveClips(Data().train).size());
  ASSERT_GT(positives, 0);
  const TrainResult r = Train(model, Data(), Quick(2));
  ASSERT_EQ(r.log.size(), 2u);
  for (const EpochLog& log : r.log) {
    EXPECT_EQ(log.positives, positives);
    EXPECT_EQ(log.negatives, positives);
    EXPECT_GE(log.train_avc_accuracy, 0.0);
    EXPECT_LE(log.train_avc_accuracy, 1.0);
  }
}

TEST(Train, IsDeterministic) {
  DnmModel a(TinyModel(), 3), b(TinyModel(), 3);
  const TrainResult ra = Train(a, Data(), Quick(3, 9));
  const TrainResult rb = Train(b, Data(), Quick(3, 9));
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i)
    EXPECT_EQ(EpochLogToJson(ra.log[i]), EpochLogToJson(rb.log[i]));
  EXPECT_EQ(ra.best_epoch, rb.best_epoch);
  EXPECT_EQ(a.SnapshotValues(), b.SnapshotValues());

  DnmModel c(TinyModel(), 3);
  Train(c, Data(), Quick(3, 10));
  EXPECT_NE(a.SnapshotValues(), c.SnapshotValues());
}

TEST(Train, LossDecreasesOverTheFirstEpochs) {
  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    DnmModel model(TinyModel(), seed);
    TrainOptions o = Quick(5, seed);
    o.select_best_on_val = false;
    const TrainResult r = Train(model, Data(), o);
    decreasing += r.log.back().loss < r.log.front().loss;
  }
  EXPECT_GE(decreasing, 2);
}

TEST(Train, KeepsTheBestValidationEpoch) {
  DnmModel model(TinyModel(), 2);
  const TrainResult r = Train(model, Data(), Quick(4, 2));
  double best = -1.0;
  int best_epoch = 0;
  for (const EpochLog& log : r.log)
    if (log.val_score > best) {
      best = log.val_score;
      best_epoch = log.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);

  // Replaying to the selected epoch reproduces the restored parameters.
  DnmModel replay(TinyModel(), 2);
  Train(replay, Data(), [&] {
    TrainOptions o = Quick(4, 2);
    o.select_best_on_val = false;
    o.epochs = best_epoch;
    return o;
  }());
  EXPECT_EQ(replay.SnapshotValues(), model.SnapshotValues());
  EXPECT_DOUBLE_EQ(EvaluateAccuracy(model, Data().val, 2).avc,
                   r.log[best_epoch - 1].val_avc_accuracy);
}

TEST(Train, RejectsBadOptions) {
  DnmModel model(TinyModel(), 0);
  TrainOptions o = Quick(0);
  EXPECT_THROW(Train(model, Data(), o), std::invalid_argument);
  o = Quick(1);
  o.batch_size = 3;
  EXPECT_THROW(Train(model, Data(), o), std::invalid_argument);
  o = Quick(1);
  o.final_lr_fraction = 1.5;
  EXPECT_THROW(Train(model, Data(), o), std::invalid_argument);
  ModelConfig wrong = TinyModel();
  wrong.mel_bins = 8;
  DnmModel other(wrong, 0);
  EXPECT_THROW(Train(other, Data(), Quick(1)), ValidationError);
}

TEST(EvaluateAccuracy, CountsAndDeterminism) {
  DnmModel model(TinyModel(), 4);
  const Accuracy a = EvaluateAccuracy(model, Data().test, 1);
  const Accuracy b = EvaluateAccuracy(model, Data().test, 1);
  const int positives = static_cast<int>(PositiveClips(Data().test).size());
  EXPECT_EQ(a.clips, positives);
  EXPECT_EQ(a.pairs, 2 * positives);
  EXPECT_EQ(a.avc, b.avc);
  EXPECT_EQ(a.cls, b.cls);
  EXPECT_GE(a.avc, 0.0);
  EXPECT_LE(a.avc, 1.0);
}

TEST(PredictHeatmaps, OneFloatMapPerAnnotatedFrame) {
  DnmModel model(TinyModel(), 4);
  const auto maps = PredictHeatmaps(model, Data().test);
  std::size_t frames = 0;
  for (const ClipSample& c : Data().test.clips) frames += c.annotations.size();
  ASSERT_EQ(maps.size(), frames);
  const HeatmapSet set = ToHeatmapSet(maps);
  for (const ClipSample& c : Data().test.clips)
    for (const FrameAnnotation& f : c.annotations) {
      const Heatmap& h = set.at(HeatmapKey{f.video_id, f.frame_index});
      EXPECT_EQ(h.width, 3);
      EXPECT_EQ(h.height, 3);
      EXPECT_EQ(h, QuantizeToFloat(h));
      // Frames of one clip share the clip-level map.
      EXPECT_EQ(h, set.at(HeatmapKey{c.annotations[0].video_id,
                                     c.annotations[0].frame_index}));
      for (double v : h.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
}

TEST(EpochLogToJson, HasEveryField) {
  EpochLog log;
  log.epoch = 3;
  log.loss = 0.5;
  const std::string j = EpochLogToJson(log);
  for (const char* key : {"epoch", "loss", "avc_loss", "cls_loss", "positives", "negatives",
                          "train_avc_accuracy", "val_avc_accuracy", "val_cls_accuracy",
                          "val_score"})
    EXPECT_NE(j.find(std::string("\"") + key + "\""), std::string::npos) << key;
}

}  // namespace
}  // namespace avsol
