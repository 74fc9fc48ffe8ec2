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

#ifndef AVSOL_SYNTH_H_
#define AVSOL_SYNTH_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avsol/annotation.h"
#include "avsol/rng.h"

namespace avsol {

struct GeneratorConfig {
  int image_h = 24;
  int image_w = 24;
  int frames = 8;  // frames per one-second clip
  int mel_bins = 16;
  int audio_steps = 8;
  int num_classes = 4;
  int train_clips = 200;
  int val_clips = 50;
  int test_clips = 50;
  // Scenario probabilities, indexed like kAllFrameClasses.
  std::array<double, 5> class_probs = {0.5, 0.15, 0.15, 0.1, 0.1};
  // Fraction of AveSingle and NonAveVisible scenes that also contain a
  // silent distractor blob.
  double multi_object_fraction = 0.3;
  double noise_amplitude = 0.05;
  std::uint64_t seed = 0;

  // Throws ValidationError.
  void Validate() const;
  std::string ToJson() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static GeneratorConfig FromJson(std::string_view json);
  // FNV-1a over ToJson(), hex encoded.
  std::string Hash() const;
};

// One synthetic one-second segment. Video is [frames, H, W, 1] and the
// log-mel grid is [mel_bins, audio_steps], both row-major.
struct ClipSample {
  std::string clip_id;
  int frames = 0, height = 0, width = 0;
  std::vector<float> video;
  int mel_bins = 0, audio_steps = 0;
  std::vector<float> logmel;
  std::uint32_t labels = 0;  // bit k set when category k is audible
  FrameClass scenario = FrameClass::kNonAveNoise;
  std::vector<FrameAnnotation> annotations;  // one per frame
  bool avc_positive = true;
  std::string audio_source_id;  // clip the audio came from

  float pixel(int t, int y, int x) const {
    return video[(static_cast<std::size_t>(t) * height + y) * width + x];
  }
  float mel(int m, int t) const {
    return logmel[static_cast<std::size_t>(m) * audio_steps + t];
  }
};

std::string CategoryName(int category);

// Renders one clip. Every category has its own blob shape, motion pattern and
// spectral template. A per-frame activity envelope drives the blob's
// brightness and motion and, when the blob is sounding, the loudness of its
// template, so the sounding region is the one that moves with the audio.
//   AveSingle      one sounding blob (optionally plus a silent distractor)
//   AveMulti       two sounding blobs, audio summed
//   NonAveVisible  silent blob(s), noise-floor audio
//   NonAveAudible  empty frames, template audio, dummy out-of-view box
//   NonAveNoise    empty frames, noise-floor audio
ClipSample GenerateClip(const GeneratorConfig& config, std::string clip_id,
                        int category, FrameClass scenario, Rng& rng);

struct SyntheticSplit {
  std::string name;
  std::vector<ClipSample> clips;
};

struct SyntheticDataset {
  GeneratorConfig config;
  SyntheticSplit train, val, test;

  DatasetIndex Annotations(const SyntheticSplit& split) const;
};

// Pure function of the config (including its seed). Clip i of split s uses
// the stream Rng(seed, {s, i}), so splits never share streams.
SyntheticDataset GenerateDataset(const GeneratorConfig& config);

// Layout: manifest.json, <split>/annotations.jsonl, <split>/clips/<id>.avcl.
// Creates `dir` if needed; throws DataError if it cannot be written.
void WriteDataset(const SyntheticDataset& dataset,
                  const std::filesystem::path& dir);
SyntheticDataset LoadDataset(const std::filesystem::path& dir);

// "AVCL" v1: magic, u16 version, 4 x u16 video dims (frames, H, W, C) and
// f32 values, 2 x u16 audio dims (mel bins, steps) and f32 values, u32 label
// bitmap.
std::string EncodeClip(const ClipSample& clip);
// Fills the tensor payload and labels of a clip; ids/annotations untouched.
void DecodeClipInto(std::string_view bytes, ClipSample& clip);
ClipSample ReadClipFile(const std::filesystem::path& path);

// Replaces the audio with that of another clip drawn uniformly from `pool`
// (any clip whose id differs from `positive`). Video is untouched and the
// result is labelled AVC-negative. Throws std::invalid_argument when no
// other clip exists.
ClipSample MakeNegativePair(const ClipSample& positive,
                            std::span<const ClipSample> pool, Rng& rng);

// Training-time video augmentations.
void HorizontalFlip(ClipSample& clip);
// Crops a random window covering at least `min_scale` of each side and
// resizes it back bilinearly.
void ResizedCrop(ClipSample& clip, double min_scale, Rng& rng);

// Pearson correlation; 0 when either sequence is constant.
double Correlation(std::span<const double> a, std::span<const double> b);

}  // namespace avsol

#endif  // AVSOL_SYNTH_H_
