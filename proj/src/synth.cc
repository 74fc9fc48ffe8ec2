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

#include "avsol/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "avsol/binary_io.h"
#include "avsol/errors.h"
#include "json.hpp"

namespace avsol {

namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr double kBackground = 0.1;
constexpr double kBlobBase = 0.35;
constexpr double kBlobGain = 0.6;
constexpr int kBlobRadius = 3;  // blobs live in a 7x7 stencil
constexpr int kNumShapes = 6;
constexpr int kNumMotions = 4;
constexpr int kMaxTries = 200;

// Stencil membership for shape `s` at offset (dx, dy), |dx|,|dy| <= 3.
bool ShapeCell(int s, int dx, int dy) {
  const int ax = std::abs(dx), ay = std::abs(dy);
  switch (s % kNumShapes) {
    case 0:  // filled square
      return ax <= 2 && ay <= 2;
    case 1:  // disk
      return dx * dx + dy * dy <= 9;
    case 2:  // plus
      return ax <= 1 || ay <= 1;
    case 3:  // square outline
      return std::max(ax, ay) >= 2;
    case 4:  // horizontal bar
      return ay <= 1;
    default:  // diagonal cross
      return ax == ay || ax + 1 == ay || ay + 1 == ax;
  }
}

// Displacement of motion style `m` at frame t when the blob is active.
std::pair<int, int> MotionOffset(int m, int t) {
  static constexpr int kWave[4] = {0, 1, 0, -1};
  const int w = kWave[t % 4];
  switch (m % kNumMotions) {
    case 0:
      return {w, 0};
    case 1:
      return {0, w};
    case 2:
      return {0, 0};
    default:
      return {w, w};
  }
}

// Category k sounds as a comb of harmonics spaced k + 2 mel bins apart. The
// spacing, unlike the absolute position, survives a shift-invariant encoder.
double TemplateValue(int category, int mel) {
  return mel % (category + 2) == 0 ? 1.0 : 0.0;
}

double StdDev(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

std::vector<double> DrawEnvelope(int frames, Rng& rng) {
  std::vector<double> e(frames);
  for (int tries = 0;; ++tries) {
    for (double& x : e) x = rng.Uniform();
    if (frames < 2 || StdDev(e) >= 0.15 || tries >= kMaxTries) return e;
  }
}

struct Blob {
  int category = 0;
  int cx = 0, cy = 0;
  bool sounding = false;
  std::vector<double> envelope;
};

// Pixel-space extent of a blob at frame t: [x0, x1] x [y0, y1] inclusive.
struct Extent {
  int x0, y0, x1, y1;
};

Extent BlobExtent(const Blob& b, int t) {
  const bool active = b.envelope[t] >= 0.5;
  auto [ox, oy] = active ? MotionOffset(b.category, t) : std::pair{0, 0};
  Extent e{INT32_MAX, INT32_MAX, INT32_MIN, INT32_MIN};
  const int shape = b.category % kNumShapes;
  for (int dy = -kBlobRadius; dy <= kBlobRadius; ++dy)
    for (int dx = -kBlobRadius; dx <= kBlobRadius; ++dx) {
      if (!ShapeCell(shape, dx, dy)) continue;
      e.x0 = std::min(e.x0, b.cx + ox + dx);
      e.x1 = std::max(e.x1, b.cx + ox + dx);
      e.y0 = std::min(e.y0, b.cy + oy + dy);
      e.y1 = std::max(e.y1, b.cy + oy + dy);
    }
  return e;
}

void PlaceBlobs(std::vector<Blob>& blobs, const GeneratorConfig& c, Rng& rng) {
  const int margin = kBlobRadius + 1;
  const int sep = 2 * (kBlobRadius + 2);
  auto coord = [&](int extent) {
    return margin + static_cast<int>(rng.Index(
                        static_cast<std::size_t>(extent - 2 * margin)));
  };
  // Whole layouts are redrawn so an early central blob cannot block the rest.
  for (int tries = 0; tries < kMaxTries; ++tries) {
    bool clear = true;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
      blobs[i].cx = coord(c.image_w);
      blobs[i].cy = coord(c.image_h);
      for (std::size_t j = 0; j < i; ++j) {
        if (std::abs(blobs[i].cx - blobs[j].cx) < sep &&
            std::abs(blobs[i].cy - blobs[j].cy) < sep) {
          clear = false;
        }
      }
    }
    if (clear) return;
  }
  throw InvariantError("generate_clip: frame too small for two blobs");
}

template <typename F>
void PaintBlob(const Blob& b, int t, F&& paint) {
  const bool active = b.envelope[t] >= 0.5;
  auto [ox, oy] = active ? MotionOffset(b.category, t) : std::pair{0, 0};
  const double level = kBlobBase + kBlobGain * b.envelope[t];
  const int shape = b.category % kNumShapes;
  for (int dy = -kBlobRadius; dy <= kBlobRadius; ++dy)
    for (int dx = -kBlobRadius; dx <= kBlobRadius; ++dx)
      if (ShapeCell(shape, dx, dy)) paint(b.cx + ox + dx, b.cy + oy + dy, level);
}

// Largest |correlation| between a sounding envelope and the intensity
// profile of any square window (side 3 to 9) over a blob rendered alone.
double MaxWindowCorrelation(const Blob& b, int h, int w,
                            const std::vector<std::vector<double>>& envelopes) {
  const int frames = static_cast<int>(b.envelope.size());
  // Summed-area table per frame, (h + 1) x (w + 1).
  std::vector<double> sat(static_cast<std::size_t>(frames) * (h + 1) * (w + 1), 0.0);
  auto at = [&](int t, int y, int x) -> double& {
    return sat[(static_cast<std::size_t>(t) * (h + 1) + y) * (w + 1) + x];
  };
  for (int t = 0; t < frames; ++t) {
    PaintBlob(b, t, [&](int x, int y, double level) { at(t, y + 1, x + 1) = level - kBackground; });
    for (int y = 1; y <= h; ++y)
      for (int x = 1; x <= w; ++x)
        at(t, y, x) += at(t, y - 1, x) + at(t, y, x - 1) - at(t, y - 1, x - 1);
  }
  double worst = 0.0;
  std::vector<double> profile(frames);
  for (int side = 3; side <= 9; side += 2)
    for (int y0 = 0; y0 + side <= h; ++y0)
      for (int x0 = 0; x0 + side <= w; ++x0) {
        for (int t = 0; t < frames; ++t) {
          profile[t] = at(t, y0 + side, x0 + side) - at(t, y0, x0 + side) -
                       at(t, y0 + side, x0) + at(t, y0, x0);
        }
        for (const auto& e : envelopes)
          worst = std::max(worst, std::abs(Correlation(profile, e)));
      }
  return worst;
}

int OtherCategory(int category, int num_classes, Rng& rng) {
  if (num_classes < 2) return category;
  const int shift = 1 + static_cast<int>(rng.Index(num_classes - 1));
  return (category + shift) % num_classes;
}

}  // namespace

std::string CategoryName(int category) {
  return "class_" + std::to_string(category);
}

double Correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void GeneratorConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw ValidationError("generator config: " + m);
  };
  // Two separated blobs with their motion margin must fit along one axis.
  const int min_side = 2 * (kBlobRadius + 1) + 2 * (kBlobRadius + 2) + 1;
  if (image_h < min_side || image_w < min_side) {
    fail("frames must be at least " + std::to_string(min_side) + "x" +
         std::to_string(min_side) + " pixels");
  }
  if (frames < 1 || mel_bins < 1 || audio_steps < 1) fail("dimensions must be >= 1");
  if (num_classes < 1 || num_classes > 32) fail("num_classes must be in [1, 32]");
  if (mel_bins < num_classes + 2) {
    fail("mel_bins must be at least num_classes + 2 so every harmonic comb "
         "has two teeth");
  }
  if (train_clips < 0 || val_clips < 0 || test_clips < 0) {
    fail("clip counts must be >= 0");
  }
  double sum = 0.0;
  for (double p : class_probs) {
    if (!(p >= 0.0)) fail("class probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("class probabilities must sum to 1");
  if (!(multi_object_fraction >= 0.0 && multi_object_fraction <= 1.0)) {
    fail("multi_object_fraction must be in [0, 1]");
  }
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.5)) {
    fail("noise_amplitude must be in [0, 0.5]");
  }
}

std::string GeneratorConfig::ToJson() const {
  OrderedJson j;
  j["image_h"] = image_h;
  j["image_w"] = image_w;
  j["frames"] = frames;
  j["mel_bins"] = mel_bins;
  j["audio_steps"] = audio_steps;
  j["num_classes"] = num_classes;
  j["train_clips"] = train_clips;
  j["val_clips"] = val_clips;
  j["test_clips"] = test_clips;
  OrderedJson probs;
  for (std::size_t i = 0; i < class_probs.size(); ++i) {
    probs[std::string(FrameClassName(kAllFrameClasses[i]))] = class_probs[i];
  }
  j["class_probs"] = probs;
  j["multi_object_fraction"] = multi_object_fraction;
  j["noise_amplitude"] = noise_amplitude;
  j["seed"] = seed;
  return j.dump(2);
}

GeneratorConfig GeneratorConfig::FromJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("generator config: not an object");
  GeneratorConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "image_h") c.image_h = value.get<int>();
      else if (key == "image_w") c.image_w = value.get<int>();
      else if (key == "frames") c.frames = value.get<int>();
      else if (key == "mel_bins") c.mel_bins = value.get<int>();
      else if (key == "audio_steps") c.audio_steps = value.get<int>();
      else if (key == "num_classes") c.num_classes = value.get<int>();
      else if (key == "train_clips") c.train_clips = value.get<int>();
      else if (key == "val_clips") c.val_clips = value.get<int>();
      else if (key == "test_clips") c.test_clips = value.get<int>();
      else if (key == "multi_object_fraction") c.multi_object_fraction = value.get<double>();
      else if (key == "noise_amplitude") c.noise_amplitude = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "class_probs") {
        for (const auto& [name, p] : value.items()) {
          const FrameClass fc = FrameClassFromName(name);
          for (std::size_t i = 0; i < 5; ++i)
            if (kAllFrameClasses[i] == fc) c.class_probs[i] = p.get<double>();
        }
      } else {
        throw ParseError("generator config: unknown field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  c.Validate();
  return c;
}

std::string GeneratorConfig::Hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : ToJson()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ClipSample GenerateClip(const GeneratorConfig& config, std::string clip_id,
                        int category, FrameClass scenario, Rng& rng) {
  const int k_classes = config.num_classes;
  if (category < 0 || category >= k_classes) {
    throw std::invalid_argument("generate_clip: category " +
                                std::to_string(category) + " out of range");
  }
  const int frames = config.frames, h = config.image_h, w = config.image_w;

  // Scene composition.
  std::vector<Blob> blobs;
  int audible_category = -1;  // out-of-view source
  switch (scenario) {
    case FrameClass::kAveSingle:
      blobs.push_back({category, 0, 0, true, {}});
      if (rng.Bernoulli(config.multi_object_fraction)) {
        blobs.push_back({OtherCategory(category, k_classes, rng), 0, 0, false, {}});
      }
      break;
    case FrameClass::kAveMulti:
      blobs.push_back({category, 0, 0, true, {}});
      blobs.push_back(
          {static_cast<int>(rng.Index(k_classes)), 0, 0, true, {}});
      break;
    case FrameClass::kNonAveVisible:
      blobs.push_back({category, 0, 0, false, {}});
      if (rng.Bernoulli(config.multi_object_fraction)) {
        blobs.push_back({OtherCategory(category, k_classes, rng), 0, 0, false, {}});
      }
      break;
    case FrameClass::kNonAveAudible:
      audible_category = category;
      break;
    case FrameClass::kNonAveNoise:
      break;
  }
  PlaceBlobs(blobs, config, rng);

  // Envelopes: sounding sources draw freely; silent blobs are redrawn until
  // no window over them tracks a sounding envelope.
  std::vector<std::vector<double>> audible_envelopes;
  for (Blob& b : blobs) {
    if (!b.sounding) continue;
    b.envelope = DrawEnvelope(frames, rng);
    audible_envelopes.push_back(b.envelope);
  }
  std::vector<double> offscreen_envelope;
  if (audible_category >= 0) offscreen_envelope = DrawEnvelope(frames, rng);
  for (Blob& b : blobs) {
    if (b.sounding) continue;
    for (int tries = 0;; ++tries) {
      b.envelope = DrawEnvelope(frames, rng);
      if (audible_envelopes.empty() ||
          MaxWindowCorrelation(b, h, w, audible_envelopes) < 0.5 ||
          tries >= kMaxTries) {
        break;
      }
    }
  }

  ClipSample clip;
  clip.clip_id = std::move(clip_id);
  clip.audio_source_id = clip.clip_id;
  clip.scenario = scenario;
  clip.frames = frames;
  clip.height = h;
  clip.width = w;
  clip.mel_bins = config.mel_bins;
  clip.audio_steps = config.audio_steps;

  // Video.
  const double na = config.noise_amplitude;
  std::vector<double> video(static_cast<std::size_t>(frames) * h * w, kBackground);
  for (const Blob& b : blobs) {
    for (int t = 0; t < frames; ++t) {
      PaintBlob(b, t, [&](int x, int y, double level) {
        video[(static_cast<std::size_t>(t) * h + y) * w + x] = level;
      });
    }
  }
  // Pixel noise is a fixed per-clip texture shared by every frame.
  std::vector<double> texture(static_cast<std::size_t>(h) * w);
  for (double& n : texture) n = rng.Uniform(-na, na);
  clip.video.resize(video.size());
  for (std::size_t i = 0; i < video.size(); ++i) {
    const double v = video[i] + texture[i % texture.size()];
    clip.video[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }

  // Audio: noise floor plus each audible template scaled by its envelope.
  const int mel = config.mel_bins, steps = config.audio_steps;
  clip.logmel.resize(static_cast<std::size_t>(mel) * steps);
  for (int m = 0; m < mel; ++m) {
    for (int s = 0; s < steps; ++s) {
      const int t = std::min(frames - 1, s * frames / steps);
      double v = rng.Uniform(0.0, 2.0 * na);
      for (const Blob& b : blobs) {
        if (b.sounding) v += TemplateValue(b.category, m) * b.envelope[t];
      }
      if (audible_category >= 0) {
        v += TemplateValue(audible_category, m) *
             offscreen_envelope[t];
      }
      clip.logmel[static_cast<std::size_t>(m) * steps + s] = static_cast<float>(v);
    }
  }

  // Labels and per-frame annotations.
  for (const Blob& b : blobs)
    if (b.sounding) clip.labels |= 1u << b.category;
  if (audible_category >= 0) clip.labels |= 1u << audible_category;

  for (int t = 0; t < frames; ++t) {
    FrameAnnotation f;
    f.video_id = clip.clip_id;
    f.frame_index = t;
    f.width = w;
    f.height = h;
    for (const Blob& b : blobs) {
      const Extent e = BlobExtent(b, t);
      BoundingBox box;
      box.x_min = std::max(0, e.x0 - 1);
      box.y_min = std::max(0, e.y0 - 1);
      box.x_max = std::min(w, e.x1 + 2);
      box.y_max = std::min(h, e.y1 + 2);
      box.sounding = b.sounding;
      box.category = CategoryName(b.category);
      f.boxes.push_back(box);
    }
    if (audible_category >= 0) {
      f.boxes.push_back({0.0, 0.0, static_cast<double>(w),
                         static_cast<double>(h), true, true,
                         CategoryName(audible_category)});
    }
    clip.annotations.push_back(std::move(f));
  }
  return clip;
}

DatasetIndex SyntheticDataset::Annotations(const SyntheticSplit& split) const {
  std::vector<FrameAnnotation> frames;
  for (const ClipSample& c : split.clips)
    frames.insert(frames.end(), c.annotations.begin(), c.annotations.end());
  return DatasetIndex(std::move(frames));
}

SyntheticDataset GenerateDataset(const GeneratorConfig& config) {
  config.Validate();
  SyntheticDataset ds;
  ds.config = config;
  SyntheticSplit* splits[3] = {&ds.train, &ds.val, &ds.test};
  const char* names[3] = {"train", "val", "test"};
  const int counts[3] = {config.train_clips, config.val_clips, config.test_clips};
  for (int s = 0; s < 3; ++s) {
    splits[s]->name = names[s];
    for (int i = 0; i < counts[s]; ++i) {
      Rng rng(config.seed, {static_cast<std::uint64_t>(s),
                            static_cast<std::uint64_t>(i)});
      const double u = rng.Uniform();
      double acc = 0.0;
      FrameClass scenario = kAllFrameClasses[4];
      for (std::size_t c = 0; c < 5; ++c) {
        acc += config.class_probs[c];
        if (u < acc) {
          scenario = kAllFrameClasses[c];
          break;
        }
      }
      const int category = static_cast<int>(rng.Index(config.num_classes));
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", names[s], i);
      splits[s]->clips.push_back(GenerateClip(config, id, category, scenario, rng));
    }
  }
  return ds;
}

std::string EncodeClip(const ClipSample& clip) {
  ByteWriter w;
  w.Magic("AVCL");
  w.U16(1);
  for (int d : {clip.frames, clip.height, clip.width, 1}) {
    w.U16(static_cast<std::uint16_t>(d));
  }
  for (float v : clip.video) w.F32(v);
  w.U16(static_cast<std::uint16_t>(clip.mel_bins));
  w.U16(static_cast<std::uint16_t>(clip.audio_steps));
  for (float v : clip.logmel) w.F32(v);
  w.U32(clip.labels);
  return w.bytes();
}

void DecodeClipInto(std::string_view bytes, ClipSample& clip) {
  ByteReader r(bytes, "clip file");
  r.ExpectMagic("AVCL");
  const std::uint16_t version = r.U16();
  if (version != 1) {
    throw ParseError("clip file: unsupported version " + std::to_string(version));
  }
  clip.frames = r.U16();
  clip.height = r.U16();
  clip.width = r.U16();
  const int channels = r.U16();
  if (channels != 1) throw ParseError("clip file: expected 1 video channel");
  const std::size_t nv = static_cast<std::size_t>(clip.frames) * clip.height * clip.width;
  if (nv * 4 > bytes.size()) throw ParseError("clip file: video larger than file");
  clip.video.resize(nv);
  for (float& v : clip.video) v = r.F32();
  clip.mel_bins = r.U16();
  clip.audio_steps = r.U16();
  const std::size_t na = static_cast<std::size_t>(clip.mel_bins) * clip.audio_steps;
  if (na * 4 > bytes.size()) throw ParseError("clip file: audio larger than file");
  clip.logmel.resize(na);
  for (float& v : clip.logmel) v = r.F32();
  clip.labels = r.U32();
  r.ExpectEnd();
}

ClipSample ReadClipFile(const std::filesystem::path& path) {
  ClipSample clip;
  clip.clip_id = path.stem().string();
  clip.audio_source_id = clip.clip_id;
  DecodeClipInto(ReadFile(path), clip);
  return clip;
}

void WriteDataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  OrderedJson manifest;
  manifest["format"] = "avsol-synthetic";
  manifest["version"] = 1;
  manifest["seed"] = ds.config.seed;
  manifest["config_hash"] = ds.config.Hash();
  manifest["config"] = OrderedJson::parse(ds.config.ToJson());
  OrderedJson splits;
  for (const SyntheticSplit* split : {&ds.train, &ds.val, &ds.test}) {
    const fs::path split_dir = dir / split->name;
    fs::create_directories(split_dir / "clips", ec);
    if (ec) throw DataError("cannot create " + split_dir.string());
    OrderedJson clips = OrderedJson::array();
    std::map<FrameClass, int> counts;
    for (const ClipSample& c : split->clips) {
      WriteFile(split_dir / "clips" / (c.clip_id + ".avcl"), EncodeClip(c));
      OrderedJson labels = OrderedJson::array();
      for (int k = 0; k < 32; ++k)
        if (c.labels & (1u << k)) labels.push_back(k);
      clips.push_back({{"id", c.clip_id},
                       {"scenario", FrameClassName(c.scenario)},
                       {"labels", labels}});
      ++counts[c.scenario];
    }
    WriteFile(split_dir / "annotations.jsonl",
              SerializeAnnotations(ds.Annotations(*split)));
    OrderedJson class_counts;
    for (FrameClass fc : kAllFrameClasses)
      class_counts[std::string(FrameClassName(fc))] = counts[fc];
    splits[split->name] = {{"annotations", split->name + "/annotations.jsonl"},
                           {"class_counts", class_counts},
                           {"clips", clips}};
  }
  manifest["splits"] = splits;
  WriteFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

SyntheticDataset LoadDataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(ReadFile(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  SyntheticDataset ds;
  try {
    ds.config = GeneratorConfig::FromJson(manifest.at("config").dump());
    for (SyntheticSplit* split : {&ds.train, &ds.val, &ds.test}) {
      split->name = split == &ds.train ? "train" : (split == &ds.val ? "val" : "test");
      const auto& js = manifest.at("splits").at(split->name);
      const DatasetIndex index = ParseAnnotations(
          ReadFile(dir / js.at("annotations").get<std::string>()));
      std::map<std::string, std::vector<FrameAnnotation>> by_clip;
      for (const FrameAnnotation& f : index.frames()) by_clip[f.video_id].push_back(f);
      for (const auto& jc : js.at("clips")) {
        ClipSample c = ReadClipFile(dir / split->name / "clips" /
                                    (jc.at("id").get<std::string>() + ".avcl"));
        c.scenario = FrameClassFromName(jc.at("scenario").get<std::string>());
        c.annotations = by_clip[c.clip_id];
        if (static_cast<int>(c.annotations.size()) != c.frames) {
          throw DataError("clip " + c.clip_id + " has " +
                          std::to_string(c.annotations.size()) +
                          " annotated frames, expected " + std::to_string(c.frames));
        }
        split->clips.push_back(std::move(c));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return ds;
}

ClipSample MakeNegativePair(const ClipSample& positive,
                            std::span<const ClipSample> pool, Rng& rng) {
  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].clip_id != positive.clip_id) donors.push_back(i);
  if (donors.empty()) {
    throw std::invalid_argument(
        "make_negative_pair: pool has no clip other than " + positive.clip_id);
  }
  const ClipSample& donor = pool[donors[rng.Index(donors.size())]];
  if (donor.mel_bins != positive.mel_bins ||
      donor.audio_steps != positive.audio_steps) {
    throw ShapeError("make_negative_pair: audio shape differs between " +
                     positive.clip_id + " and " + donor.clip_id);
  }
  ClipSample out = positive;
  out.logmel = donor.logmel;
  out.audio_source_id = donor.clip_id;
  out.avc_positive = false;
  return out;
}

void HorizontalFlip(ClipSample& clip) {
  for (int t = 0; t < clip.frames; ++t)
    for (int y = 0; y < clip.height; ++y) {
      auto row = clip.video.begin() +
                 static_cast<long>((static_cast<std::size_t>(t) * clip.height + y) *
                                   clip.width);
      std::reverse(row, row + clip.width);
    }
}

void ResizedCrop(ClipSample& clip, double min_scale, Rng& rng) {
  const double s = rng.Uniform(min_scale, 1.0);
  const int ch = std::max(1, static_cast<int>(std::lround(s * clip.height)));
  const int cw = std::max(1, static_cast<int>(std::lround(s * clip.width)));
  const int y0 = static_cast<int>(rng.Index(clip.height - ch + 1));
  const int x0 = static_cast<int>(rng.Index(clip.width - cw + 1));
  std::vector<float> out(clip.video.size());
  auto sample = [&](double v, int lo, int n) {
    return std::clamp(v, static_cast<double>(lo), static_cast<double>(lo + n - 1));
  };
  for (int t = 0; t < clip.frames; ++t)
    for (int y = 0; y < clip.height; ++y) {
      const double sy = sample(y0 + (y + 0.5) * ch / clip.height - 0.5, y0, ch);
      const int ya = static_cast<int>(std::floor(sy));
      const int yb = std::min(ya + 1, y0 + ch - 1);
      const double fy = sy - ya;
      for (int x = 0; x < clip.width; ++x) {
        const double sx = sample(x0 + (x + 0.5) * cw / clip.width - 0.5, x0, cw);
        const int xa = static_cast<int>(std::floor(sx));
        const int xb = std::min(xa + 1, x0 + cw - 1);
        const double fx = sx - xa;
        const double v = (1 - fy) * ((1 - fx) * clip.pixel(t, ya, xa) +
                                     fx * clip.pixel(t, ya, xb)) +
                         fy * ((1 - fx) * clip.pixel(t, yb, xa) +
                               fx * clip.pixel(t, yb, xb));
        out[(static_cast<std::size_t>(t) * clip.height + y) * clip.width + x] =
            static_cast<float>(v);
      }
    }
  clip.video = std::move(out);
}

}  // namespace avsol
