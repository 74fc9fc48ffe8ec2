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

#ifndef AVSOL_DNM_H_
#define AVSOL_DNM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avsol/parameter.h"
#include "avsol/tensor.h"

namespace avsol {

enum class FusionMode { kStatic, kCdf };
enum class TrainingMode { kAvcOnly, kClsOnly, kDnm };

std::string_view FusionModeName(FusionMode m);
std::string_view TrainingModeName(TrainingMode m);
// Accept "static"/"cdf" and "avc"/"cls"/"dnm"; throw std::invalid_argument.
FusionMode ParseFusionMode(std::string_view name);
TrainingMode ParseTrainingMode(std::string_view name);

struct ModelConfig {
  // Input geometry. Video is [steps, image_h, image_w, 1]; the log-mel grid
  // is [mel_bins, steps].
  int image_h = 24;
  int image_w = 24;
  int mel_bins = 16;
  int steps = 8;  // T, shared by the video and audio features
  // Similarity map grid, I = grid_w * grid_h.
  int grid_w = 6;
  int grid_h = 6;
  int feature_dim = 8;  // D
  int cls_dim = 8;      // D'
  int num_classes = 4;  // K
  int gru_hidden = 8;   // must equal feature_dim
  int visual_channels = 6;
  int visual_layers = 2;
  int visual_kernel = 3;  // cubic 3D kernels
  // Convolutions run at image resolution before average pooling to the grid;
  // the classification branch reads the pooled features.
  int visual_pool_after = 1;
  int audio_channels = 6;
  int audio_layers = 2;
  int audio_kernel = 3;
  int gru_kernel = 3;  // ConvGRU gate convolutions
  FusionMode fusion = FusionMode::kCdf;
  TrainingMode mode = TrainingMode::kDnm;

  int cells() const { return grid_w * grid_h; }
  // Throws ValidationError.
  void Validate() const;
  std::string ToJson() const;
  // Missing keys keep defaults (gru_hidden follows feature_dim); unknown keys
  // are rejected.
  static ModelConfig FromJson(std::string_view json);
};

struct VisualFeatures {
  Tensor v;      // [T, grid_h, grid_w, D]; cell i = y * grid_w + x
  Tensor v_cls;  // [I, D']
};

struct ModelOutput {
  Tensor avsm;          // s, [I]
  Tensor m_loc;         // sigmoid(s), [I]
  Tensor z_avc;         // max(m_loc), rank 0
  Tensor avc_logit;     // max(s), rank 0; z_avc == sigmoid(avc_logit)
  Tensor w_att;         // softmax(s), [I]
  Tensor v_att;         // [1, D']
  Tensor class_logits;  // [K]
  Tensor m_static;      // [I]
  Tensor m_dynamic;     // [I], CDF only
  Tensor m_cdf;         // [I], CDF only
};

// M_Static[i] = mean_t <v_t^i, a_t>.
Tensor StaticFusion(const Tensor& v, const Tensor& a);
// Elementwise product of the static and dynamic maps.
Tensor Cdf(const Tensor& m_static, const Tensor& m_dynamic);

struct LocalHead {
  Tensor m_loc;
  Tensor z_avc;
  Tensor avc_logit;
};
// Per-cell sigmoid followed by global max pooling.
LocalHead LocalNormalize(const Tensor& avsm);

struct GlobalHead {
  Tensor w_att;
  Tensor v_att;
  Tensor class_logits;
};
// Softmax attention over cells, attention-weighted sum of v_cls, then a
// fully connected layer (fc_weight [D', K], fc_bias [1, K]).
GlobalHead GlobalAttend(const Tensor& avsm, const Tensor& v_cls,
                        const Tensor& fc_weight, const Tensor& fc_bias);

// Gated recurrent cells with the update/reset/candidate equations
//   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
//   n = tanh(Wn x + Un (r * h) + bn), h' = n + z * (h - n).
// The ConvGRU replaces each affine map by a 'same' convolution.
struct GruWeights {
  Parameter wz, uz, bz, wr, ur, br, wn, un, bn;
};

// x, h: [1, D]; weights [D, D]; biases [1, D].
Tensor GruCellStep(const GruWeights& gru, const Tensor& x, const Tensor& h);
// x, h: [H, W, D]; kernels [k, k, D, D]; biases [D].
Tensor ConvGruCellStep(const GruWeights& gru, const Tensor& x, const Tensor& h);

class DnmModel {
 public:
  // Weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)) from `seed`; biases zero.
  DnmModel(ModelConfig config, std::uint64_t seed);

  DnmModel(const DnmModel&) = delete;
  DnmModel& operator=(const DnmModel&) = delete;
  DnmModel(DnmModel&&) = default;
  DnmModel& operator=(DnmModel&&) = default;

  const ModelConfig& config() const { return config_; }

  // clip: [T, image_h, image_w, 1] with values in [0, 1].
  VisualFeatures EncodeVisual(const Tensor& clip) const;
  // logmel: [mel_bins, T] -> a: [T, D].
  Tensor EncodeAudio(const Tensor& logmel) const;
  // ConvGRU over v_1..v_T and GRU over a_1..a_T from zero states; returns
  // M_Dynamic[i] = <v'_T^i, a'_T>.
  Tensor DynamicFusion(const Tensor& v, const Tensor& a) const;
  // Both normalization heads read the same similarity map.
  ModelOutput Heads(const Tensor& avsm, const Tensor& v_cls) const;
  ModelOutput Forward(const Tensor& clip, const Tensor& logmel) const;

  // Stable order: visual, classification branch, audio, GRUs, head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  // The parameters that only the classification task trains.
  std::vector<Parameter*> classification_parameters();

  std::vector<std::vector<double>> SnapshotValues() const;
  void RestoreValues(const std::vector<std::vector<double>>& values);

 private:
  struct ConvLayer {
    Parameter kernel;
    Parameter bias;
  };

  ModelConfig config_;
  std::vector<ConvLayer> visual_;
  ConvLayer cls_branch_;
  std::vector<ConvLayer> audio_;
  std::optional<GruWeights> conv_gru_;
  std::optional<GruWeights> audio_gru_;
  Parameter fc_weight_;
  Parameter fc_bias_;
};

struct LossTerms {
  Tensor total;  // undefined when nothing contributes (e.g. ClsOnly, AVC=0)
  double avc = 0.0;
  double cls = 0.0;
};

// BCE(z_avc, avc_label) + [avc_label = 1] * sum_k BCE(sigmoid(logit_k), y_k),
// restricted to the terms that `mode` trains. The AVC term is evaluated from
// max(s), which equals BCE(z_avc, .) without saturating. `class_target` is a
// K-vector of 0/1 and is required when avc_label = 1.
LossTerms MultitaskLoss(const ModelOutput& output, int avc_label,
                        const std::optional<std::vector<double>>& class_target,
                        TrainingMode mode);

// The map a model of this mode is evaluated on: M_loc for AVC and DNM
// training, w_att for classification-only training.
std::vector<double> LocalizationMap(const ModelOutput& output,
                                    TrainingMode mode);

}  // namespace avsol

#endif  // AVSOL_DNM_H_
