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

#include "avsol/dnm.h"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "avsol/errors.h"
#include "avsol/rng.h"
#include "json.hpp"

namespace avsol {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

Parameter UniformParameter(std::string name, Shape shape, std::size_t fan_in,
                           Rng& rng) {
  // Variance 1 / fan_in.
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<double> values(NumElements(shape));
  for (double& v : values) v = rng.Uniform(-bound, bound);
  return Parameter(std::move(name), Tensor(std::move(shape), std::move(values)));
}

Parameter ZeroParameter(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor::Zeros(std::move(shape)));
}

GruWeights MakeGru(const std::string& prefix, bool convolutional, int dim,
                   int kernel, Rng& rng) {
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t k = static_cast<std::size_t>(kernel);
  const Shape w_shape = convolutional ? Shape{k, k, d, d} : Shape{d, d};
  const Shape b_shape = convolutional ? Shape{d} : Shape{1, d};
  const std::size_t fan_in = convolutional ? k * k * d : d;
  auto w = [&](const char* n) {
    return UniformParameter(prefix + "." + n, w_shape, fan_in, rng);
  };
  auto b = [&](const char* n) { return ZeroParameter(prefix + "." + n, b_shape); };
  GruWeights g;
  g.wz = w("wz");
  g.uz = w("uz");
  g.bz = b("bz");
  g.wr = w("wr");
  g.ur = w("ur");
  g.br = b("br");
  g.wn = w("wn");
  g.un = w("un");
  g.bn = b("bn");
  return g;
}

void AppendGru(std::vector<Parameter*>& out, GruWeights& g) {
  for (Parameter* p : {&g.wz, &g.uz, &g.bz, &g.wr, &g.ur, &g.br, &g.wn, &g.un, &g.bn})
    out.push_back(p);
}

void RequireShape(std::string_view what, const Tensor& t, const Shape& expected) {
  if (!t.defined() || t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " +
                     ShapeToString(expected) + ", got " +
                     (t.defined() ? ShapeToString(t.shape()) : "undefined"));
  }
}

}  // namespace

std::string_view FusionModeName(FusionMode m) {
  return m == FusionMode::kStatic ? "static" : "cdf";
}

std::string_view TrainingModeName(TrainingMode m) {
  switch (m) {
    case TrainingMode::kAvcOnly:
      return "avc";
    case TrainingMode::kClsOnly:
      return "cls";
    case TrainingMode::kDnm:
      return "dnm";
  }
  return "dnm";
}

FusionMode ParseFusionMode(std::string_view name) {
  if (name == "static") return FusionMode::kStatic;
  if (name == "cdf") return FusionMode::kCdf;
  throw std::invalid_argument("unknown fusion mode '" + std::string(name) +
                              "' (expected static|cdf)");
}

TrainingMode ParseTrainingMode(std::string_view name) {
  if (name == "avc") return TrainingMode::kAvcOnly;
  if (name == "cls") return TrainingMode::kClsOnly;
  if (name == "dnm") return TrainingMode::kDnm;
  throw std::invalid_argument("unknown training mode '" + std::string(name) +
                              "' (expected avc|cls|dnm)");
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw ValidationError("model config: " + m);
  };
  for (int v : {image_h, image_w, mel_bins, steps, grid_w, grid_h, feature_dim,
                cls_dim, num_classes, visual_channels, visual_layers,
                audio_channels, audio_layers}) {
    if (v < 1) fail("all sizes must be >= 1");
  }
  if (gru_hidden != feature_dim) {
    fail("gru_hidden must equal feature_dim so the dynamic dot product is "
         "defined");
  }
  if (visual_pool_after < 1 || visual_pool_after >= visual_layers) {
    fail("visual_pool_after must lie in [1, visual_layers - 1]");
  }
  if (image_h % grid_h != 0 || image_w % grid_w != 0) {
    fail("image size must be a multiple of the grid size");
  }
  for (int k : {visual_kernel, audio_kernel, gru_kernel}) {
    if (k < 1 || k % 2 == 0) fail("kernel sizes must be odd and >= 1");
  }
  if (num_classes > 32) fail("num_classes must be <= 32");
}

std::string ModelConfig::ToJson() const {
  OrderedJson j;
  j["image_h"] = image_h;
  j["image_w"] = image_w;
  j["mel_bins"] = mel_bins;
  j["steps"] = steps;
  j["grid_w"] = grid_w;
  j["grid_h"] = grid_h;
  j["feature_dim"] = feature_dim;
  j["cls_dim"] = cls_dim;
  j["num_classes"] = num_classes;
  j["gru_hidden"] = gru_hidden;
  j["visual_channels"] = visual_channels;
  j["visual_layers"] = visual_layers;
  j["visual_kernel"] = visual_kernel;
  j["visual_pool_after"] = visual_pool_after;
  j["audio_channels"] = audio_channels;
  j["audio_layers"] = audio_layers;
  j["audio_kernel"] = audio_kernel;
  j["gru_kernel"] = gru_kernel;
  j["fusion"] = FusionModeName(fusion);
  j["mode"] = TrainingModeName(mode);
  return j.dump(2);
}

ModelConfig ModelConfig::FromJson(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model config: not an object");
  ModelConfig c;
  bool hidden_given = false;
  try {
    for (const auto& [key, value] : j.items()) {
      int* field = nullptr;
      if (key == "image_h") field = &c.image_h;
      else if (key == "image_w") field = &c.image_w;
      else if (key == "mel_bins") field = &c.mel_bins;
      else if (key == "steps") field = &c.steps;
      else if (key == "grid_w") field = &c.grid_w;
      else if (key == "grid_h") field = &c.grid_h;
      else if (key == "feature_dim") field = &c.feature_dim;
      else if (key == "cls_dim") field = &c.cls_dim;
      else if (key == "num_classes") field = &c.num_classes;
      else if (key == "gru_hidden") { field = &c.gru_hidden; hidden_given = true; }
      else if (key == "visual_channels") field = &c.visual_channels;
      else if (key == "visual_layers") field = &c.visual_layers;
      else if (key == "visual_kernel") field = &c.visual_kernel;
      else if (key == "visual_pool_after") field = &c.visual_pool_after;
      else if (key == "audio_channels") field = &c.audio_channels;
      else if (key == "audio_layers") field = &c.audio_layers;
      else if (key == "audio_kernel") field = &c.audio_kernel;
      else if (key == "gru_kernel") field = &c.gru_kernel;
      else if (key == "fusion") c.fusion = ParseFusionMode(value.get<std::string>());
      else if (key == "mode") c.mode = ParseTrainingMode(value.get<std::string>());
      else throw ParseError("model config: unknown field '" + key + "'");
      if (field) *field = value.get<int>();
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  if (!hidden_given) c.gru_hidden = c.feature_dim;
  c.Validate();
  return c;
}

Tensor StaticFusion(const Tensor& v, const Tensor& a) {
  if (v.rank() != 4 || a.rank() != 2 || v.dim(0) != a.dim(0) ||
      v.dim(3) != a.dim(1)) {
    throw ShapeError("static_fusion: v " + ShapeToString(v.shape()) +
                     " and a " + ShapeToString(a.shape()) +
                     " disagree on T or D");
  }
  const std::size_t steps = v.dim(0), cells = v.dim(1) * v.dim(2), d = v.dim(3);
  Tensor total;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor dots = DotAlongChannel(Reshape(Select(v, t), {cells, d}), Select(a, t));
    total = total.defined() ? Add(total, dots) : dots;
  }
  return Scale(total, 1.0 / static_cast<double>(steps));
}

Tensor Cdf(const Tensor& m_static, const Tensor& m_dynamic) {
  if (m_static.rank() != 1 || m_static.shape() != m_dynamic.shape()) {
    throw ShapeError("cdf: map shapes " + ShapeToString(m_static.shape()) +
                     " and " + ShapeToString(m_dynamic.shape()) + " differ");
  }
  return Mul(m_static, m_dynamic);
}

LocalHead LocalNormalize(const Tensor& avsm) {
  if (avsm.rank() != 1) {
    throw ShapeError("local_normalize: AVSM must be a vector, got " +
                     ShapeToString(avsm.shape()));
  }
  LocalHead head;
  head.m_loc = Sigmoid(avsm);
  head.z_avc = MaxGlobal(head.m_loc);
  head.avc_logit = MaxGlobal(avsm);
  return head;
}

GlobalHead GlobalAttend(const Tensor& avsm, const Tensor& v_cls,
                        const Tensor& fc_weight, const Tensor& fc_bias) {
  if (avsm.rank() != 1 || v_cls.rank() != 2 || v_cls.dim(0) != avsm.dim(0)) {
    throw ShapeError("global_attend: AVSM " + ShapeToString(avsm.shape()) +
                     " and v_cls " + ShapeToString(v_cls.shape()) +
                     " disagree on I");
  }
  GlobalHead head;
  head.w_att = Softmax(avsm, 0);
  head.v_att = MatMul(Reshape(head.w_att, {1, avsm.dim(0)}), v_cls);
  Tensor logits = Add(MatMul(head.v_att, fc_weight), fc_bias);
  head.class_logits = Reshape(logits, {logits.dim(1)});
  return head;
}

Tensor GruCellStep(const GruWeights& g, const Tensor& x, const Tensor& h) {
  auto gate = [&](const Parameter& w, const Parameter& u, const Parameter& b) {
    return Add(Add(MatMul(x, w.value), MatMul(h, u.value)), b.value);
  };
  Tensor z = Sigmoid(gate(g.wz, g.uz, g.bz));
  Tensor r = Sigmoid(gate(g.wr, g.ur, g.br));
  Tensor n = Tanh(Add(Add(MatMul(x, g.wn.value), MatMul(Mul(r, h), g.un.value)),
                      g.bn.value));
  return Add(n, Mul(z, Sub(h, n)));
}

Tensor ConvGruCellStep(const GruWeights& g, const Tensor& x, const Tensor& h) {
  auto gate = [&](const Parameter& w, const Parameter& u, const Parameter& b) {
    return Add(Conv2d(x, w.value, b.value), Conv2d(h, u.value, Tensor()));
  };
  Tensor z = Sigmoid(gate(g.wz, g.uz, g.bz));
  Tensor r = Sigmoid(gate(g.wr, g.ur, g.br));
  Tensor n = Tanh(Add(Conv2d(x, g.wn.value, g.bn.value),
                      Conv2d(Mul(r, h), g.un.value, Tensor())));
  return Add(n, Mul(z, Sub(h, n)));
}

DnmModel::DnmModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.Validate();
  Rng rng(seed, {0x646e6d});
  const auto& c = config_;
  auto conv = [&](const std::string& name, Shape kernel_shape, std::size_t cout) {
    std::size_t fan_in = 1;
    for (std::size_t i = 0; i + 1 < kernel_shape.size(); ++i) fan_in *= kernel_shape[i];
    ConvLayer layer;
    layer.kernel = UniformParameter(name + ".kernel", std::move(kernel_shape),
                                    fan_in, rng);
    layer.bias = ZeroParameter(name + ".bias", {cout});
    return layer;
  };
  const std::size_t vk = static_cast<std::size_t>(c.visual_kernel);
  const std::size_t ak = static_cast<std::size_t>(c.audio_kernel);
  const std::size_t d = static_cast<std::size_t>(c.feature_dim);

  std::size_t cin = 1;
  for (int l = 0; l < c.visual_layers; ++l) {
    const std::size_t cout =
        l + 1 == c.visual_layers ? d : static_cast<std::size_t>(c.visual_channels);
    visual_.push_back(conv("visual." + std::to_string(l), {vk, vk, vk, cin, cout}, cout));
    if (l + 1 == c.visual_pool_after) {
      const std::size_t dc = static_cast<std::size_t>(c.cls_dim);
      cls_branch_ = conv("cls_branch", {vk, vk, vk, cout, dc}, dc);
    }
    cin = cout;
  }
  cin = 1;
  for (int l = 0; l < c.audio_layers; ++l) {
    const std::size_t cout =
        l + 1 == c.audio_layers ? d : static_cast<std::size_t>(c.audio_channels);
    audio_.push_back(conv("audio." + std::to_string(l), {ak, ak, cin, cout}, cout));
    cin = cout;
  }
  if (c.fusion == FusionMode::kCdf) {
    conv_gru_ = MakeGru("conv_gru", true, c.feature_dim, c.gru_kernel, rng);
    audio_gru_ = MakeGru("audio_gru", false, c.feature_dim, 1, rng);
  }
  fc_weight_ = UniformParameter(
      "fc.weight",
      {static_cast<std::size_t>(c.cls_dim), static_cast<std::size_t>(c.num_classes)},
      static_cast<std::size_t>(c.cls_dim), rng);
  fc_bias_ = ZeroParameter("fc.bias", {1, static_cast<std::size_t>(c.num_classes)});
}

VisualFeatures DnmModel::EncodeVisual(const Tensor& clip) const {
  const auto& c = config_;
  RequireShape("encode_visual", clip,
               {static_cast<std::size_t>(c.steps), static_cast<std::size_t>(c.image_h),
                static_cast<std::size_t>(c.image_w), 1});
  for (double x : clip.data()) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::domain_error("encode_visual: pixel values must lie in [0, 1]");
    }
  }
  VisualFeatures out;
  Tensor h = clip;
  for (std::size_t l = 0; l < visual_.size(); ++l) {
    h = Conv3d(h, visual_[l].kernel.value, visual_[l].bias.value);
    if (l + 1 < visual_.size()) h = Tanh(h);
    if (static_cast<int>(l) + 1 == c.visual_pool_after) {
      h = AvgPool(h, static_cast<std::size_t>(c.image_h / c.grid_h),
                  static_cast<std::size_t>(c.image_w / c.grid_w));
      Tensor branch = Tanh(Conv3d(h, cls_branch_.kernel.value, cls_branch_.bias.value));
      out.v_cls = Reshape(Mean(branch, 0),
                          {static_cast<std::size_t>(c.cells()),
                           static_cast<std::size_t>(c.cls_dim)});
    }
  }
  out.v = h;
  return out;
}

Tensor DnmModel::EncodeAudio(const Tensor& logmel) const {
  const auto& c = config_;
  RequireShape("encode_audio", logmel,
               {static_cast<std::size_t>(c.mel_bins), static_cast<std::size_t>(c.steps)});
  Tensor h = Reshape(logmel, {logmel.dim(0), logmel.dim(1), 1});
  for (std::size_t l = 0; l < audio_.size(); ++l) {
    h = Conv2d(h, audio_[l].kernel.value, audio_[l].bias.value);
    if (l + 1 < audio_.size()) h = Tanh(h);
  }
  return Mean(h, 0);  // pool the mel axis -> [T, D]
}

Tensor DnmModel::DynamicFusion(const Tensor& v, const Tensor& a) const {
  if (!conv_gru_ || !audio_gru_) {
    throw std::logic_error("dynamic_fusion: model was built for static fusion");
  }
  const auto& c = config_;
  const std::size_t steps = static_cast<std::size_t>(c.steps);
  const std::size_t d = static_cast<std::size_t>(c.feature_dim);
  const std::size_t gh = static_cast<std::size_t>(c.grid_h);
  const std::size_t gw = static_cast<std::size_t>(c.grid_w);
  RequireShape("dynamic_fusion (v)", v, {steps, gh, gw, d});
  RequireShape("dynamic_fusion (a)", a, {steps, d});
  Tensor hv = Tensor::Zeros({gh, gw, d});
  Tensor ha = Tensor::Zeros({1, d});
  for (std::size_t t = 0; t < steps; ++t) {
    hv = ConvGruCellStep(*conv_gru_, Select(v, t), hv);
    ha = GruCellStep(*audio_gru_, Reshape(Select(a, t), {1, d}), ha);
  }
  return DotAlongChannel(Reshape(hv, {gh * gw, d}), Reshape(ha, {d}));
}

ModelOutput DnmModel::Heads(const Tensor& avsm, const Tensor& v_cls) const {
  RequireShape("heads", avsm, {static_cast<std::size_t>(config_.cells())});
  ModelOutput out;
  out.avsm = avsm;
  LocalHead local = LocalNormalize(avsm);
  out.m_loc = local.m_loc;
  out.z_avc = local.z_avc;
  out.avc_logit = local.avc_logit;
  GlobalHead global = GlobalAttend(avsm, v_cls, fc_weight_.value, fc_bias_.value);
  out.w_att = global.w_att;
  out.v_att = global.v_att;
  out.class_logits = global.class_logits;
  return out;
}

ModelOutput DnmModel::Forward(const Tensor& clip, const Tensor& logmel) const {
  VisualFeatures vf = EncodeVisual(clip);
  Tensor a = EncodeAudio(logmel);
  Tensor m_static = StaticFusion(vf.v, a);
  if (config_.fusion == FusionMode::kStatic) {
    ModelOutput out = Heads(m_static, vf.v_cls);
    out.m_static = m_static;
    return out;
  }
  Tensor m_dynamic = DynamicFusion(vf.v, a);
  Tensor m_cdf = Cdf(m_static, m_dynamic);
  ModelOutput out = Heads(m_cdf, vf.v_cls);
  out.m_static = m_static;
  out.m_dynamic = m_dynamic;
  out.m_cdf = m_cdf;
  return out;
}

std::vector<Parameter*> DnmModel::parameters() {
  std::vector<Parameter*> out;
  for (ConvLayer& l : visual_) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  out.push_back(&cls_branch_.kernel);
  out.push_back(&cls_branch_.bias);
  for (ConvLayer& l : audio_) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  if (conv_gru_) AppendGru(out, *conv_gru_);
  if (audio_gru_) AppendGru(out, *audio_gru_);
  out.push_back(&fc_weight_);
  out.push_back(&fc_bias_);
  return out;
}

std::vector<const Parameter*> DnmModel::parameters() const {
  auto mutable_params = const_cast<DnmModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<Parameter*> DnmModel::classification_parameters() {
  return {&cls_branch_.kernel, &cls_branch_.bias, &fc_weight_, &fc_bias_};
}

std::vector<std::vector<double>> DnmModel::SnapshotValues() const {
  std::vector<std::vector<double>> out;
  for (const Parameter* p : parameters()) {
    auto d = p->value.data();
    out.emplace_back(d.begin(), d.end());
  }
  return out;
}

void DnmModel::RestoreValues(const std::vector<std::vector<double>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) {
    throw std::invalid_argument("restore_values: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i]->value.mutable_data();
    if (values[i].size() != dst.size()) {
      throw std::invalid_argument("restore_values: size mismatch for " +
                                  params[i]->name);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

LossTerms MultitaskLoss(const ModelOutput& output, int avc_label,
                        const std::optional<std::vector<double>>& class_target,
                        TrainingMode mode) {
  if (avc_label != 0 && avc_label != 1) {
    throw std::invalid_argument("multitask_loss: avc_label must be 0 or 1");
  }
  if (avc_label == 1 && !class_target) {
    throw std::invalid_argument(
        "multitask_loss: a positive pair needs a class label");
  }
  LossTerms terms;
  if (mode != TrainingMode::kClsOnly) {
    Tensor avc = BceWithLogits(Reshape(output.avc_logit, {1}),
                               Tensor({1}, {static_cast<double>(avc_label)}));
    terms.avc = avc.item();
    terms.total = avc;
  }
  if (mode != TrainingMode::kAvcOnly && avc_label == 1) {
    const std::size_t k = output.class_logits.size();
    if (class_target->size() != k) {
      throw ShapeError("multitask_loss: class label has " +
                       std::to_string(class_target->size()) +
                       " entries, model has " + std::to_string(k) + " classes");
    }
    Tensor cls = BceWithLogits(output.class_logits, Tensor({k}, *class_target));
    terms.cls = cls.item();
    terms.total = terms.total.defined() ? Add(terms.total, cls) : cls;
  }
  return terms;
}

std::vector<double> LocalizationMap(const ModelOutput& output,
                                    TrainingMode mode) {
  const Tensor& map =
      mode == TrainingMode::kClsOnly ? output.w_att : output.m_loc;
  return {map.data().begin(), map.data().end()};
}

}  // namespace avsol
