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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "avsol/checks.h"
#include "avsol/errors.h"
#include "avsol/rng.h"

namespace avsol {
namespace {

ModelConfig Tiny() {
  ModelConfig c;
  c.image_h = 12;
  c.image_w = 12;
  c.mel_bins = 6;
  c.steps = 3;
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

Tensor RandomTensor(Rng& rng, Shape shape, double lo, double hi, bool requires_grad = false) {
  std::vector<double> v(NumElements(shape));
  for (auto& x : v) x = rng.Uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor RandomClip(Rng& rng, const ModelConfig& c) {
  return RandomTensor(rng, {static_cast<std::size_t>(c.steps), static_cast<std::size_t>(c.image_h),
                            static_cast<std::size_t>(c.image_w), 1},
                      0.0, 1.0);
}

Tensor RandomLogmel(Rng& rng, const ModelConfig& c) {
  return RandomTensor(rng, {static_cast<std::size_t>(c.mel_bins), static_cast<std::size_t>(c.steps)},
                      -1.0, 1.0);
}

std::vector<double> Values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::map<std::string, Parameter*> ByName(DnmModel& model) {
  std::map<std::string, Parameter*> out;
  for (Parameter* p : model.parameters()) out[p->name] = p;
  return out;
}

TEST(ModelConfig, JsonRoundTripAndErrors) {
  ModelConfig c = Tiny();
  c.fusion = FusionMode::kStatic;
  c.mode = TrainingMode::kAvcOnly;
  const ModelConfig back = ModelConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_THROW(ModelConfig::FromJson(R"({"grid_width": 4})"), ParseError);
  EXPECT_THROW(ModelConfig::FromJson(R"({"fusion": "dynamic"})"), ParseError);
  // gru_hidden follows feature_dim unless given.
  EXPECT_EQ(ModelConfig::FromJson(R"({"feature_dim": 12})").gru_hidden, 12);
  EXPECT_THROW(ModelConfig::FromJson(R"({"feature_dim": 12, "gru_hidden": 8})"), ValidationError);
}

TEST(ModelConfig, ValidateRejectsBadGeometry) {
  auto bad = [](auto edit) {
    ModelConfig c = Tiny();
    edit(c);
    EXPECT_THROW(c.Validate(), ValidationError);
  };
  bad([](ModelConfig& c) { c.grid_w = 5; });
  bad([](ModelConfig& c) { c.visual_kernel = 2; });
  bad([](ModelConfig& c) { c.num_classes = 0; });
  bad([](ModelConfig& c) { c.gru_hidden = 5; });
  bad([](ModelConfig& c) { c.visual_pool_after = 2; });
  EXPECT_NO_THROW(Tiny().Validate());
}

TEST(Encoders, ShapeContract) {
  ModelConfig c;
  c.grid_w = c.grid_h = 6;
  c.steps = 4;
  c.feature_dim = c.gru_hidden = 16;
  c.cls_dim = 8;
  c.num_classes = 4;
  const DnmModel model(c, 1);
  Rng rng(1);
  const ModelOutput out = model.Forward(RandomClip(rng, c), RandomLogmel(rng, c));
  EXPECT_EQ(out.m_loc.shape(), (Shape{36}));
  EXPECT_EQ(out.w_att.shape(), (Shape{36}));
  EXPECT_EQ(out.class_logits.shape(), (Shape{4}));
  EXPECT_EQ(out.v_att.shape(), (Shape{1, 8}));
  const VisualFeatures vf = model.EncodeVisual(RandomClip(rng, c));
  EXPECT_EQ(vf.v.shape(), (Shape{4, 6, 6, 16}));
  EXPECT_EQ(vf.v_cls.shape(), (Shape{36, 8}));
  EXPECT_EQ(model.EncodeAudio(RandomLogmel(rng, c)).shape(), (Shape{4, 16}));
}

TEST(Encoders, InputErrors) {
  const ModelConfig c = Tiny();
  const DnmModel model(c, 1);
  EXPECT_THROW(model.EncodeVisual(Tensor::Zeros({3, 12, 10, 1})), ShapeError);
  EXPECT_THROW(model.EncodeVisual(Tensor::Full({3, 12, 12, 1}, 1.5)), std::domain_error);
  EXPECT_THROW(model.EncodeAudio(Tensor::Zeros({6, 4})), ShapeError);
}

TEST(Encoders, ZeroInputsGiveZeroFeatures) {
  const ModelConfig c = Tiny();
  const DnmModel model(c, 2);
  const VisualFeatures vf = model.EncodeVisual(Tensor::Zeros({3, 12, 12, 1}));
  for (double x : vf.v.data()) EXPECT_EQ(x, 0.0);
  const Tensor a = model.EncodeAudio(Tensor::Zeros({6, 3}));
  for (double x : a.data()) EXPECT_EQ(x, 0.0);
}

// Equal up to the summation order inside the average pooling.
TEST(Encoders, PointwiseVisualEncoderIsFlipEquivariant) {
  ModelConfig c = Tiny();
  c.visual_kernel = 1;
  const DnmModel model(c, 3);
  Rng rng(3);
  const Tensor clip = RandomClip(rng, c);
  std::vector<double> flipped(clip.size());
  for (int t = 0; t < 3; ++t)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) flipped[(t * 12 + y) * 12 + x] = clip[(t * 12 + y) * 12 + 11 - x];
  const Tensor v = model.EncodeVisual(clip).v;
  const Tensor vf = model.EncodeVisual(Tensor(clip.shape(), flipped)).v;
  for (int t = 0; t < 3; ++t)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x)
        for (int d = 0; d < 4; ++d)
          EXPECT_NEAR(vf[((t * 3 + y) * 3 + x) * 4 + d], v[((t * 3 + y) * 3 + 2 - x) * 4 + d],
                      1e-14);
}

TEST(Encoders, PointwiseAudioEncoderIsShiftEquivariant) {
  ModelConfig c = Tiny();
  c.audio_kernel = 1;
  const DnmModel model(c, 4);
  Rng rng(4);
  const Tensor logmel = RandomLogmel(rng, c);
  std::vector<double> shifted(logmel.size(), 0.0);
  for (int m = 0; m < 6; ++m)
    for (int t = 1; t < 3; ++t) shifted[m * 3 + t] = logmel[m * 3 + t - 1];
  const Tensor a = model.EncodeAudio(logmel);
  const Tensor as = model.EncodeAudio(Tensor(logmel.shape(), shifted));
  for (int d = 0; d < 4; ++d) {
    EXPECT_EQ(as[d], 0.0);
    for (int t = 1; t < 3; ++t) EXPECT_EQ(as[t * 4 + d], a[(t - 1) * 4 + d]);
  }
}

TEST(StaticFusion, ZeroAudioAndBasisVectors) {
  Rng rng(5);
  const Tensor zero = StaticFusion(RandomTensor(rng, {2, 2, 2, 3}, -1, 1), Tensor::Zeros({2, 3}));
  for (double x : zero.data()) EXPECT_EQ(x, 0.0);
  std::vector<double> v(1 * 1 * 2 * 3, 0.0);
  v[0 * 3 + 1] = 1.0;  // cell 0 = e_1
  v[1 * 3 + 2] = 1.0;  // cell 1 = e_2
  const Tensor m = StaticFusion(Tensor({1, 1, 2, 3}, v), Tensor({1, 3}, {0.0, 2.5, 0.0}));
  EXPECT_EQ(Values(m), (std::vector<double>{2.5, 0.0}));
}

TEST(StaticFusion, MatchesTripleLoop) {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor v = RandomTensor(rng, {3, 2, 2, 2}, -2, 2);
    const Tensor a = RandomTensor(rng, {3, 2}, -2, 2);
    const Tensor m = StaticFusion(v, a);
    for (int i = 0; i < 4; ++i) {
      double acc = 0.0;
      for (int t = 0; t < 3; ++t) {
        double dot = 0.0;
        for (int d = 0; d < 2; ++d) dot += v[(t * 4 + i) * 2 + d] * a[t * 2 + d];
        acc += dot;
      }
      EXPECT_NEAR(m[i], acc / 3.0, 1e-15);
    }
  }
  EXPECT_THROW(StaticFusion(Tensor::Zeros({3, 2, 2, 2}), Tensor::Zeros({2, 2})), ShapeError);
}

TEST(Cdf, IdentityCommutativityAndLoop) {
  Rng rng(7);
  const Tensor x = RandomTensor(rng, {8}, -3, 3), y = RandomTensor(rng, {8}, -3, 3);
  EXPECT_EQ(Values(Cdf(x, Tensor::Full({8}, 1.0))), Values(x));
  EXPECT_EQ(Values(Cdf(x, y)), Values(Cdf(y, x)));
  for (int i = 0; i < 8; ++i) EXPECT_EQ(Cdf(x, y)[i], x[i] * y[i]);
  EXPECT_THROW(Cdf(x, Tensor::Zeros({7})), ShapeError);
}

TEST(DynamicFusion, ZeroInputsStayZero) {
  const ModelConfig c = Tiny();
  const DnmModel model(c, 8);
  const Tensor m = model.DynamicFusion(Tensor::Zeros({3, 3, 3, 4}), Tensor::Zeros({3, 4}));
  for (double x : m.data()) EXPECT_EQ(x, 0.0);
}

TEST(DynamicFusion, StaticModelHasNoDynamicPath) {
  ModelConfig c = Tiny();
  c.fusion = FusionMode::kStatic;
  const DnmModel model(c, 8);
  EXPECT_THROW(model.DynamicFusion(Tensor::Zeros({3, 3, 3, 4}), Tensor::Zeros({3, 4})),
               std::logic_error);
}

// Scalar reference for one GRU cell from a zero state:
// z = sigmoid(Wz x + bz), n = tanh(Wn x + bn), h' = (1 - z) n.
TEST(DynamicFusion, SingleStepMatchesHandComposedCells) {
  ModelConfig c = Tiny();
  c.steps = 1;
  DnmModel model(c, 9);
  auto p = ByName(model);
  Rng rng(9);
  for (Parameter* b : {p["conv_gru.bz"], p["conv_gru.bn"], p["audio_gru.bz"], p["audio_gru.bn"]})
    for (double& x : b->value.mutable_data()) x = rng.Uniform(-0.5, 0.5);
  const Tensor v = RandomTensor(rng, {1, 3, 3, 4}, -1, 1);
  const Tensor a = RandomTensor(rng, {1, 4}, -1, 1);
  const Tensor m = model.DynamicFusion(v, a);

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> ha(4);
  for (int o = 0; o < 4; ++o) {
    double zs = p["audio_gru.bz"]->value[o], ns = p["audio_gru.bn"]->value[o];
    for (int d = 0; d < 4; ++d) {
      zs += a[d] * p["audio_gru.wz"]->value[d * 4 + o];
      ns += a[d] * p["audio_gru.wn"]->value[d * 4 + o];
    }
    ha[o] = (1.0 - sigmoid(zs)) * std::tanh(ns);
  }
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      double dot = 0.0;
      for (int o = 0; o < 4; ++o) {
        double zs = p["conv_gru.bz"]->value[o], ns = p["conv_gru.bn"]->value[o];
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= 3 || xx < 0 || xx >= 3) continue;
            for (int ci = 0; ci < 4; ++ci) {
              const double in = v[(yy * 3 + xx) * 4 + ci];
              const std::size_t k = (((dy + 1) * 3 + dx + 1) * 4 + ci) * 4 + o;
              zs += in * p["conv_gru.wz"]->value[k];
              ns += in * p["conv_gru.wn"]->value[k];
            }
          }
        dot += (1.0 - sigmoid(zs)) * std::tanh(ns) * ha[o];
      }
      EXPECT_NEAR(m[y * 3 + x], dot, 1e-12);
    }
}

TEST(GruCellStep, MatchesStandardEquationsFromNonzeroState) {
  Rng rng(10);
  auto param = [&](Shape s) { return Parameter("p", RandomTensor(rng, std::move(s), -0.8, 0.8)); };
  GruWeights g{param({3, 2}), param({2, 2}), param({1, 2}), param({3, 2}), param({2, 2}),
               param({1, 2}), param({3, 2}), param({2, 2}), param({1, 2})};
  const Tensor x = RandomTensor(rng, {1, 3}, -1, 1), h = RandomTensor(rng, {1, 2}, -1, 1);
  const Tensor out = GruCellStep(g, x, h);
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto affine = [&](const Parameter& w, const std::vector<double>& in, std::size_t rows, int o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += in[r] * w.value[r * 2 + o];
    return acc;
  };
  const std::vector<double> xv = Values(x), hv = Values(h);
  std::vector<double> r(2), z(2);
  for (int o = 0; o < 2; ++o) {
    z[o] = sigmoid(affine(g.wz, xv, 3, o) + affine(g.uz, hv, 2, o) + g.bz.value[o]);
    r[o] = sigmoid(affine(g.wr, xv, 3, o) + affine(g.ur, hv, 2, o) + g.br.value[o]);
  }
  const std::vector<double> rh = {r[0] * hv[0], r[1] * hv[1]};
  for (int o = 0; o < 2; ++o) {
    const double n = std::tanh(affine(g.wn, xv, 3, o) + affine(g.un, rh, 2, o) + g.bn.value[o]);
    EXPECT_NEAR(out[o], (1.0 - z[o]) * n + z[o] * hv[o], 1e-14);
  }
}

TEST(DynamicFusion, GradientsPassFiniteDifferences) {
  const ModelConfig c = Tiny();
  DnmModel model(c, 11);
  Rng rng(11);
  const Tensor v = RandomTensor(rng, {3, 3, 3, 4}, -1, 1);
  const Tensor a = RandomTensor(rng, {3, 4}, -1, 1);
  std::vector<Tensor> inputs;
  for (Parameter* p : model.parameters())
    if (p->name.rfind("conv_gru", 0) == 0 || p->name.rfind("audio_gru", 0) == 0)
      inputs.push_back(p->value);
  ASSERT_EQ(inputs.size(), 18u);
  GradCheckOptions o;
  o.max_components_per_input = 12;
  const auto r = GradCheck(
      [&](const std::vector<Tensor>&) { return Sum(Mul(model.DynamicFusion(v, a), Tensor::Full({9}, 0.7))); },
      inputs, o);
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(LocalNormalize, Examples) {
  const LocalHead zero = LocalNormalize(Tensor::Zeros({5}));
  for (double x : zero.m_loc.data()) EXPECT_EQ(x, 0.5);
  EXPECT_EQ(zero.z_avc.item(), 0.5);

  Rng rng(12);
  const Tensor s = RandomTensor(rng, {6}, -3, 3);
  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  std::vector<double> ps(6);
  for (int i = 0; i < 6; ++i) ps[i] = s[perm[i]];
  const LocalHead a = LocalNormalize(s), b = LocalNormalize(Tensor({6}, ps));
  for (int i = 0; i < 6; ++i) EXPECT_EQ(b.m_loc[i], a.m_loc[perm[i]]);
  EXPECT_EQ(a.z_avc.item(), b.z_avc.item());

  Tensor u({4}, {0.1, 2.0, -1.0, 0.5}, true);
  Backward(LocalNormalize(u).z_avc);
  const double sg = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_EQ(u.grad()[0], 0.0);
  EXPECT_NEAR(u.grad()[1], sg * (1.0 - sg), 1e-15);
  EXPECT_EQ(u.grad()[2], 0.0);
  EXPECT_EQ(u.grad()[3], 0.0);
}

TEST(GlobalAttend, Examples) {
  Rng rng(13);
  const Tensor v_cls = RandomTensor(rng, {4, 3}, -1, 1);
  const Tensor w = RandomTensor(rng, {3, 2}, -1, 1), b = RandomTensor(rng, {1, 2}, -1, 1);
  const GlobalHead flat = GlobalAttend(Tensor::Full({4}, 0.3), v_cls, w, b);
  for (int d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += v_cls[i * 3 + d] / 4.0;
    EXPECT_NEAR(flat.v_att[d], mean, 1e-15);
  }
  for (double x : flat.w_att.data()) EXPECT_NEAR(x, 0.25, 1e-15);
  const GlobalHead peaked = GlobalAttend(Tensor({4}, {0, 0, 1000, 0}), v_cls, w, b);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(peaked.v_att[d], v_cls[2 * 3 + d], 1e-6);
  EXPECT_THROW(GlobalAttend(Tensor::Zeros({5}), v_cls, w, b), ShapeError);
}

TEST(Forward, HeadContractsOnRandomForwards) {
  ModelConfig c = Tiny();
  Rng rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    c.fusion = rep % 2 ? FusionMode::kStatic : FusionMode::kCdf;
    const DnmModel model(c, 100 + rep);
    const Tensor clip = RandomClip(rng, c);
    const ModelOutput out = model.Forward(clip, RandomLogmel(rng, c));
    const auto m = Values(out.m_loc);
    EXPECT_EQ(out.z_avc.item(), *std::max_element(m.begin(), m.end()));
    EXPECT_EQ(out.z_avc.item(), 1.0 / (1.0 + std::exp(-out.avc_logit.item())));
    const auto w = Values(out.w_att);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);

    // Recomputing both heads from the stored similarity map.
    const Tensor v_cls = model.EncodeVisual(clip).v_cls;
    const ModelOutput again = model.Heads(out.avsm, v_cls);
    EXPECT_EQ(Values(again.m_loc), m);
    EXPECT_EQ(Values(again.w_att), w);
    EXPECT_EQ(Values(again.class_logits), Values(out.class_logits));

    std::vector<double> shifted = Values(out.avsm);
    for (double& x : shifted) x += 3.7;
    const ModelOutput moved = model.Heads(Tensor(out.avsm.shape(), shifted), v_cls);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(moved.class_logits[k], out.class_logits[k], 1e-9);

    const auto s = Values(out.avsm);
    std::vector<std::size_t> os(s.size()), om(s.size());
    std::iota(os.begin(), os.end(), 0);
    std::iota(om.begin(), om.end(), 0);
    std::stable_sort(os.begin(), os.end(), [&](auto i, auto j) { return s[i] < s[j]; });
    std::stable_sort(om.begin(), om.end(), [&](auto i, auto j) { return m[i] < m[j]; });
    EXPECT_EQ(os, om);
  }
}

TEST(Forward, CdfWithUnitDynamicMapEqualsStatic) {
  ModelConfig c = Tiny();
  DnmModel cdf(c, 15);
  c.fusion = FusionMode::kStatic;
  DnmModel stat(c, 15);
  auto cdf_params = ByName(cdf);
  for (Parameter* p : stat.parameters()) {
    auto src = cdf_params.at(p->name)->value.data();
    std::copy(src.begin(), src.end(), p->value.mutable_data().begin());
  }
  Rng rng(15);
  const Tensor clip = RandomClip(rng, Tiny()), logmel = RandomLogmel(rng, Tiny());
  const ModelOutput s = stat.Forward(clip, logmel);
  const VisualFeatures vf = cdf.EncodeVisual(clip);
  const Tensor m_static = StaticFusion(vf.v, cdf.EncodeAudio(logmel));
  const ModelOutput forced = cdf.Heads(Cdf(m_static, Tensor::Full({9}, 1.0)), vf.v_cls);
  EXPECT_EQ(Values(forced.m_loc), Values(s.m_loc));
  EXPECT_EQ(Values(forced.w_att), Values(s.w_att));
  EXPECT_EQ(Values(forced.class_logits), Values(s.class_logits));
  // Unforced, the two modes differ only through the map handed to the heads.
  const ModelOutput full = cdf.Forward(clip, logmel);
  EXPECT_EQ(Values(full.m_static), Values(s.avsm));
  EXPECT_EQ(Values(full.avsm), Values(full.m_cdf));
}

TEST(Model, SeedDeterminesParameters) {
  const DnmModel a(Tiny(), 16), b(Tiny(), 16), c(Tiny(), 17);
  EXPECT_EQ(a.SnapshotValues(), b.SnapshotValues());
  EXPECT_NE(a.SnapshotValues(), c.SnapshotValues());
  for (const Parameter* p : a.parameters()) {
    if (p->name.find(".b") != std::string::npos && p->name.find("kernel") == std::string::npos)
      for (double x : p->value.data()) EXPECT_EQ(x, 0.0) << p->name;
    EXPECT_TRUE(p->value.requires_grad()) << p->name;
  }
}

ModelOutput FixtureOutput(double z_avc, std::vector<double> class_probs) {
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  ModelOutput out;
  out.avc_logit = Tensor::Scalar(logit(z_avc));
  std::vector<double> l;
  for (double p : class_probs) l.push_back(logit(p));
  out.class_logits = Tensor({l.size()}, l);
  return out;
}

TEST(MultitaskLoss, ArithmeticFixture) {
  const LossTerms t = MultitaskLoss(FixtureOutput(0.8, {0.9, 0.2}), 1,
                                    std::vector<double>{1.0, 0.0}, TrainingMode::kDnm);
  const double expected = -std::log(0.8) - std::log(0.9) - std::log(1.0 - 0.2);
  EXPECT_NEAR(t.total.item(), expected, 1e-12);
  EXPECT_NEAR(t.total.item(), 0.551647, 1e-6);
  EXPECT_NEAR(t.avc, -std::log(0.8), 1e-12);
  EXPECT_NEAR(t.cls, -std::log(0.9) - std::log(0.8), 1e-12);
}

TEST(MultitaskLoss, ModesAndMasking) {
  const ModelOutput o = FixtureOutput(0.8, {0.9, 0.2});
  const std::vector<double> label = {1.0, 0.0};
  EXPECT_NEAR(MultitaskLoss(o, 1, label, TrainingMode::kAvcOnly).total.item(), -std::log(0.8), 1e-12);
  EXPECT_NEAR(MultitaskLoss(o, 1, label, TrainingMode::kClsOnly).total.item(),
              -std::log(0.9) - std::log(0.8), 1e-12);
  const LossTerms neg = MultitaskLoss(o, 0, std::nullopt, TrainingMode::kDnm);
  EXPECT_NEAR(neg.total.item(), -std::log(0.2), 1e-12);
  EXPECT_EQ(neg.cls, 0.0);
  EXPECT_FALSE(MultitaskLoss(o, 0, std::nullopt, TrainingMode::kClsOnly).total.defined());
  const LossTerms perfect = MultitaskLoss(FixtureOutput(1 - 1e-15, {1 - 1e-15, 1e-15}), 1, label,
                                          TrainingMode::kDnm);
  EXPECT_LT(perfect.total.item(), 1e-12);
}

TEST(MultitaskLoss, Errors) {
  const ModelOutput o = FixtureOutput(0.8, {0.9, 0.2});
  EXPECT_THROW(MultitaskLoss(o, 1, std::nullopt, TrainingMode::kDnm), std::invalid_argument);
  EXPECT_THROW(MultitaskLoss(o, 2, std::vector<double>{1, 0}, TrainingMode::kDnm),
               std::invalid_argument);
  EXPECT_THROW(MultitaskLoss(o, 1, std::vector<double>{1, 0, 0}, TrainingMode::kDnm), ShapeError);
}

TEST(MultitaskLoss, NegativePairLeavesClassificationParametersUntouched) {
  ModelConfig c = Tiny();
  Rng rng(18);
  for (FusionMode f : {FusionMode::kCdf, FusionMode::kStatic}) {
    c.fusion = f;
    DnmModel model(c, 18);
    const Tensor clip = RandomClip(rng, c), logmel = RandomLogmel(rng, c);
    auto loss = [&] { return MultitaskLoss(model.Forward(clip, logmel), 0, std::nullopt, TrainingMode::kDnm).total; };
    Backward(loss());
    for (Parameter* p : model.classification_parameters())
      for (double g : p->value.grad()) EXPECT_EQ(g, 0.0) << p->name;
    // Finite-difference probe: moving a classification weight leaves the loss
    // unchanged.
    const double base = loss().item();
    for (Parameter* p : model.classification_parameters()) {
      double& x = p->value.mutable_data()[0];
      const double keep = x;
      x += 1e-3;
      EXPECT_EQ(loss().item(), base) << p->name;
      x = keep;
    }
  }
}

TEST(LocalizationMap, ReadsTheModeHead) {
  const DnmModel model(Tiny(), 19);
  Rng rng(19);
  const ModelOutput out = model.Forward(RandomClip(rng, Tiny()), RandomLogmel(rng, Tiny()));
  EXPECT_EQ(LocalizationMap(out, TrainingMode::kDnm), Values(out.m_loc));
  EXPECT_EQ(LocalizationMap(out, TrainingMode::kAvcOnly), Values(out.m_loc));
  EXPECT_EQ(LocalizationMap(out, TrainingMode::kClsOnly), Values(out.w_att));
}

TEST(Forward, EndToEndLossPassesFiniteDifferences) {
  for (FusionMode f : {FusionMode::kCdf, FusionMode::kStatic}) {
    ModelConfig c = Tiny();
    c.fusion = f;
    const auto r = CheckModelLoss(c, 20, 6);
    EXPECT_LE(r.max_relative_error, 1e-4) << FusionModeName(f);
    EXPECT_GT(r.components_checked, 50u);
  }
}

}  // namespace
}  // namespace avsol
