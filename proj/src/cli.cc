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

#include "avsol/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avsol/annotation.h"
#include "avsol/binary_io.h"
#include "avsol/checkpoint.h"
#include "avsol/checks.h"
#include "avsol/errors.h"
#include "avsol/heatmap_io.h"
#include "avsol/synth.h"
#include "json.hpp"

namespace avsol::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace {

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

Json ParseJsonFile(const fs::path& path) {
  try {
    return Json::parse(ReadFile(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

OrderedJson TrainOptionsJson(const TrainOptions& t) {
  OrderedJson j;
  j["epochs"] = t.epochs;
  j["seed"] = t.seed;
  j["batch_size"] = t.batch_size;
  j["lr"] = t.adam.lr;
  j["beta1"] = t.adam.beta1;
  j["beta2"] = t.adam.beta2;
  j["eps"] = t.adam.eps;
  j["final_lr_fraction"] = t.final_lr_fraction;
  j["flip_probability"] = t.augment.flip_probability;
  j["crop_probability"] = t.augment.crop_probability;
  j["crop_min_scale"] = t.augment.crop_min_scale;
  j["select_best_on_val"] = t.select_best_on_val;
  return j;
}

void ApplyTrainJson(const Json& j, TrainOptions& t) {
  if (!j.is_object()) throw ParseError("run config: \"train\" must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") t.epochs = value.get<int>();
      else if (key == "seed") t.seed = value.get<std::uint64_t>();
      else if (key == "batch_size") t.batch_size = value.get<int>();
      else if (key == "lr") t.adam.lr = value.get<double>();
      else if (key == "beta1") t.adam.beta1 = value.get<double>();
      else if (key == "beta2") t.adam.beta2 = value.get<double>();
      else if (key == "eps") t.adam.eps = value.get<double>();
      else if (key == "final_lr_fraction") t.final_lr_fraction = value.get<double>();
      else if (key == "flip_probability") t.augment.flip_probability = value.get<double>();
      else if (key == "crop_probability") t.augment.crop_probability = value.get<double>();
      else if (key == "crop_min_scale") t.augment.crop_min_scale = value.get<double>();
      else if (key == "select_best_on_val") t.select_best_on_val = value.get<bool>();
      else throw ParseError("run config: unknown train field '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
}

std::string SummaryJson(const TrainSummary& s) {
  OrderedJson j;
  j["mode"] = TrainingModeName(s.config.model.mode);
  j["fusion"] = FusionModeName(s.config.model.fusion);
  j["epochs"] = s.result.log.size();
  j["best_epoch"] = s.result.best_epoch;
  j["test_avc_accuracy"] = s.test_accuracy.avc;
  j["test_cls_accuracy"] = s.test_accuracy.cls;
  j["test_pairs"] = s.test_accuracy.pairs;
  j["test_report"] = OrderedJson::parse(ReportToJson(s.test_report));
  return j.dump(2) + "\n";
}

void WriteReport(const fs::path& dir, const std::string& stem,
                 const MetricsReport& report) {
  WriteFile(dir / (stem + ".json"), ReportToJson(report));
  WriteFile(dir / (stem + ".txt"), ReportToTable(report));
}

}  // namespace

void RunGen(const GenArgs& args, std::ostream& log) {
  GeneratorConfig config;
  if (args.config) config = GeneratorConfig::FromJson(ReadFile(*args.config));
  if (args.seed) config.seed = *args.seed;
  config.Validate();
  const SyntheticDataset ds = GenerateDataset(config);
  WriteDataset(ds, args.out);
  WriteFile(args.out / "resolved_config.json", config.ToJson() + "\n");
  log << "wrote " << ds.train.clips.size() << " train, " << ds.val.clips.size()
      << " val and " << ds.test.clips.size() << " test clips to "
      << args.out.string() << " (config " << config.Hash() << ")\n";
}

std::string RunConfig::ToJson() const {
  OrderedJson j;
  j["model"] = OrderedJson::parse(model.ToJson());
  j["train"] = TrainOptionsJson(train);
  return j.dump(2) + "\n";
}

RunConfig ResolveRunConfig(const TrainArgs& args, const GeneratorConfig& data) {
  ModelConfig base;
  base.image_h = data.image_h;
  base.image_w = data.image_w;
  base.mel_bins = data.mel_bins;
  base.steps = data.frames;
  base.num_classes = data.num_classes;

  RunConfig rc;
  Json model = Json::parse(base.ToJson());
  if (args.config) {
    const Json file = ParseJsonFile(*args.config);
    if (!file.is_object()) throw ParseError("run config: not a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "model") {
        if (!value.is_object()) throw ParseError("run config: \"model\" must be an object");
        if (value.contains("feature_dim") && !value.contains("gru_hidden")) {
          model.erase("gru_hidden");
        }
        model.update(value);
      } else if (key == "train") {
        ApplyTrainJson(value, rc.train);
      } else {
        throw ParseError("run config: unknown section '" + key + "'");
      }
    }
  }
  try {
    if (args.mode) model["mode"] = std::string(TrainingModeName(ParseTrainingMode(*args.mode)));
    if (args.fusion) model["fusion"] = std::string(FusionModeName(ParseFusionMode(*args.fusion)));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  rc.model = ModelConfig::FromJson(model.dump());
  if (args.epochs) rc.train.epochs = *args.epochs;
  if (args.seed) rc.train.seed = *args.seed;
  if (rc.train.epochs < 1) throw UsageError("epochs must be >= 1");
  return rc;
}

TrainSummary RunTrain(const TrainArgs& args, std::ostream& log) {
  const SyntheticDataset ds = LoadDataset(args.data);
  TrainSummary summary;
  summary.config = ResolveRunConfig(args, ds.config);
  const RunConfig& rc = summary.config;
  CheckCompatible(rc.model, ds.config);

  EnsureDir(args.out);
  WriteFile(args.out / "resolved_config.json", rc.ToJson());

  DnmModel model(rc.model, rc.train.seed);
  std::string log_lines;
  summary.result = Train(model, ds, rc.train, [&](const EpochLog& e) {
    const std::string line = EpochLogToJson(e);
    log_lines += line + "\n";
    log << line << "\n";
  });
  WriteFile(args.out / "train_log.jsonl", log_lines);

  const auto params = std::as_const(model).parameters();
  SaveCheckpoint(args.out / "checkpoint.avwt", params);

  const std::vector<HeatmapRecord> heatmaps = PredictHeatmaps(model, ds.test);
  WriteHeatmapFile(args.out / "heatmaps_test.avhm", heatmaps);
  summary.test_report = Evaluate(ds.Annotations(ds.test), ToHeatmapSet(heatmaps),
                                 rc.model.grid_w, rc.model.grid_h);
  WriteReport(args.out, "report_test", summary.test_report);
  summary.test_accuracy = EvaluateAccuracy(model, ds.test, rc.train.seed);
  WriteFile(args.out / "summary.json", SummaryJson(summary));

  log << "best epoch " << summary.result.best_epoch << " of "
      << summary.result.log.size() << "; test AVC accuracy "
      << summary.test_accuracy.avc << ", classification accuracy "
      << summary.test_accuracy.cls << "\n"
      << ReportToTable(summary.test_report);
  return summary;
}

MetricsReport RunEval(const EvalArgs& args, std::ostream& log) {
  ParseOptions options;
  options.lenient = args.lenient;
  std::vector<std::string> warnings;
  const DatasetIndex index = ParseAnnotations(ReadFile(args.annotations), options, &warnings);
  for (const std::string& w : warnings) log << "warning: " << w << "\n";

  const std::vector<HeatmapRecord> records = ReadHeatmapFile(args.heatmaps);
  int grid_w = args.grid_w.value_or(0), grid_h = args.grid_h.value_or(0);
  if (!args.grid_w || !args.grid_h) {
    if (records.empty()) {
      throw UsageError("the heatmap file is empty; pass --grid-w and --grid-h");
    }
    if (!args.grid_w) grid_w = records.front().heatmap.width;
    if (!args.grid_h) grid_h = records.front().heatmap.height;
  }
  if (grid_w < 1 || grid_h < 1) throw UsageError("grid dimensions must be >= 1");

  const MetricsReport report = Evaluate(index, ToHeatmapSet(records), grid_w, grid_h);
  log << ReportToTable(report);
  if (args.out) {
    EnsureDir(*args.out);
    WriteReport(*args.out, "report", report);
  }
  return report;
}

bool RunGradcheck(const GradcheckArgs& args, std::ostream& log) {
  ModelConfig config;
  if (args.config) config = ModelConfig::FromJson(ReadFile(*args.config));
  const std::uint64_t seed = args.seed.value_or(0);
  if (args.draws < 1) throw UsageError("draws must be >= 1");
  if (!args.corrupt_op.empty()) {
    const auto& ops = RegisteredOps();
    if (std::find(ops.begin(), ops.end(), args.corrupt_op) == ops.end()) {
      throw UsageError("unknown op '" + args.corrupt_op + "'");
    }
  }
  testing_hooks::CorruptBackward(args.corrupt_op);
  struct Reset {
    ~Reset() { testing_hooks::CorruptBackward(""); }
  } reset;

  bool pass = true;
  char line[160];
  for (const OpCheck& c : CheckRegisteredOps(seed, args.draws)) {
    const bool ok = c.max_relative_error <= args.tolerance;
    pass = pass && ok;
    std::snprintf(line, sizeof line, "%-18s %-6s max_rel_err=%.3e draws=%d\n",
                  c.op.c_str(), ok ? "PASS" : "FAIL", c.max_relative_error, c.draws);
    log << line;
  }
  const GradCheckResult model = CheckModelLoss(config, seed, args.components);
  const bool ok = model.max_relative_error <= args.tolerance;
  pass = pass && ok;
  std::snprintf(line, sizeof line, "%-18s %-6s max_rel_err=%.3e components=%zu\n",
                "end_to_end", ok ? "PASS" : "FAIL", model.max_relative_error,
                model.components_checked);
  log << line;
  return pass;
}

int RunRender(const RenderArgs& args, std::ostream& log) {
  if (args.scale < 1) throw UsageError("scale must be >= 1");
  const ClipSample clip = ReadClipFile(args.clip);
  std::map<std::int64_t, Heatmap> maps;
  for (HeatmapRecord& r : ReadHeatmapFile(args.heatmaps)) {
    if (r.video_id == clip.clip_id) maps[r.frame_index] = std::move(r.heatmap);
  }
  if (maps.empty()) {
    throw DataError("heatmap file has no frames for clip '" + clip.clip_id + "'");
  }
  std::map<std::int64_t, const FrameAnnotation*> boxes;
  std::optional<DatasetIndex> index;
  if (args.annotations) {
    index = ParseAnnotations(ReadFile(*args.annotations));
    for (const FrameAnnotation& f : index->frames())
      if (f.video_id == clip.clip_id) boxes[f.frame_index] = &f;
    if (boxes.empty()) {
      throw DataError("annotations have no frames for clip '" + clip.clip_id + "'");
    }
  }
  EnsureDir(args.out);

  const int s = args.scale;
  const int w = clip.width * s, h = clip.height * s;
  int written = 0;
  for (int t = 0; t < clip.frames; ++t) {
    auto it = maps.find(t);
    if (it == maps.end()) {
      throw DataError("no heatmap for frame " + std::to_string(t) + " of clip '" +
                      clip.clip_id + "'");
    }
    const Heatmap heat = MinMaxNormalize(it->second);
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3);
    auto put = [&](int x, int y, unsigned char r, unsigned char g, unsigned char b) {
      if (x < 0 || y < 0 || x >= w || y >= h) return;
      unsigned char* p = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = r;
      p[1] = g;
      p[2] = b;
    };
    auto byte = [](double v) {
      return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double gray = clip.pixel(t, y / s, x / s);
        const double v = heat.at(x * heat.width / w, y * heat.height / h);
        put(x, y, byte(0.5 * gray + 0.5 * v), byte(0.5 * gray), byte(0.5 * gray));
      }
    if (auto b = boxes.find(t); b != boxes.end()) {
      const FrameAnnotation& f = *b->second;
      for (const BoundingBox& box : f.boxes) {
        if (box.out_of_view) continue;
        const int x0 = static_cast<int>(std::floor(box.x_min * w / f.width));
        const int x1 = static_cast<int>(std::ceil(box.x_max * w / f.width)) - 1;
        const int y0 = static_cast<int>(std::floor(box.y_min * h / f.height));
        const int y1 = static_cast<int>(std::ceil(box.y_max * h / f.height)) - 1;
        const unsigned char g = box.sounding ? 255 : 0, bl = box.sounding ? 0 : 255;
        for (int x = x0; x <= x1; ++x) {
          put(x, y0, 0, g, bl);
          put(x, y1, 0, g, bl);
        }
        for (int y = y0; y <= y1; ++y) {
          put(x0, y, 0, g, bl);
          put(x1, y, 0, g, bl);
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof name, "_%03d.ppm", t);
    std::string image = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    image.append(rgb.begin(), rgb.end());
    WriteFile(args.out / (clip.clip_id + name), image);
    ++written;
  }
  log << "wrote " << written << " images to " << args.out.string() << "\n";
  return written;
}

int Main(int argc, char** argv) {
  CLI::App app{"Audio-visual sounding object localization toolkit", "avsol"};
  app.require_subcommand(1);

  GenArgs gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "Generator config JSON");
  gen_cmd->add_option("--seed", gen.seed, "Master seed (overrides the config)");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  TrainArgs train;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a synthetic dataset");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--config", train.config, "Run config JSON");
  train_cmd->add_option("--mode", train.mode, "avc | cls | dnm");
  train_cmd->add_option("--fusion", train.fusion, "static | cdf");
  train_cmd->add_option("--epochs", train.epochs, "Number of epochs");
  train_cmd->add_option("--seed", train.seed, "Seed for initialisation and training");
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score heatmaps against annotations");
  eval_cmd->add_option("--annotations", eval.annotations, "Annotation JSONL")->required();
  eval_cmd->add_option("--heatmaps", eval.heatmaps, "AVHM heatmap file")->required();
  eval_cmd->add_option("--grid-w", eval.grid_w, "Evaluation grid width");
  eval_cmd->add_option("--grid-h", eval.grid_h, "Evaluation grid height");
  eval_cmd->add_option("--out", eval.out, "Directory for report.json and report.txt");
  eval_cmd->add_flag("--lenient", eval.lenient, "Warn about unknown annotation fields");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--config", grad.config, "Model config JSON");
  grad_cmd->add_option("--seed", grad.seed, "Seed");
  grad_cmd->add_option("--draws", grad.draws, "Random draws per op");
  grad_cmd->add_option("--components", grad.components,
                       "Components probed per parameter end to end (0 = all)");
  grad_cmd->add_option("--corrupt-op", grad.corrupt_op)->group("");

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Overlay heatmaps and boxes on frames");
  render_cmd->add_option("--clip", render.clip, "AVCL clip file")->required();
  render_cmd->add_option("--heatmaps", render.heatmaps, "AVHM heatmap file")->required();
  render_cmd->add_option("--annotations", render.annotations, "Annotation JSONL");
  render_cmd->add_option("--scale", render.scale, "Pixels per frame pixel");
  render_cmd->add_option("--out", render.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) {
      gen.out = gen_out;
      RunGen(gen, std::cout);
    } else if (*train_cmd) {
      train.out = train_out;
      RunTrain(train, std::cout);
    } else if (*eval_cmd) {
      RunEval(eval, std::cout);
    } else if (*grad_cmd) {
      if (!RunGradcheck(grad, std::cout)) {
        std::cerr << "gradcheck: FAILED\n";
        return kInternal;
      }
    } else if (*render_cmd) {
      RunRender(render, std::cout);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace avsol::cli
