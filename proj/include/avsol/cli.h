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

#ifndef AVSOL_CLI_H_
#define AVSOL_CLI_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "avsol/dnm.h"
#include "avsol/metrics.h"
#include "avsol/train.h"

namespace avsol::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

// Thrown for bad flag values or config contents that are not data errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenArgs {
  std::optional<std::filesystem::path> config;  // GeneratorConfig JSON
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};
// Writes the dataset plus resolved_config.json into `out`.
void RunGen(const GenArgs& args, std::ostream& log);

// Training run configuration: {"model": {...}, "train": {...}}. Model fields
// not given follow the dataset geometry and ModelConfig defaults.
struct RunConfig {
  ModelConfig model;
  TrainOptions train;

  std::string ToJson() const;
};

struct TrainArgs {
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> mode;
  std::optional<std::string> fusion;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};
// Resolves the run configuration against the dataset's generator config.
RunConfig ResolveRunConfig(const TrainArgs& args, const GeneratorConfig& data);

struct TrainSummary {
  RunConfig config;
  TrainResult result;
  Accuracy test_accuracy;
  MetricsReport test_report;
};
// Writes resolved_config.json, train_log.jsonl, checkpoint.avwt,
// heatmaps_test.avhm, report_test.json/.txt and summary.json into `out`.
TrainSummary RunTrain(const TrainArgs& args, std::ostream& log);

struct EvalArgs {
  std::filesystem::path annotations;
  std::filesystem::path heatmaps;
  std::optional<int> grid_w;  // default: the heatmaps' size
  std::optional<int> grid_h;
  std::optional<std::filesystem::path> out;  // report.json, report.txt
  bool lenient = false;
};
MetricsReport RunEval(const EvalArgs& args, std::ostream& log);

struct GradcheckArgs {
  std::optional<std::filesystem::path> config;  // ModelConfig JSON
  std::optional<std::uint64_t> seed;
  int draws = 3;
  // Components probed per parameter in the end-to-end check (0 = all).
  std::size_t components = 16;
  double tolerance = 1e-4;
  std::string corrupt_op;  // test hook
};
// Prints one line per registered op plus the end-to-end check; true iff all
// pass.
bool RunGradcheck(const GradcheckArgs& args, std::ostream& log);

struct RenderArgs {
  std::filesystem::path clip;  // <clip_id>.avcl
  std::filesystem::path heatmaps;
  std::optional<std::filesystem::path> annotations;
  std::filesystem::path out;
  int scale = 8;
};
// One binary PPM per frame: grayscale frame, min-max normalised heatmap in the
// red channel, sounding boxes green and silent boxes blue. Returns the number
// of images written.
int RunRender(const RenderArgs& args, std::ostream& log);

// Full command line entry point; returns the process exit code.
int Main(int argc, char** argv);

}  // namespace avsol::cli

#endif  // AVSOL_CLI_H_
