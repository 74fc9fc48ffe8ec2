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

#ifndef AVSOL_ANNOTATION_H_
#define AVSOL_ANNOTATION_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace avsol {

// Box in annotation-frame pixel coordinates, half-open: [x_min, x_max) x
// [y_min, y_max). An out-of-view box is a dummy covering the whole frame that
// marks audible sound with no visible source; it never contributes ground
// truth pixels.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  bool sounding = false;
  bool out_of_view = false;
  std::string category;

  bool in_view_sounding() const { return sounding && !out_of_view; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct FrameAnnotation {
  std::string video_id;
  std::int64_t frame_index = 0;  // on the 10 fps timeline of the video
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;

  friend bool operator==(const FrameAnnotation&,
                         const FrameAnnotation&) = default;
};

enum class FrameClass {
  kAveSingle,
  kAveMulti,
  kNonAveVisible,
  kNonAveAudible,
  kNonAveNoise,
};

inline constexpr FrameClass kAllFrameClasses[] = {
    FrameClass::kAveSingle, FrameClass::kAveMulti, FrameClass::kNonAveVisible,
    FrameClass::kNonAveAudible, FrameClass::kNonAveNoise};

std::string_view FrameClassName(FrameClass c);
// Inverse of FrameClassName; throws std::invalid_argument.
FrameClass FrameClassFromName(std::string_view name);
inline bool IsAve(FrameClass c) {
  return c == FrameClass::kAveSingle || c == FrameClass::kAveMulti;
}

// Exactly one class per frame, from the boxes and tags alone:
//   >= 2 in-view sounding boxes        -> AveMulti
//   exactly 1 in-view sounding box     -> AveSingle
//   an out-of-view box (and no above)  -> NonAveAudible
//   only non-sounding boxes            -> NonAveVisible
//   no boxes                           -> NonAveNoise
FrameClass ClassifyFrame(const FrameAnnotation& frame);

// Binary grid; cell (x, y) is cells[y * width + x].
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  std::size_t count() const;
  bool at(int x, int y) const { return cells[y * width + x] != 0; }
};

// Cell is foreground iff its centre, mapped to frame coordinates, lies inside
// an in-view sounding box (x_min <= cx < x_max, same for y).
Mask RasterizeBoxes(const FrameAnnotation& frame, int grid_w, int grid_h);

// All annotated frames, sorted by (video_id, frame_index). Frame numbers
// j = 1..J follow that order; gaps in frame_index are allowed.
class DatasetIndex {
 public:
  DatasetIndex() = default;
  explicit DatasetIndex(std::vector<FrameAnnotation> frames);

  const std::vector<FrameAnnotation>& frames() const { return frames_; }
  std::size_t size() const { return frames_.size(); }  // J
  // 1-based frame numbers of AVE frames (>= 1 in-view sounding box).
  const std::vector<std::size_t>& ave_frames() const { return ave_frames_; }
  const FrameClass& frame_class(std::size_t position) const {
    return classes_[position];
  }

  friend bool operator==(const DatasetIndex& a, const DatasetIndex& b) {
    return a.frames_ == b.frames_;
  }

 private:
  std::vector<FrameAnnotation> frames_;
  std::vector<FrameClass> classes_;
  std::vector<std::size_t> ave_frames_;
};

struct Violation {
  std::string video_id;
  std::int64_t frame_index = 0;
  std::string rule;  // short identifier, e.g. "degenerate_box"
  std::string detail;

  std::string ToString() const;
};

// Empty iff every type invariant holds.
std::vector<Violation> Validate(const DatasetIndex& index);

struct ParseOptions {
  // Unknown fields produce warnings instead of errors.
  bool lenient = false;
};

// Parses the line-delimited JSON annotation format. Blank lines are skipped.
// Throws ParseError (with line number) on malformed records and
// ValidationError listing every violated invariant.
DatasetIndex ParseAnnotations(std::string_view content,
                              const ParseOptions& options = {},
                              std::vector<std::string>* warnings = nullptr);

// One JSON object per line, in index order; ParseAnnotations inverts it.
std::string SerializeAnnotations(const DatasetIndex& index);

}  // namespace avsol

#endif  // AVSOL_ANNOTATION_H_
