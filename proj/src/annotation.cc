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

#include "avsol/annotation.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "avsol/errors.h"
#include "json.hpp"

namespace avsol {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

const std::set<std::string, std::less<>> kFrameKeys = {
    "video_id", "frame_index", "width", "height", "boxes"};
const std::set<std::string, std::less<>> kBoxKeys = {
    "x_min", "y_min", "x_max", "y_max", "sounding", "out_of_view", "category"};

bool IsFullFrame(const BoundingBox& b, const FrameAnnotation& f) {
  return b.x_min == 0.0 && b.y_min == 0.0 && b.x_max == f.width &&
         b.y_max == f.height;
}

}  // namespace

std::string_view FrameClassName(FrameClass c) {
  switch (c) {
    case FrameClass::kAveSingle:
      return "ave_single";
    case FrameClass::kAveMulti:
      return "ave_multi";
    case FrameClass::kNonAveVisible:
      return "non_ave_visible";
    case FrameClass::kNonAveAudible:
      return "non_ave_audible";
    case FrameClass::kNonAveNoise:
      return "non_ave_noise";
  }
  return "unknown";
}

FrameClass FrameClassFromName(std::string_view name) {
  for (FrameClass c : kAllFrameClasses) {
    if (FrameClassName(c) == name) return c;
  }
  throw std::invalid_argument("unknown frame class '" + std::string(name) +
                              "'");
}

FrameClass ClassifyFrame(const FrameAnnotation& frame) {
  std::size_t sounding = 0;
  bool out_of_view = false;
  for (const BoundingBox& b : frame.boxes) {
    if (b.out_of_view) {
      out_of_view = true;
    } else if (b.sounding) {
      ++sounding;
    }
  }
  if (sounding >= 2) return FrameClass::kAveMulti;
  if (sounding == 1) return FrameClass::kAveSingle;
  if (out_of_view) return FrameClass::kNonAveAudible;
  if (!frame.boxes.empty()) return FrameClass::kNonAveVisible;
  return FrameClass::kNonAveNoise;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](auto c) { return c != 0; }));
}

Mask RasterizeBoxes(const FrameAnnotation& frame, int grid_w, int grid_h) {
  if (grid_w < 1 || grid_h < 1) {
    throw std::invalid_argument("rasterize_boxes: grid must be at least 1x1");
  }
  Mask mask{grid_w, grid_h,
            std::vector<std::uint8_t>(static_cast<std::size_t>(grid_w) *
                                          static_cast<std::size_t>(grid_h),
                                      0)};
  const double sx = static_cast<double>(frame.width) / grid_w;
  const double sy = static_cast<double>(frame.height) / grid_h;
  for (const BoundingBox& b : frame.boxes) {
    if (!b.in_view_sounding()) continue;
    for (int y = 0; y < grid_h; ++y) {
      const double cy = (y + 0.5) * sy;
      if (cy < b.y_min || cy >= b.y_max) continue;
      for (int x = 0; x < grid_w; ++x) {
        const double cx = (x + 0.5) * sx;
        if (cx >= b.x_min && cx < b.x_max) mask.cells[y * grid_w + x] = 1;
      }
    }
  }
  return mask;
}

DatasetIndex::DatasetIndex(std::vector<FrameAnnotation> frames)
    : frames_(std::move(frames)) {
  std::stable_sort(frames_.begin(), frames_.end(),
                   [](const FrameAnnotation& a, const FrameAnnotation& b) {
                     return std::tie(a.video_id, a.frame_index) <
                            std::tie(b.video_id, b.frame_index);
                   });
  classes_.reserve(frames_.size());
  for (std::size_t j = 0; j < frames_.size(); ++j) {
    classes_.push_back(ClassifyFrame(frames_[j]));
    if (IsAve(classes_.back())) ave_frames_.push_back(j + 1);
  }
}

std::string Violation::ToString() const {
  return video_id + "#" + std::to_string(frame_index) + " [" + rule + "] " +
         detail;
}

std::vector<Violation> Validate(const DatasetIndex& index) {
  std::vector<Violation> out;
  const auto& frames = index.frames();
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const FrameAnnotation& f = frames[j];
    auto add = [&](std::string rule, std::string detail) {
      out.push_back({f.video_id, f.frame_index, std::move(rule),
                     std::move(detail)});
    };
    if (j > 0 && frames[j - 1].video_id == f.video_id &&
        frames[j - 1].frame_index == f.frame_index) {
      add("duplicate_frame", "frame annotated more than once");
    }
    if (f.frame_index < 0) add("negative_frame_index", "frame_index < 0");
    if (f.width < 1 || f.height < 1) {
      add("bad_frame_size", "width and height must be >= 1, got " +
                                std::to_string(f.width) + "x" +
                                std::to_string(f.height));
    }
    std::size_t oov = 0;
    for (std::size_t k = 0; k < f.boxes.size(); ++k) {
      const BoundingBox& b = f.boxes[k];
      const std::string which = "box " + std::to_string(k);
      const bool finite = std::isfinite(b.x_min) && std::isfinite(b.y_min) &&
                          std::isfinite(b.x_max) && std::isfinite(b.y_max);
      if (!finite) {
        add("non_finite_box", which + " has non-finite coordinates");
        continue;
      }
      if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
        add("degenerate_box", which + " has x_min >= x_max or y_min >= y_max");
      } else if (b.x_min < 0 || b.y_min < 0 || b.x_max > f.width ||
                 b.y_max > f.height) {
        add("box_out_of_frame", which + " extends outside the frame");
      }
      if (b.out_of_view) {
        ++oov;
        if (!IsFullFrame(b, f)) {
          add("out_of_view_not_full_frame",
              which + " is out_of_view but does not span the full frame");
        }
        if (!b.sounding) {
          add("out_of_view_not_sounding",
              which + " is out_of_view but not sounding");
        }
      }
    }
    if (oov > 1) {
      add("multiple_out_of_view", std::to_string(oov) + " out_of_view boxes");
    }
  }
  return out;
}

namespace {

void CheckKeys(const Json& obj, const std::set<std::string, std::less<>>& keys,
               std::string_view what, long line, const ParseOptions& options,
               std::vector<std::string>* warnings) {
  for (const auto& [key, value] : obj.items()) {
    if (keys.count(key)) continue;
    const std::string msg = "unknown " + std::string(what) + " field '" + key + "'";
    if (!options.lenient) throw ParseError(msg, line);
    if (warnings) warnings->push_back("line " + std::to_string(line) + ": " + msg);
  }
  for (const std::string& key : keys) {
    if (!obj.contains(key)) {
      throw ParseError("missing " + std::string(what) + " field '" + key + "'",
                       line);
    }
  }
}

const Json& Field(const Json& obj, const char* key, Json::value_t type,
                  long line) {
  const Json& v = obj.at(key);
  const bool ok =
      type == Json::value_t::number_integer
          ? v.is_number_integer()
          : (type == Json::value_t::number_float ? v.is_number()
                                                 : v.type() == type);
  if (!ok) {
    throw ParseError(std::string("field '") + key + "' has wrong type " +
                         v.type_name(),
                     line);
  }
  return v;
}

}  // namespace

DatasetIndex ParseAnnotations(std::string_view content,
                              const ParseOptions& options,
                              std::vector<std::string>* warnings) {
  std::vector<FrameAnnotation> frames;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!rec.is_object()) throw ParseError("record is not an object", line_no);
    CheckKeys(rec, kFrameKeys, "frame", line_no, options, warnings);

    FrameAnnotation f;
    f.video_id =
        Field(rec, "video_id", Json::value_t::string, line_no).get<std::string>();
    f.frame_index = Field(rec, "frame_index", Json::value_t::number_integer,
                          line_no).get<std::int64_t>();
    const auto w = Field(rec, "width", Json::value_t::number_integer, line_no)
                       .get<std::int64_t>();
    const auto h = Field(rec, "height", Json::value_t::number_integer, line_no)
                       .get<std::int64_t>();
    if (w > INT32_MAX || h > INT32_MAX || w < INT32_MIN || h < INT32_MIN) {
      throw ParseError("frame size out of range", line_no);
    }
    f.width = static_cast<int>(w);
    f.height = static_cast<int>(h);
    for (const Json& jb : Field(rec, "boxes", Json::value_t::array, line_no)) {
      if (!jb.is_object()) throw ParseError("box is not an object", line_no);
      CheckKeys(jb, kBoxKeys, "box", line_no, options, warnings);
      BoundingBox b;
      b.x_min = Field(jb, "x_min", Json::value_t::number_float, line_no).get<double>();
      b.y_min = Field(jb, "y_min", Json::value_t::number_float, line_no).get<double>();
      b.x_max = Field(jb, "x_max", Json::value_t::number_float, line_no).get<double>();
      b.y_max = Field(jb, "y_max", Json::value_t::number_float, line_no).get<double>();
      b.sounding = Field(jb, "sounding", Json::value_t::boolean, line_no).get<bool>();
      b.out_of_view =
          Field(jb, "out_of_view", Json::value_t::boolean, line_no).get<bool>();
      b.category =
          Field(jb, "category", Json::value_t::string, line_no).get<std::string>();
      f.boxes.push_back(std::move(b));
    }
    frames.push_back(std::move(f));
  }

  DatasetIndex index(std::move(frames));
  const auto violations = Validate(index);
  if (!violations.empty()) {
    std::ostringstream os;
    os << violations.size() << " annotation invariant violation(s):";
    for (const Violation& v : violations) os << "\n  " << v.ToString();
    throw ValidationError(os.str());
  }
  return index;
}

std::string SerializeAnnotations(const DatasetIndex& index) {
  std::string out;
  for (const FrameAnnotation& f : index.frames()) {
    OrderedJson rec;
    rec["video_id"] = f.video_id;
    rec["frame_index"] = f.frame_index;
    rec["width"] = f.width;
    rec["height"] = f.height;
    rec["boxes"] = OrderedJson::array();
    for (const BoundingBox& b : f.boxes) {
      rec["boxes"].push_back(OrderedJson{{"x_min", b.x_min},
                                         {"y_min", b.y_min},
                                         {"x_max", b.x_max},
                                         {"y_max", b.y_max},
                                         {"sounding", b.sounding},
                                         {"out_of_view", b.out_of_view},
                                         {"category", b.category}});
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace avsol
