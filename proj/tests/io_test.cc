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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "avsol/binary_io.h"
#include "avsol/checkpoint.h"
#include "avsol/errors.h"
#include "avsol/heatmap_io.h"
#include "avsol/rng.h"
#include "test_util.h"

namespace avsol {
namespace {

std::vector<HeatmapRecord> SomeRecords() {
  Rng rng(1);
  std::vector<HeatmapRecord> out;
  for (int i = 0; i < 4; ++i) {
    HeatmapRecord r;
    r.video_id = "vid_" + std::to_string(i % 2);
    r.frame_index = i * 10;
    r.heatmap.width = 2 + i;
    r.heatmap.height = 3;
    for (int k = 0; k < r.heatmap.width * 3; ++k) r.heatmap.values.push_back(rng.Uniform());
    out.push_back(r);
  }
  return out;
}

TEST(ByteIo, FieldsRoundTrip) {
  ByteWriter w;
  w.Magic("ABCD");
  w.U8(7);
  w.U16(65535);
  w.U32(4000000000u);
  w.F32(1.5f);
  w.F64(-2.25);
  w.String16("héllo");
  EXPECT_EQ(w.bytes().size(), 4u + 1 + 2 + 4 + 4 + 8 + 2 + 6);
  ByteReader r(w.bytes(), "test");
  r.ExpectMagic("ABCD");
  EXPECT_EQ(r.U8(), 7);
  EXPECT_EQ(r.U16(), 65535);
  EXPECT_EQ(r.U32(), 4000000000u);
  EXPECT_EQ(r.F32(), 1.5f);
  EXPECT_EQ(r.F64(), -2.25);
  EXPECT_EQ(r.String16(), "héllo");
  EXPECT_TRUE(r.AtEnd());
  EXPECT_NO_THROW(r.ExpectEnd());
  EXPECT_THROW(r.U8(), ParseError);
}

TEST(ByteIo, LittleEndianLayout) {
  ByteWriter w;
  w.U32(0x01020304u);
  EXPECT_EQ(w.bytes(), std::string("\x04\x03\x02\x01", 4));
}

TEST(ByteIo, Errors) {
  ByteReader bad_magic("ABCE", "test");
  EXPECT_THROW(bad_magic.ExpectMagic("ABCD"), ParseError);
  ByteReader trailing("xy", "test");
  trailing.U8();
  EXPECT_THROW(trailing.ExpectEnd(), ParseError);
  EXPECT_THROW(ReadFile("/nonexistent/avsol/file"), DataError);
  EXPECT_THROW(WriteFile("/nonexistent/avsol/file", "x"), DataError);
}

TEST(HeatmapFile, RoundTripsAtFloatPrecision) {
  const auto records = SomeRecords();
  const auto back = DecodeHeatmaps(EncodeHeatmaps(records));
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].video_id, records[i].video_id);
    EXPECT_EQ(back[i].frame_index, records[i].frame_index);
    EXPECT_EQ(back[i].heatmap, QuantizeToFloat(records[i].heatmap));
  }
  // Float-exact maps survive bit for bit.
  std::vector<HeatmapRecord> quantized = records;
  for (auto& r : quantized) r.heatmap = QuantizeToFloat(r.heatmap);
  EXPECT_EQ(EncodeHeatmaps(DecodeHeatmaps(EncodeHeatmaps(quantized))),
            EncodeHeatmaps(quantized));

  testing::TempDir dir("hm");
  WriteHeatmapFile(dir / "maps.avhm", records);
  EXPECT_EQ(ReadFile(dir / "maps.avhm"), EncodeHeatmaps(records));
  EXPECT_EQ(ReadHeatmapFile(dir / "maps.avhm").size(), records.size());
  EXPECT_TRUE(DecodeHeatmaps(EncodeHeatmaps({})).empty());
}

TEST(HeatmapFile, ByteLayout) {
  HeatmapRecord r;
  r.video_id = "v";
  r.frame_index = 3;
  r.heatmap = {1, 1, {0.5}};
  const std::string bytes = EncodeHeatmaps(std::vector{r});
  // magic, version, count, id, frame, width, height, one float.
  EXPECT_EQ(bytes.size(), 4u + 2 + 4 + (2 + 1) + 4 + 2 + 2 + 4);
  EXPECT_EQ(bytes.substr(0, 4), "AVHM");
}

TEST(HeatmapFile, RejectsCorruptInput) {
  const std::string good = EncodeHeatmaps(SomeRecords());
  for (std::size_t cut : {0ul, 3ul, 9ul, good.size() - 1})
    EXPECT_THROW(DecodeHeatmaps(good.substr(0, cut)), ParseError) << cut;
  EXPECT_THROW(DecodeHeatmaps(good + "x"), ParseError);
  std::string bad = good;
  bad[0] = 'B';
  EXPECT_THROW(DecodeHeatmaps(bad), ParseError);
  bad = good;
  bad[4] = 2;  // version
  EXPECT_THROW(DecodeHeatmaps(bad), ParseError);

  HeatmapRecord nan;
  nan.video_id = "n";
  nan.heatmap = {1, 1, {std::numeric_limits<double>::quiet_NaN()}};
  EXPECT_THROW(DecodeHeatmaps(EncodeHeatmaps(std::vector{nan})), ParseError);

  HeatmapRecord wrong = nan;
  wrong.heatmap = {2, 2, {0.0}};
  EXPECT_THROW(EncodeHeatmaps(std::vector{wrong}), DataError);
  wrong.heatmap = {1, 1, {0.0}};
  wrong.frame_index = -1;
  EXPECT_THROW(EncodeHeatmaps(std::vector{wrong}), DataError);
}

TEST(HeatmapFile, ToHeatmapSetRejectsDuplicates) {
  auto records = SomeRecords();
  const HeatmapSet set = ToHeatmapSet(records);
  EXPECT_EQ(set.size(), records.size());
  EXPECT_EQ(set.at({"vid_1", 30}), records[3].heatmap);
  records.push_back(records[0]);
  EXPECT_THROW(ToHeatmapSet(records), DataError);
}

std::vector<Parameter> SomeParams(double offset) {
  std::vector<Parameter> p;
  p.emplace_back("a.kernel", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true));
  p.emplace_back("a.bias", Tensor({3}, {0.1, 0.2, 0.3}, true));
  p.emplace_back("scalar", Tensor({}, {-1.0}, true));
  for (auto& x : p)
    for (double& v : x.value.mutable_data()) v += offset;
  return p;
}

std::vector<Parameter*> Pointers(std::vector<Parameter>& p) {
  std::vector<Parameter*> out;
  for (auto& x : p) out.push_back(&x);
  return out;
}

TEST(Checkpoint, RoundTrip) {
  auto src = SomeParams(0.0);
  auto ptrs = Pointers(src);
  const std::vector<const Parameter*> cptrs(ptrs.begin(), ptrs.end());
  const std::string bytes = EncodeCheckpoint(cptrs);
  EXPECT_EQ(bytes.substr(0, 4), "AVWT");
  const auto arrays = DecodeCheckpoint(bytes);
  ASSERT_EQ(arrays.size(), 3u);
  EXPECT_EQ(arrays[0].name, "a.kernel");
  EXPECT_EQ(arrays[0].shape, (Shape{2, 3}));
  EXPECT_EQ(arrays[2].shape, Shape{});
  EXPECT_EQ(arrays[1].values, (std::vector<double>{0.1, 0.2, 0.3}));

  auto dst = SomeParams(7.0);
  auto dptrs = Pointers(dst);
  testing::TempDir dir("ckpt");
  SaveCheckpoint(dir / "w.avwt", cptrs);
  LoadCheckpoint(dir / "w.avwt", dptrs);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto a = src[i].value.data();
    const auto b = dst[i].value.data();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << src[i].name;
  }
}

TEST(Checkpoint, RejectsMismatches) {
  auto src = SomeParams(0.0);
  auto ptrs = Pointers(src);
  const std::vector<const Parameter*> cptrs(ptrs.begin(), ptrs.end());
  auto arrays = DecodeCheckpoint(EncodeCheckpoint(cptrs));

  auto dst = SomeParams(1.0);
  auto dptrs = Pointers(dst);
  auto renamed = arrays;
  renamed[1].name = "other";
  EXPECT_THROW(AssignCheckpoint(renamed, dptrs), ValidationError);
  auto reshaped = arrays;
  reshaped[0].shape = {3, 2};
  EXPECT_THROW(AssignCheckpoint(reshaped, dptrs), ValidationError);
  auto fewer = arrays;
  fewer.pop_back();
  EXPECT_THROW(AssignCheckpoint(fewer, dptrs), ValidationError);
  // A failed assignment leaves the destination untouched.
  EXPECT_EQ(dst[0].value.data()[0], 2.0);

  const std::string bytes = EncodeCheckpoint(cptrs);
  EXPECT_THROW(DecodeCheckpoint(bytes.substr(0, bytes.size() - 1)), ParseError);
  EXPECT_THROW(DecodeCheckpoint(bytes + "z"), ParseError);
  std::string bad = bytes;
  bad[1] = '?';
  EXPECT_THROW(DecodeCheckpoint(bad), ParseError);
}

}  // namespace
}  // namespace avsol
