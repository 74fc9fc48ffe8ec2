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

#include "avsol/binary_io.h"

#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace avsol {

void ByteWriter::String16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw DataError("string too long for u16 length prefix");
  }
  U16(static_cast<std::uint16_t>(s.size()));
  Bytes(s.data(), s.size());
}

void ByteReader::Need(std::size_t n) {
  if (data_.size() - pos_ < n) {
    throw ParseError(what_ + ": truncated at byte " + std::to_string(pos_));
  }
}

void ByteReader::ExpectMagic(std::string_view magic) {
  Need(magic.size());
  if (data_.substr(pos_, magic.size()) != magic) {
    throw ParseError(what_ + ": bad magic, expected \"" + std::string(magic) +
                     "\"");
  }
  pos_ += magic.size();
}

std::string ByteReader::String16() {
  const std::uint16_t n = U16();
  Need(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

void ByteReader::ExpectEnd() {
  if (!AtEnd()) {
    throw ParseError(what_ + ": " + std::to_string(data_.size() - pos_) +
                     " trailing bytes");
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace avsol
