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

#ifndef AVSOL_BINARY_IO_H_
#define AVSOL_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "avsol/errors.h"

namespace avsol {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

// Appends little-endian fields to a byte buffer.
class ByteWriter {
 public:
  void Magic(std::string_view magic) { Bytes(magic.data(), magic.size()); }
  void U8(std::uint8_t v) { Pod(v); }
  void U16(std::uint16_t v) { Pod(v); }
  void U32(std::uint32_t v) { Pod(v); }
  void F32(float v) { Pod(v); }
  void F64(double v) { Pod(v); }
  // u16 length prefix + UTF-8 bytes.
  void String16(std::string_view s);

  const std::string& bytes() const { return buffer_; }

 private:
  template <typename T>
  void Pod(T v) {
    Bytes(&v, sizeof(T));
  }
  void Bytes(const void* p, std::size_t n) {
    buffer_.append(static_cast<const char*>(p), n);
  }
  std::string buffer_;
};

// Reads little-endian fields; throws ParseError on truncation.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void ExpectMagic(std::string_view magic);
  std::uint8_t U8() { return Pod<std::uint8_t>(); }
  std::uint16_t U16() { return Pod<std::uint16_t>(); }
  std::uint32_t U32() { return Pod<std::uint32_t>(); }
  float F32() { return Pod<float>(); }
  double F64() { return Pod<double>(); }
  std::string String16();
  bool AtEnd() const { return pos_ == data_.size(); }
  void ExpectEnd();

 private:
  template <typename T>
  T Pod() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void Need(std::size_t n);

  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string ReadFile(const std::filesystem::path& path);
// Truncates and writes; throws DataError if the file cannot be written.
void WriteFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace avsol

#endif  // AVSOL_BINARY_IO_H_
