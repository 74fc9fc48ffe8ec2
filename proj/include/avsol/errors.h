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

#ifndef AVSOL_ERRORS_H_
#define AVSOL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace avsol {

// Bad input data: malformed files, invariant violations, mismatched ids.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed record in a text or binary file. Carries the 1-based line (or
// record) number when one applies.
class ParseError : public DataError {
 public:
  ParseError(const std::string& message, long line = 0)
      : DataError(line > 0 ? "line " + std::to_string(line) + ": " + message
                           : message),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// Tensor shape contract violation. The message names the op and the shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Broken internal contract (a bug, not bad input).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace avsol

#endif  // AVSOL_ERRORS_H_
