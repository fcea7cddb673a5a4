// Copyright 2026 The Roofer Authors.
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roofer {

// Every failure raised by the library derives from Error. Each concrete
// subclass names one failure kind so callers can catch precisely.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ROOFER_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

ROOFER_DEFINE_ERROR(IoError);
ROOFER_DEFINE_ERROR(EmptyKb);
ROOFER_DEFINE_ERROR(EmptyCorpus);
ROOFER_DEFINE_ERROR(ShapeMismatch);
ROOFER_DEFINE_ERROR(AllIgnored);
ROOFER_DEFINE_ERROR(NotScalar);
ROOFER_DEFINE_ERROR(NonDeterministic);
ROOFER_DEFINE_ERROR(IdOutOfRange);
ROOFER_DEFINE_ERROR(TooLong);
ROOFER_DEFINE_ERROR(DepthTooLarge);
ROOFER_DEFINE_ERROR(DimMismatch);
ROOFER_DEFINE_ERROR(NoUnmaskedPositions);
ROOFER_DEFINE_ERROR(EmptyWindow);
ROOFER_DEFINE_ERROR(EmptyDataset);
ROOFER_DEFINE_ERROR(ConfigMismatch);
ROOFER_DEFINE_ERROR(Corrupt);
ROOFER_DEFINE_ERROR(LengthMismatch);
ROOFER_DEFINE_ERROR(EmptyInput);
ROOFER_DEFINE_ERROR(DomainError);
ROOFER_DEFINE_ERROR(InvalidConfig);
ROOFER_DEFINE_ERROR(InvalidArgument);

#undef ROOFER_DEFINE_ERROR

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, const std::string& what)
      : Error("MalformedLine(" + std::to_string(line_no) + "): " + what),
        line_no_(line_no) {}

  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

}  // namespace roofer
