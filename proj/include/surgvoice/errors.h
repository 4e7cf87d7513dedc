// Copyright (c) 2026 The surgvoice Authors. All Rights Reserved.
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

#ifndef SURGVOICE_ERRORS_H_
#define SURGVOICE_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace surgvoice {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No JSON object could be extracted, or a required field is missing.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Live model server unreachable or returned a non-2xx status.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Strict mock script has no unique entry for a request.
class MockMiss : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::size_t row = 0)
      : Error(row ? "row " + std::to_string(row) + ": " + what : what),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class SourceExhausted : public Error {
 public:
  SourceExhausted() : Error("transcript source exhausted") {}
  explicit SourceExhausted(const std::string& what) : Error(what) {}
};

class UnknownStructure : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

// A workflow stage could not produce its output; the orchestrator routes
// this into the invalid loop instead of aborting the clip.
class StageFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace surgvoice

#endif  // SURGVOICE_ERRORS_H_
