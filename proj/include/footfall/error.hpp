// Copyright 2026 The Footfall Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace footfall {

// Base of every error the engine throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  ManifestError(const std::string& what, std::size_t line)
      : Error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ManifestError(const std::string& what) : Error(what), line_(0) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A caller broke an operation's precondition (shapes, ranges, rates).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Checkpoint lacks the weights of a training stage the operation needs.
class StageError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace footfall
