// Copyright 2026 The extattn Authors.
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

#include <stdexcept>
#include <string>

namespace extattn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An AttentionConfig (or a derived configuration) violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a GradTape: backward on an empty or already consumed tape, or a
/// cotangent whose shape does not match the recorded forward output.
class TapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Weight-file load failures. Each one is distinct so callers can tell a
// foreign file from a damaged or outdated one.
class BadMagicError : public IoError {
 public:
  using IoError::IoError;
};

class TruncatedFileError : public IoError {
 public:
  using IoError::IoError;
};

class VersionMismatchError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace extattn
