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

// Hand-written reverse-mode passes for the attention mechanisms, and a
// central finite-difference checker for them.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "extattn/config.hpp"
#include "extattn/layers.hpp"
#include "extattn/tensor.hpp"

namespace extattn {

/// Everything a backward pass needs from its forward call.
struct TapeRecord {
  Mechanism mechanism = Mechanism::External;
  Normalization norm = Normalization::DoubleNorm;
  std::size_t heads = 1;
  Shape input_shape;
  Shape output_shape;
  /// Copies of the layers used, keyed by role ("wq", "mk", ...).
  std::map<std::string, LinearLayer> layers;
  /// Forward intermediates keyed by role ("input", "q", "raw", "attn", ...).
  std::map<std::string, Tensor> values;

  const Tensor& value(const std::string& key) const;
  const LinearLayer& layer(const std::string& key) const;
};

/// Owning handle to a TapeRecord. Copying deep-copies; moving leaves the
/// source empty. backward() consumes the tape it is given.
class GradTape {
 public:
  GradTape() = default;
  explicit GradTape(TapeRecord record)
      : record_(std::make_unique<TapeRecord>(std::move(record))) {}

  GradTape(const GradTape& other)
      : record_(other.record_ ? std::make_unique<TapeRecord>(*other.record_) : nullptr) {}
  GradTape& operator=(const GradTape& other) {
    if (this != &other) {
      record_ = other.record_ ? std::make_unique<TapeRecord>(*other.record_) : nullptr;
    }
    return *this;
  }
  GradTape(GradTape&&) noexcept = default;
  GradTape& operator=(GradTape&&) noexcept = default;

  bool has_value() const noexcept { return record_ != nullptr; }
  const TapeRecord& record() const;

  /// Releases the record, leaving the tape empty.
  TapeRecord take();

 private:
  std::unique_ptr<TapeRecord> record_;
};

/// Gradients of <d_out, F_out>: one entry per learnable tensor, keyed
/// "<role>.weight" / "<role>.bias", plus the gradient w.r.t. the input.
struct Gradients {
  std::map<std::string, Tensor> params;
  Tensor input;
};

/// Consumes the tape. Throws TapeError if the tape is empty or d_out does not
/// have the recorded output shape.
Gradients backward(GradTape&& tape, const Tensor& d_out);

/// dx for y = softmax(x, axis), given y and dy.
Tensor softmax_backward(const Tensor& y, const Tensor& dy, std::size_t axis);

/// dx for y = l1_normalize(x, axis, eps), given x and dy. eps is treated as a
/// constant of the denominator.
Tensor l1_normalize_backward(const Tensor& x, const Tensor& dy, std::size_t axis,
                             double eps = kDefaultL1Eps);

/// Gradient of double_norm(raw) w.r.t. raw, given the raw input and the
/// cotangent of the normalized map.
Tensor double_norm_backward(const Tensor& raw, const Tensor& d_attn);

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  AttentionConfig config;
  std::uint64_t seed = 0;
  double step = 1e-5;
  std::vector<ParamCheck> params;  // learnable tensors, then "input"

  double max_rel_error() const;
  bool passed(double tolerance = 1e-4) const;
};

/// Compares backward() against central differences of L = sum(F_out^2) for
/// every entry of every parameter and of the input. Relative error uses the
/// denominator max(|analytic|, |numeric|, 1e-8). Throws NumericError (with
/// the offending parameter and index) if either side is NaN.
GradCheckReport finite_diff_check(const AttentionConfig& config, std::uint64_t seed,
                                  double step = 1e-5);

}  // namespace extattn
