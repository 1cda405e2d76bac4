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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace extattn {

enum class Mechanism {
  SelfAttention,            // softmax(Q K^T) V, then W_o
  SimplifiedSelfAttention,  // softmax(F F^T) F, parameter-free
  External,                 // Norm(Fq M_k^T) M_v
  MultiHeadExternal,        // per-head External with shared memories, then W_o
};

enum class Normalization {
  Softmax,     // row softmax over the memory axis
  DoubleNorm,  // softmax over pixels, then L1 over memory elements
};

std::string_view to_string(Mechanism m);
std::string_view to_string(Normalization n);

/// Accepts the short CLI names: sa, ssa, ea, mea.
std::optional<Mechanism> parse_mechanism(std::string_view s);
/// Accepts: softmax, double (or doublenorm).
std::optional<Normalization> parse_normalization(std::string_view s);

/// Mechanism selector plus dimensions.
///
///   n        pixel count N
///   d_in     input channels (EA/MEA query projection input; SA/SSA use d)
///   d        model channels
///   d_prime  query/key width (SA only)
///   s        memory elements S (EA/MEA)
///   heads    head count H (MEA)
///
/// query_bias adds a bias to the query projection (every mechanism except SSA).
/// norm applies to EA and MEA; SA and SSA always use row softmax.
struct AttentionConfig {
  Mechanism mechanism = Mechanism::External;
  std::size_t n = 1;
  std::size_t d_in = 1;
  std::size_t d = 1;
  std::size_t d_prime = 1;
  std::size_t s = 1;
  std::size_t heads = 1;
  Normalization norm = Normalization::DoubleNorm;
  bool query_bias = false;

  /// Throws ConfigError on a zero dimension or d % heads != 0 (MEA).
  void validate() const;

  /// Input channel count actually consumed by the mechanism.
  std::size_t input_width() const;
  /// Output channel count produced by the mechanism.
  std::size_t output_width() const;

  friend bool operator==(const AttentionConfig&, const AttentionConfig&) = default;
};

std::string describe(const AttentionConfig& cfg);

}  // namespace extattn
