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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extattn/tensor.hpp"

namespace extattn {

/// Weight matrix [out x in] with an optional bias [out].
///
/// Also used for the memory units M_k and M_v, which are stored as bias-free
/// [S x d] layers.
struct LinearLayer {
  std::string name;
  Tensor weight;
  std::optional<Tensor> bias;

  std::size_t out_features() const { return weight.shape().at(0); }
  std::size_t in_features() const { return weight.shape().at(1); }

  /// Checks rank and bias extent; throws DimensionError.
  void validate() const;

  friend bool operator==(const LinearLayer&, const LinearLayer&) = default;
};

/// Weights i.i.d. uniform on [-sqrt(1/in), +sqrt(1/in)) drawn from
/// Rng(seed) in row-major order; bias (if requested) is zero.
LinearLayer init_layer(std::size_t out, std::size_t in, std::uint64_t seed, bool bias,
                       std::string name = {});

/// Layer whose weight is the given tensor and which has no bias.
LinearLayer make_layer(std::string name, Tensor weight, std::optional<Tensor> bias = {});

/// y = x W^T (+ b), applied over all leading extents of x.
Tensor apply_linear(const LinearLayer& layer, const Tensor& x);

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline constexpr std::uint32_t kWeightFormatVersion = 1;

// Weight files ("EANW", little-endian):
//   magic "EANW" | u32 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 extents[rank]
//               | f64 data[numel]
//
// A layer named L is stored as tensor "L.weight" followed by "L.bias" when
// it has one.

void save_tensors(std::span<const NamedTensor> tensors, const std::filesystem::path& path);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

void save_weights(std::span<const LinearLayer> layers, const std::filesystem::path& path);

/// Inverse of save_weights. A tensor "L.bias" attaches to the layer named L;
/// any other tensor name (with ".weight" stripped) starts a new layer.
std::vector<LinearLayer> load_weights(const std::filesystem::path& path);

}  // namespace extattn
