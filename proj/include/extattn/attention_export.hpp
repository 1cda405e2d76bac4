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

// Renders attention maps as 8-bit grayscale PGM images.
//
// Each map is one column of A (one memory element s of one head h) laid out
// as a rows x cols image over the N pixels. Values are min-max normalized
// per map: byte = round(255 (v - min) / (max - min)); a constant map renders
// as all zeros. Self-attention maps are rows of A (one query pixel each).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "extattn/attention.hpp"
#include "extattn/tensor.hpp"

namespace extattn {

struct MapLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Explicit rows/cols must both be given and multiply to n; otherwise n
/// must be a perfect square. Throws ConfigError.
MapLayout infer_layout(std::size_t n, std::optional<std::size_t> rows,
                       std::optional<std::size_t> cols);

std::vector<std::uint8_t> to_grayscale(std::span<const double> values);

/// Binary P5, maxval 255.
void write_pgm(const std::filesystem::path& path, const MapLayout& layout,
               std::span<const std::uint8_t> pixels);

struct AttentionDump {
  std::vector<std::filesystem::path> images;  // attn_h{h}_s{s}.pgm, head-major
  std::filesystem::path csv;                  // attn.csv: h,s,pixel,value
};

/// Runs the model on one sample (a [N x d_in] tensor, or [1 x N x d_in])
/// and writes every map into out_dir, creating it if needed.
AttentionDump dump_attention_maps(const AttentionModel& model, const Tensor& input,
                                  const MapLayout& layout, const std::filesystem::path& out_dir);

}  // namespace extattn
