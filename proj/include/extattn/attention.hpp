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

// Forward passes for self-attention, simplified self-attention, external
// attention and multi-head external attention.
//
// Shapes:
//   self_attention            F [N x d]        -> F_out [N x d],     A [N x N]
//   simplified_self_attention F [N x d]        -> F_out [N x d],     A [N x N]
//   external_attention        F [N x d_in]     -> F_out [N x d],     A [N x S]
//                             F [B x N x d_in] -> F_out [B x N x d], A [B x N x S]
//   multi_head_external_...   F [B x N x d_in] -> F_out [B x N x d_in],
//                                                 A [B x H x N x S]
//                             (a 2-D F is treated as B = 1 and F_out is 2-D)
//
// Memory units M_k and M_v are [S x w] layers, w being the (per-head) query
// width: raw scores are Fq M_k^T and the output is A M_v.

#include <cstdint>
#include <string>
#include <vector>

#include "extattn/config.hpp"
#include "extattn/grad.hpp"
#include "extattn/layers.hpp"
#include "extattn/tensor.hpp"

namespace extattn {

struct AttentionOutput {
  Tensor f_out;
  /// The normalized attention map, always materialized.
  Tensor attn;
  /// Empty unless the forward call was asked to record.
  GradTape tape;
};

AttentionOutput self_attention(const Tensor& f, const LinearLayer& wq, const LinearLayer& wk,
                               const LinearLayer& wv, const LinearLayer& wo,
                               bool record = true);

AttentionOutput simplified_self_attention(const Tensor& f, bool record = true);

/// Softmax over the pixel axis (second to last), then L1 normalization over
/// the memory axis (last). Rows over the memory axis sum to one.
Tensor double_norm(const Tensor& raw);

AttentionOutput external_attention(const Tensor& f, const LinearLayer& wq, const LinearLayer& mk,
                                   const LinearLayer& mv,
                                   Normalization norm = Normalization::DoubleNorm,
                                   bool record = true);

/// The same M_k and M_v are applied to every head.
AttentionOutput multi_head_external_attention(const Tensor& f, const LinearLayer& wq,
                                              const LinearLayer& mk, const LinearLayer& mv,
                                              const LinearLayer& wo, std::size_t heads,
                                              Normalization norm = Normalization::DoubleNorm,
                                              bool record = true);

/// Multiplies H by k and divides S by k; H * S (and so H * N * S) is kept.
AttentionConfig head_memory_tradeoff(const AttentionConfig& base, std::size_t k);

/// A configured mechanism together with its layers, keyed by role:
///   SA:  wq [d' x d], wk [d' x d], wv [d x d], wo [d x d]
///   SSA: (none)
///   EA:  wq [d x d_in], mk [S x d], mv [S x d]
///   MEA: wq [d x d_in], mk [S x d/H], mv [S x d/H], wo [d_in x d]
struct AttentionModel {
  AttentionConfig config;
  std::vector<LinearLayer> layers;

  const LinearLayer& layer(const std::string& role) const;
  LinearLayer& layer(const std::string& role);
};

/// Layer i is initialized with init_layer(..., derive_seed(seed, i)).
AttentionModel make_model(const AttentionConfig& config, std::uint64_t seed);

/// Rebuilds a model from loaded layers, inferring the mechanism from the
/// roles present and the dimensions from the weight shapes. Unknown roles
/// (e.g. a training read-out) are ignored.
AttentionModel model_from_layers(const std::vector<LinearLayer>& layers, std::size_t n,
                                 Normalization norm = Normalization::DoubleNorm);

/// Dispatches to the mechanism's forward pass.
AttentionOutput forward(const AttentionModel& model, const Tensor& f, bool record = true);

}  // namespace extattn
