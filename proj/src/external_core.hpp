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

// Shared kernel of single- and multi-head external attention, operating on
// query groups of shape (G, N, w): one group per sample (EA) or per
// (sample, head) pair (MEA).

#include "extattn/config.hpp"
#include "extattn/layers.hpp"
#include "extattn/tensor.hpp"

namespace extattn::detail {

struct ExternalCoreForward {
  Tensor normed;  // softmax over N (DoubleNorm) or the final map (Softmax), (G, N, S)
  Tensor attn;    // (G, N, S)
  Tensor out;     // (G, N, w)
};

ExternalCoreForward external_core_forward(const Tensor& queries, const LinearLayer& mk,
                                          const LinearLayer& mv, Normalization norm);

struct ExternalCoreBackward {
  Tensor d_queries;  // (G, N, w)
  Tensor d_mk;       // (S, w)
  Tensor d_mv;       // (S, w)
};

ExternalCoreBackward external_core_backward(const Tensor& queries, const Tensor& normed,
                                            const Tensor& attn, const Tensor& d_out,
                                            const LinearLayer& mk, const LinearLayer& mv,
                                            Normalization norm);

}  // namespace extattn::detail
