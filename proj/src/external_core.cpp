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

#include "external_core.hpp"

#include "extattn/grad.hpp"

namespace extattn::detail {

namespace {

void check_memories(const Tensor& queries, const LinearLayer& mk, const LinearLayer& mv) {
  mk.validate();
  mv.validate();
  require_rank(queries.shape(), 3, "external attention queries");
  const std::size_t w = queries.shape()[2];
  if (mk.in_features() != w || mv.in_features() != w) {
    throw DimensionError("external attention: memory widths (" +
                         std::to_string(mk.in_features()) + ", " +
                         std::to_string(mv.in_features()) + ") do not match query width " +
                         std::to_string(w));
  }
  if (mk.out_features() != mv.out_features()) {
    throw DimensionError("external attention: M_k has " + std::to_string(mk.out_features()) +
                         " elements but M_v has " + std::to_string(mv.out_features()));
  }
  if (mk.bias || mv.bias) throw DimensionError("external attention: memory units have no bias");
}

}  // namespace

ExternalCoreForward external_core_forward(const Tensor& queries, const LinearLayer& mk,
                                          const LinearLayer& mv, Normalization norm) {
  check_memories(queries, mk, mv);
  const std::size_t g = queries.shape()[0], n = queries.shape()[1], w = queries.shape()[2];
  const std::size_t s = mk.out_features();

  Tensor raw = matmul_transposed(queries.reshape({g * n, w}), mk.weight).reshape({g, n, s});
  ExternalCoreForward fwd;
  if (norm == Normalization::DoubleNorm) {
    fwd.normed = softmax(raw, 1);
    fwd.attn = l1_normalize(fwd.normed, 2, double_norm_eps<double>());
  } else {
    fwd.normed = softmax(raw, 2);
    fwd.attn = fwd.normed;
  }
  fwd.out = matmul(fwd.attn.reshape({g * n, s}), mv.weight).reshape({g, n, w});
  return fwd;
}

ExternalCoreBackward external_core_backward(const Tensor& queries, const Tensor& normed,
                                            const Tensor& attn, const Tensor& d_out,
                                            const LinearLayer& mk, const LinearLayer& mv,
                                            Normalization norm) {
  const std::size_t g = queries.shape()[0], n = queries.shape()[1], w = queries.shape()[2];
  const std::size_t s = mk.out_features();

  const Tensor attn2 = attn.reshape({g * n, s});
  const Tensor dout2 = d_out.reshape({g * n, w});

  ExternalCoreBackward bwd;
  bwd.d_mv = matmul(transpose2d(attn2), dout2);
  Tensor d_attn = matmul_transposed(dout2, mv.weight).reshape({g, n, s});

  Tensor d_raw;
  if (norm == Normalization::DoubleNorm) {
    d_raw = softmax_backward(normed, l1_normalize_backward(normed, d_attn, 2, double_norm_eps<double>()), 1);
  } else {
    d_raw = softmax_backward(normed, d_attn, 2);
  }
  const Tensor draw2 = std::move(d_raw).reshape({g * n, s});
  const Tensor q2 = queries.reshape({g * n, w});
  bwd.d_mk = matmul(transpose2d(draw2), q2);
  bwd.d_queries = matmul(draw2, mk.weight).reshape({g, n, w});
  return bwd;
}

}  // namespace extattn::detail
