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

#include "extattn/attention.hpp"

#include <algorithm>

#include "extattn/random.hpp"
#include "external_core.hpp"

namespace extattn {

namespace {

void require_width(const LinearLayer& layer, std::size_t in, const char* role) {
  layer.validate();
  if (layer.in_features() != in) {
    throw DimensionError(std::string(role) + ": layer expects width " +
                         std::to_string(layer.in_features()) + ", input has " +
                         std::to_string(in));
  }
}

}  // namespace

AttentionOutput self_attention(const Tensor& f, const LinearLayer& wq, const LinearLayer& wk,
                               const LinearLayer& wv, const LinearLayer& wo, bool record) {
  detail::require_rank(f.shape(), 2, "self_attention");
  const std::size_t d = f.shape()[1];
  require_width(wq, d, "self_attention wq");
  require_width(wk, d, "self_attention wk");
  require_width(wv, d, "self_attention wv");
  if (wq.out_features() != wk.out_features()) {
    throw DimensionError("self_attention: wq and wk widths differ (" +
                         std::to_string(wq.out_features()) + " vs " +
                         std::to_string(wk.out_features()) + ")");
  }
  require_width(wo, wv.out_features(), "self_attention wo");

  Tensor q = apply_linear(wq, f);
  Tensor k = apply_linear(wk, f);
  Tensor v = apply_linear(wv, f);
  Tensor attn = softmax(matmul_transposed(q, k), 1);
  Tensor z = matmul(attn, v);
  Tensor out = apply_linear(wo, z);

  AttentionOutput result{std::move(out), attn, {}};
  if (record) {
    TapeRecord rec;
    rec.mechanism = Mechanism::SelfAttention;
    rec.input_shape = f.shape();
    rec.output_shape = result.f_out.shape();
    rec.layers = {{"wq", wq}, {"wk", wk}, {"wv", wv}, {"wo", wo}};
    rec.values = {{"input", f}, {"q", std::move(q)}, {"k", std::move(k)}, {"v", std::move(v)},
                  {"attn", std::move(attn)}, {"z", std::move(z)}};
    result.tape = GradTape(std::move(rec));
  }
  return result;
}

AttentionOutput simplified_self_attention(const Tensor& f, bool record) {
  detail::require_rank(f.shape(), 2, "simplified_self_attention");
  Tensor attn = softmax(matmul_transposed(f, f), 1);
  Tensor out = matmul(attn, f);
  AttentionOutput result{std::move(out), attn, {}};
  if (record) {
    TapeRecord rec;
    rec.mechanism = Mechanism::SimplifiedSelfAttention;
    rec.input_shape = f.shape();
    rec.output_shape = result.f_out.shape();
    rec.values = {{"input", f}, {"attn", std::move(attn)}};
    result.tape = GradTape(std::move(rec));
  }
  return result;
}

Tensor double_norm(const Tensor& raw) {
  if (raw.rank() < 2) {
    throw DimensionError("double_norm: expected (..., N, S), got " +
                         shape_to_string(raw.shape()));
  }
  const std::size_t r = raw.rank();
  return l1_normalize(softmax(raw, r - 2), r - 1, double_norm_eps<double>());
}

AttentionOutput external_attention(const Tensor& f, const LinearLayer& wq, const LinearLayer& mk,
                                   const LinearLayer& mv, Normalization norm, bool record) {
  if (f.rank() != 2 && f.rank() != 3) {
    throw DimensionError("external_attention: expected [N x d_in] or [B x N x d_in], got " +
                         shape_to_string(f.shape()));
  }
  require_width(wq, f.shape().back(), "external_attention wq");
  const std::size_t batch = f.rank() == 3 ? f.shape()[0] : 1;
  const std::size_t n = f.shape()[f.rank() - 2];
  const std::size_t d = wq.out_features();

  Tensor fq = apply_linear(wq, f).reshape({batch, n, d});
  auto core = detail::external_core_forward(fq, mk, mv, norm);

  Shape out_shape = f.shape();
  out_shape.back() = d;
  Shape attn_shape = f.rank() == 3 ? Shape{batch, n, mk.out_features()}
                                   : Shape{n, mk.out_features()};

  AttentionOutput result{core.out.reshape(out_shape), core.attn.reshape(attn_shape), {}};
  if (record) {
    TapeRecord rec;
    rec.mechanism = Mechanism::External;
    rec.norm = norm;
    rec.input_shape = f.shape();
    rec.output_shape = out_shape;
    rec.layers = {{"wq", wq}, {"mk", mk}, {"mv", mv}};
    rec.values = {{"input", f}, {"q", std::move(fq)}, {"normed", std::move(core.normed)},
                  {"attn", std::move(core.attn)}};
    result.tape = GradTape(std::move(rec));
  }
  return result;
}

AttentionOutput multi_head_external_attention(const Tensor& f, const LinearLayer& wq,
                                              const LinearLayer& mk, const LinearLayer& mv,
                                              const LinearLayer& wo, std::size_t heads,
                                              Normalization norm, bool record) {
  if (f.rank() != 2 && f.rank() != 3) {
    throw DimensionError(
        "multi_head_external_attention: expected [B x N x d_in] or [N x d_in], got " +
        shape_to_string(f.shape()));
  }
  const std::size_t d_in = f.shape().back();
  require_width(wq, d_in, "multi_head_external_attention wq");
  const std::size_t d = wq.out_features();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("multi_head_external_attention: d = " + std::to_string(d) +
                      " is not divisible by H = " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  require_width(wo, d, "multi_head_external_attention wo");
  const std::size_t batch = f.rank() == 3 ? f.shape()[0] : 1;
  const std::size_t n = f.shape()[f.rank() - 2];
  const std::size_t s = mk.out_features();

  // (B, N, d) -> (B, N, H, d/H) -> (B, H, N, d/H), flattened to B*H groups.
  Tensor fq = apply_linear(wq, f).reshape({batch, n, heads, dh});
  Tensor qh = permute(fq, {0, 2, 1, 3}).reshape({batch * heads, n, dh});
  auto core = detail::external_core_forward(qh, mk, mv, norm);

  // (B, H, N, d/H) -> (B, N, H, d/H) -> (B, N, d)
  Tensor z = permute(core.out.reshape({batch, heads, n, dh}), {0, 2, 1, 3})
                 .reshape({batch, n, d});
  Tensor out = apply_linear(wo, z);

  Shape out_shape = f.shape();
  out_shape.back() = wo.out_features();
  AttentionOutput result{std::move(out).reshape(out_shape),
                         core.attn.reshape({batch, heads, n, s}), {}};
  if (record) {
    TapeRecord rec;
    rec.mechanism = Mechanism::MultiHeadExternal;
    rec.norm = norm;
    rec.heads = heads;
    rec.input_shape = f.shape();
    rec.output_shape = out_shape;
    rec.layers = {{"wq", wq}, {"mk", mk}, {"mv", mv}, {"wo", wo}};
    rec.values = {{"input", f}, {"q", std::move(qh)}, {"normed", std::move(core.normed)},
                  {"attn", std::move(core.attn)}, {"z", std::move(z)}};
    result.tape = GradTape(std::move(rec));
  }
  return result;
}

AttentionConfig head_memory_tradeoff(const AttentionConfig& base, std::size_t k) {
  base.validate();
  if (k == 0 || base.s % k != 0) {
    throw ConfigError("head_memory_tradeoff: k = " + std::to_string(k) + " does not divide S = " +
                      std::to_string(base.s));
  }
  AttentionConfig out = base;
  out.heads = base.heads * k;
  out.s = base.s / k;
  if (out.d % out.heads != 0) {
    throw ConfigError("head_memory_tradeoff: d = " + std::to_string(base.d) +
                      " is not divisible by H*k = " + std::to_string(out.heads));
  }
  return out;
}

const LinearLayer& AttentionModel::layer(const std::string& role) const {
  auto it = std::find_if(layers.begin(), layers.end(),
                         [&](const LinearLayer& l) { return l.name == role; });
  if (it == layers.end()) throw ConfigError("model has no layer '" + role + "'");
  return *it;
}

LinearLayer& AttentionModel::layer(const std::string& role) {
  return const_cast<LinearLayer&>(std::as_const(*this).layer(role));
}

AttentionModel make_model(const AttentionConfig& config, std::uint64_t seed) {
  config.validate();
  struct Spec {
    const char* role;
    std::size_t out, in;
    bool bias;
  };
  std::vector<Spec> specs;
  const AttentionConfig& c = config;
  switch (c.mechanism) {
    case Mechanism::SelfAttention:
      specs = {{"wq", c.d_prime, c.d, c.query_bias},
               {"wk", c.d_prime, c.d, false},
               {"wv", c.d, c.d, false},
               {"wo", c.d, c.d, false}};
      break;
    case Mechanism::SimplifiedSelfAttention:
      break;
    case Mechanism::External:
      specs = {{"wq", c.d, c.d_in, c.query_bias}, {"mk", c.s, c.d, false}, {"mv", c.s, c.d, false}};
      break;
    case Mechanism::MultiHeadExternal:
      specs = {{"wq", c.d, c.d_in, c.query_bias},
               {"mk", c.s, c.d / c.heads, false},
               {"mv", c.s, c.d / c.heads, false},
               {"wo", c.d_in, c.d, false}};
      break;
  }
  AttentionModel model{config, {}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    model.layers.push_back(init_layer(s.out, s.in, derive_seed(seed, i), s.bias, s.role));
  }
  return model;
}

AttentionModel model_from_layers(const std::vector<LinearLayer>& layers, std::size_t n,
                                 Normalization norm) {
  auto find = [&](const char* role) -> const LinearLayer* {
    for (const auto& l : layers)
      if (l.name == role) return &l;
    return nullptr;
  };
  const LinearLayer* wq = find("wq");
  const LinearLayer* wk = find("wk");
  const LinearLayer* wv = find("wv");
  const LinearLayer* wo = find("wo");
  const LinearLayer* mk = find("mk");
  const LinearLayer* mv = find("mv");

  AttentionConfig cfg;
  cfg.n = n;
  cfg.norm = norm;
  AttentionModel model;
  if (wq && wk && wv && wo) {
    cfg.mechanism = Mechanism::SelfAttention;
    cfg.d = wq->in_features();
    cfg.d_in = cfg.d;
    cfg.d_prime = wq->out_features();
    cfg.query_bias = wq->bias.has_value();
    model.layers = {*wq, *wk, *wv, *wo};
  } else if (wq && mk && mv) {
    cfg.d_in = wq->in_features();
    cfg.d = wq->out_features();
    cfg.s = mk->out_features();
    cfg.query_bias = wq->bias.has_value();
    if (mk->in_features() == 0 || cfg.d % mk->in_features() != 0) {
      throw ConfigError("memory width " + std::to_string(mk->in_features()) +
                        " does not divide query width " + std::to_string(cfg.d));
    }
    if (wo) {
      cfg.mechanism = Mechanism::MultiHeadExternal;
      cfg.heads = cfg.d / mk->in_features();
      model.layers = {*wq, *mk, *mv, *wo};
    } else {
      cfg.mechanism = Mechanism::External;
      if (mk->in_features() != cfg.d) {
        throw ConfigError("external attention memory width does not match query width");
      }
      model.layers = {*wq, *mk, *mv};
    }
  } else {
    throw ConfigError("weights do not describe a known mechanism (need wq/wk/wv/wo or wq/mk/mv)");
  }
  cfg.validate();
  model.config = cfg;
  return model;
}

AttentionOutput forward(const AttentionModel& model, const Tensor& f, bool record) {
  const auto& c = model.config;
  switch (c.mechanism) {
    case Mechanism::SelfAttention:
      return self_attention(f, model.layer("wq"), model.layer("wk"), model.layer("wv"),
                            model.layer("wo"), record);
    case Mechanism::SimplifiedSelfAttention:
      return simplified_self_attention(f, record);
    case Mechanism::External:
      return external_attention(f, model.layer("wq"), model.layer("mk"), model.layer("mv"),
                                c.norm, record);
    case Mechanism::MultiHeadExternal:
      return multi_head_external_attention(f, model.layer("wq"), model.layer("mk"),
                                           model.layer("mv"), model.layer("wo"), c.heads, c.norm,
                                           record);
  }
  throw ConfigError("unknown mechanism");
}

}  // namespace extattn
