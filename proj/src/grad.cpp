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

#include "extattn/grad.hpp"

#include <algorithm>
#include <cmath>

#include "extattn/attention.hpp"
#include "extattn/random.hpp"
#include "external_core.hpp"

namespace extattn {

const Tensor& TapeRecord::value(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw TapeError("tape has no recorded value '" + key + "'");
  return it->second;
}

const LinearLayer& TapeRecord::layer(const std::string& key) const {
  auto it = layers.find(key);
  if (it == layers.end()) throw TapeError("tape has no recorded layer '" + key + "'");
  return it->second;
}

const TapeRecord& GradTape::record() const {
  if (!record_) throw TapeError("tape is empty (never recorded or already consumed)");
  return *record_;
}

TapeRecord GradTape::take() {
  if (!record_) throw TapeError("tape is empty (never recorded or already consumed)");
  TapeRecord r = std::move(*record_);
  record_.reset();
  return r;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy, std::size_t axis) {
  if (y.shape() != dy.shape()) {
    throw DimensionError("softmax_backward: shape mismatch " + shape_to_string(y.shape()) +
                         " vs " + shape_to_string(dy.shape()));
  }
  const auto s = detail::split_axis(y.shape(), axis, "softmax_backward");
  Tensor dx(y.shape());
  auto yd = y.data();
  auto gd = dy.data();
  auto xd = dx.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      double dot = 0.0;
      for (std::size_t k = 0; k < s.length; ++k) {
        const std::size_t at = base + k * s.inner;
        dot += gd[at] * yd[at];
      }
      for (std::size_t k = 0; k < s.length; ++k) {
        const std::size_t at = base + k * s.inner;
        xd[at] = yd[at] * (gd[at] - dot);
      }
    }
  }
  return dx;
}

Tensor l1_normalize_backward(const Tensor& x, const Tensor& dy, std::size_t axis, double eps) {
  if (x.shape() != dy.shape()) {
    throw DimensionError("l1_normalize_backward: shape mismatch " + shape_to_string(x.shape()) +
                         " vs " + shape_to_string(dy.shape()));
  }
  const auto s = detail::split_axis(x.shape(), axis, "l1_normalize_backward");
  Tensor dx(x.shape());
  auto xd = x.data();
  auto gd = dy.data();
  auto od = dx.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      double total = 0.0;
      double dot = 0.0;
      for (std::size_t k = 0; k < s.length; ++k) {
        const std::size_t at = base + k * s.inner;
        total += std::abs(xd[at]);
        dot += gd[at] * xd[at];
      }
      const double denom = total + eps;
      for (std::size_t k = 0; k < s.length; ++k) {
        const std::size_t at = base + k * s.inner;
        const double sign = xd[at] > 0.0 ? 1.0 : (xd[at] < 0.0 ? -1.0 : 0.0);
        od[at] = gd[at] / denom - sign * dot / (denom * denom);
      }
    }
  }
  return dx;
}

Tensor double_norm_backward(const Tensor& raw, const Tensor& d_attn) {
  if (raw.rank() < 2) {
    throw DimensionError("double_norm_backward: expected (..., N, S), got " +
                         shape_to_string(raw.shape()));
  }
  const std::size_t r = raw.rank();
  const Tensor p = softmax(raw, r - 2);
  return softmax_backward(p, l1_normalize_backward(p, d_attn, r - 1, double_norm_eps<double>()), r - 2);
}

namespace {

// Gradients of y = x W^T + b for 2-D x and dy; returns dx.
Tensor linear_backward(const LinearLayer& layer, const Tensor& x, const Tensor& dy,
                       const std::string& role, Gradients& grads) {
  grads.params[role + ".weight"] = matmul(transpose2d(dy), x);
  if (layer.bias) {
    const std::size_t rows = dy.shape()[0], cols = dy.shape()[1];
    Tensor db({cols});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) db[c] += dy.at(r, c);
    grads.params[role + ".bias"] = std::move(db);
  }
  return matmul(dy, layer.weight);
}

Tensor as_rows(const Tensor& t) {
  const std::size_t w = t.shape().back();
  return t.reshape({t.numel() / w, w});
}

Gradients backward_self_attention(const TapeRecord& rec, const Tensor& g) {
  const Tensor& f = rec.value("input");
  const Tensor& q = rec.value("q");
  const Tensor& k = rec.value("k");
  const Tensor& v = rec.value("v");
  const Tensor& attn = rec.value("attn");
  const Tensor& z = rec.value("z");

  Gradients grads;
  Tensor dz = linear_backward(rec.layer("wo"), z, g, "wo", grads);
  Tensor d_attn = matmul_transposed(dz, v);
  Tensor dv = matmul(transpose2d(attn), dz);
  Tensor d_scores = softmax_backward(attn, d_attn, 1);
  Tensor dq = matmul(d_scores, k);
  Tensor dk = matmul(transpose2d(d_scores), q);

  Tensor df = linear_backward(rec.layer("wq"), f, dq, "wq", grads);
  df = df + linear_backward(rec.layer("wk"), f, dk, "wk", grads);
  df = df + linear_backward(rec.layer("wv"), f, dv, "wv", grads);
  grads.input = std::move(df);
  return grads;
}

Gradients backward_simplified(const TapeRecord& rec, const Tensor& g) {
  const Tensor& f = rec.value("input");
  const Tensor& attn = rec.value("attn");
  Tensor d_scores = softmax_backward(attn, matmul_transposed(g, f), 1);
  Gradients grads;
  grads.input = matmul(transpose2d(attn), g) + matmul(d_scores, f) +
                matmul(transpose2d(d_scores), f);
  return grads;
}

Gradients backward_external(const TapeRecord& rec, const Tensor& g) {
  const Tensor& f = rec.value("input");
  const Tensor& q = rec.value("q");
  const LinearLayer& mk = rec.layer("mk");
  const LinearLayer& mv = rec.layer("mv");

  auto core = detail::external_core_backward(q, rec.value("normed"), rec.value("attn"),
                                             g.reshape(q.shape()), mk, mv, rec.norm);
  Gradients grads;
  grads.params["mk.weight"] = std::move(core.d_mk);
  grads.params["mv.weight"] = std::move(core.d_mv);
  Tensor df = linear_backward(rec.layer("wq"), as_rows(f), as_rows(core.d_queries), "wq", grads);
  grads.input = std::move(df).reshape(rec.input_shape);
  return grads;
}

Gradients backward_multi_head(const TapeRecord& rec, const Tensor& g) {
  const Tensor& f = rec.value("input");
  const Tensor& qh = rec.value("q");
  const Tensor& z = rec.value("z");
  const std::size_t heads = rec.heads;
  const std::size_t groups = qh.shape()[0], n = qh.shape()[1], dh = qh.shape()[2];
  const std::size_t batch = groups / heads;

  Gradients grads;
  Tensor dz = linear_backward(rec.layer("wo"), as_rows(z), as_rows(g), "wo", grads);
  Tensor d_heads = permute(std::move(dz).reshape({batch, n, heads, dh}), {0, 2, 1, 3})
                       .reshape({groups, n, dh});

  auto core = detail::external_core_backward(qh, rec.value("normed"), rec.value("attn"), d_heads,
                                             rec.layer("mk"), rec.layer("mv"), rec.norm);
  grads.params["mk.weight"] = std::move(core.d_mk);
  grads.params["mv.weight"] = std::move(core.d_mv);

  Tensor dq = permute(core.d_queries.reshape({batch, heads, n, dh}), {0, 2, 1, 3})
                  .reshape({batch * n, heads * dh});
  Tensor df = linear_backward(rec.layer("wq"), as_rows(f), dq, "wq", grads);
  grads.input = std::move(df).reshape(rec.input_shape);
  return grads;
}

}  // namespace

Gradients backward(GradTape&& tape, const Tensor& d_out) {
  const TapeRecord rec = tape.take();
  if (d_out.shape() != rec.output_shape) {
    throw TapeError("cotangent shape " + shape_to_string(d_out.shape()) +
                    " does not match forward output " + shape_to_string(rec.output_shape));
  }
  switch (rec.mechanism) {
    case Mechanism::SelfAttention: return backward_self_attention(rec, d_out);
    case Mechanism::SimplifiedSelfAttention: return backward_simplified(rec, d_out);
    case Mechanism::External: return backward_external(rec, d_out);
    case Mechanism::MultiHeadExternal: return backward_multi_head(rec, d_out);
  }
  throw TapeError("tape has an unknown mechanism");
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_error);
  return m;
}

bool GradCheckReport::passed(double tolerance) const {
  return !params.empty() && max_rel_error() < tolerance;
}

namespace {

double sum_of_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

// Gradcheck input: B = 2 for MEA (to cover the batch path), 2-D otherwise.
Tensor gradcheck_input(const AttentionConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1F));
  Shape shape = cfg.mechanism == Mechanism::MultiHeadExternal
                    ? Shape{2, cfg.n, cfg.input_width()}
                    : Shape{cfg.n, cfg.input_width()};
  Tensor f(shape);
  for (double& v : f.data()) v = rng.normal();
  return f;
}

}  // namespace

GradCheckReport finite_diff_check(const AttentionConfig& config, std::uint64_t seed,
                                  double step) {
  config.validate();
  if (!(step > 0.0)) throw ConfigError("finite difference step must be positive");

  AttentionModel model = make_model(config, seed);
  Tensor f = gradcheck_input(config, seed);

  auto fwd = forward(model, f, /*record=*/true);
  check_finite(fwd.f_out, "gradcheck forward output");
  const Gradients analytic = backward(std::move(fwd.tape), scale(fwd.f_out, 2.0));

  auto loss = [&]() { return sum_of_squares(forward(model, f, /*record=*/false).f_out); };

  GradCheckReport report{config, seed, step, {}};
  auto check_tensor = [&](const std::string& name, std::span<double> values,
                          const Tensor& grad) {
    ParamCheck pc{name, 0.0, values.size()};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss();
      values[i] = saved - step;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = grad[i];
      if (std::isnan(numeric) || std::isnan(exact)) {
        throw NumericError("gradcheck: NaN in '" + name + "' at flat index " +
                           std::to_string(i));
      }
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      pc.max_rel_error = std::max(pc.max_rel_error, std::abs(exact - numeric) / denom);
    }
    report.params.push_back(std::move(pc));
  };

  for (auto& layer : model.layers) {
    const std::string w = layer.name + ".weight";
    check_tensor(w, layer.weight.data(), analytic.params.at(w));
    if (layer.bias) {
      const std::string b = layer.name + ".bias";
      check_tensor(b, layer.bias->data(), analytic.params.at(b));
    }
  }
  check_tensor("input", f.data(), analytic.input);
  return report;
}

}  // namespace extattn
