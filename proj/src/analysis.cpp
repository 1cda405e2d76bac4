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

#include "extattn/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <new>
#include <ostream>

#include "extattn/attention.hpp"
#include "extattn/error.hpp"
#include "extattn/random.hpp"
#include "extattn/tensor.hpp"

namespace extattn {

namespace {

// Overflow-checked arithmetic for the closed-form counts.
struct Count {
  std::uint64_t v;

  friend Count operator*(Count a, Count b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a.v, b.v, &r)) throw ConfigError("count overflows 64 bits");
    return {r};
  }
  friend Count operator+(Count a, Count b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a.v, b.v, &r)) throw ConfigError("count overflows 64 bits");
    return {r};
  }
};

Count c(std::size_t v) { return {static_cast<std::uint64_t>(v)}; }

}  // namespace

std::uint64_t count_params(const AttentionConfig& cfg) {
  cfg.validate();
  const Count two{2};
  switch (cfg.mechanism) {
    case Mechanism::SelfAttention:
      return (two * c(cfg.d) * c(cfg.d_prime) + two * c(cfg.d) * c(cfg.d) +
              c(cfg.query_bias ? cfg.d_prime : 0))
          .v;
    case Mechanism::SimplifiedSelfAttention:
      return 0;
    case Mechanism::External:
      return (c(cfg.d_in) * c(cfg.d) + two * c(cfg.s) * c(cfg.d) + c(cfg.query_bias ? cfg.d : 0))
          .v;
    case Mechanism::MultiHeadExternal:
      return (two * c(cfg.d_in) * c(cfg.d) + two * c(cfg.s) * c(cfg.d / cfg.heads) +
              c(cfg.query_bias ? cfg.d : 0))
          .v;
  }
  return 0;
}

std::uint64_t count_macs(const AttentionConfig& cfg) {
  cfg.validate();
  const Count n = c(cfg.n), d = c(cfg.d), two{2};
  switch (cfg.mechanism) {
    case Mechanism::SelfAttention: {
      const Count dp = c(cfg.d_prime);
      const Count projections = two * n * d * dp + n * d * d;
      const Count affinities = n * n * dp;
      const Count aggregation = n * n * d;
      const Count output = n * d * d;
      return (projections + affinities + aggregation + output).v;
    }
    case Mechanism::SimplifiedSelfAttention:
      return (two * n * n * d).v;
    case Mechanism::External: {
      const Count s = c(cfg.s);
      return (n * c(cfg.d_in) * d + n * d * s + n * s * d).v;
    }
    case Mechanism::MultiHeadExternal: {
      const Count s = c(cfg.s), h = c(cfg.heads), dh = c(cfg.d / cfg.heads);
      const Count per_head = n * dh * s + n * s * dh;
      return (n * c(cfg.d_in) * d + h * per_head + n * d * c(cfg.d_in)).v;
    }
  }
  return 0;
}

CostReport cost_report(const AttentionConfig& config) {
  return {config, count_params(config), count_macs(config), std::nullopt};
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("slope fit needs at least two (x, y) pairs");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("slope fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ConfigError("slope fit needs at least two distinct x values");
  return sxy / sxx;
}

namespace {

// Inference-only forward in single precision, composed from the same
// tensor kernels as the double-precision path.
TensorF forward_f32(const AttentionModel& model, const TensorF& f) {
  auto w = [&](const char* role) { return model.layer(role).weight.cast<float>(); };
  const auto& cfg = model.config;
  switch (cfg.mechanism) {
    case Mechanism::SelfAttention: {
      TensorF q = matmul_transposed(f, w("wq"));
      TensorF k = matmul_transposed(f, w("wk"));
      TensorF v = matmul_transposed(f, w("wv"));
      TensorF a = softmax(matmul_transposed(q, k), 1);
      return matmul_transposed(matmul(a, v), w("wo"));
    }
    case Mechanism::SimplifiedSelfAttention:
      return matmul(softmax(matmul_transposed(f, f), 1), f);
    case Mechanism::External: {
      TensorF raw = matmul_transposed(matmul_transposed(f, w("wq")), w("mk"));
      TensorF a = cfg.norm == Normalization::DoubleNorm ? l1_normalize(softmax(raw, 0), 1, double_norm_eps<float>())
                                                        : softmax(raw, 1);
      return matmul(a, w("mv"));
    }
    case Mechanism::MultiHeadExternal: {
      const std::size_t n = cfg.n, h = cfg.heads, dh = cfg.d / cfg.heads;
      TensorF fq = matmul_transposed(f, w("wq")).reshape({n, h, dh});
      TensorF qh = permute(fq, {1, 0, 2}).reshape({h * n, dh});
      TensorF raw = matmul_transposed(qh, w("mk")).reshape({h, n, cfg.s});
      TensorF a = cfg.norm == Normalization::DoubleNorm ? l1_normalize(softmax(raw, 1), 2, double_norm_eps<float>())
                                                        : softmax(raw, 2);
      TensorF out = matmul(a.reshape({h * n, cfg.s}), w("mv")).reshape({h, n, dh});
      TensorF z = permute(out, {1, 0, 2}).reshape({n, cfg.d});
      return matmul_transposed(z, w("wo"));
    }
  }
  throw ConfigError("unknown mechanism");
}

// Rough peak working set of one forward, in bytes.
double estimate_bytes(const AttentionConfig& cfg, std::size_t scalar) {
  const double n = static_cast<double>(cfg.n), d = static_cast<double>(cfg.d);
  const double per_map = cfg.mechanism == Mechanism::SelfAttention ||
                                 cfg.mechanism == Mechanism::SimplifiedSelfAttention
                             ? n * n
                             : n * static_cast<double>(cfg.s) * static_cast<double>(cfg.heads);
  return static_cast<double>(scalar) * (3.0 * per_map + 6.0 * n * d);
}

}  // namespace

BenchResult bench_scaling(const BenchOptions& opt) {
  if (opt.repeats < 5) throw ConfigError("bench needs at least 5 repeats");
  if (opt.n_list.empty()) throw ConfigError("bench needs at least one N");

  BenchResult result;
  std::vector<double> ns, times;
  for (std::size_t n : opt.n_list) {
    AttentionConfig cfg;
    cfg.mechanism = opt.mechanism;
    cfg.n = n;
    cfg.d_in = opt.d;
    cfg.d = opt.d;
    cfg.d_prime = opt.d_prime;
    cfg.s = opt.s;
    cfg.heads = opt.heads;
    BenchRow row{cost_report(cfg), false, {}};

    const std::size_t scalar = opt.precision == Precision::F32 ? sizeof(float) : sizeof(double);
    if (estimate_bytes(cfg, scalar) > static_cast<double>(opt.memory_limit_bytes)) {
      row.skipped = true;
      row.skip_reason = "estimated working set exceeds memory limit";
      result.rows.push_back(std::move(row));
      continue;
    }

    try {
      const AttentionModel model = make_model(cfg, opt.seed);
      Rng rng(derive_seed(opt.seed, n));
      Tensor f({n, cfg.input_width()});
      for (double& v : f.data()) v = rng.normal();
      const TensorF f32 = f.cast<float>();

      // Consumes the output so the work cannot be elided.
      volatile double sink = 0.0;
      auto run_once = [&]() {
        if (opt.precision == Precision::F32) {
          sink = sink + forward_f32(model, f32)[0];
        } else {
          sink = sink + forward(model, f, /*record=*/false).f_out[0];
        }
      };

      for (unsigned i = 0; i < opt.warmup; ++i) run_once();
      std::vector<double> samples;
      for (unsigned i = 0; i < opt.repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run_once();
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double>(t1 - t0).count());
      }
      std::sort(samples.begin(), samples.end());
      const std::size_t m = samples.size();
      const double median =
          m % 2 ? samples[m / 2] : 0.5 * (samples[m / 2 - 1] + samples[m / 2]);
      row.cost.wall_time = median;
      ns.push_back(static_cast<double>(n));
      times.push_back(median);
    } catch (const std::bad_alloc&) {
      row.skipped = true;
      row.skip_reason = "out of memory";
    }
    result.rows.push_back(std::move(row));
  }
  if (ns.size() >= 2) result.slope = fit_loglog_slope(ns, times);
  return result;
}

void write_cost_csv(std::ostream& out, std::span<const CostReport> reports) {
  out << kCostCsvHeader << '\n';
  for (const auto& r : reports) {
    const auto& c = r.config;
    const bool sa = c.mechanism == Mechanism::SelfAttention;
    const bool ea = c.mechanism == Mechanism::External || c.mechanism == Mechanism::MultiHeadExternal;
    out << to_string(c.mechanism) << ',' << c.n << ',' << c.d << ',' << (sa ? c.d_prime : 0)
        << ',' << (ea ? c.s : 0) << ',' << (c.mechanism == Mechanism::MultiHeadExternal ? c.heads : 1)
        << ',' << r.params << ',' << r.macs << ',';
    if (r.wall_time) {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof(buf), *r.wall_time, std::chars_format::general, 9);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace extattn
