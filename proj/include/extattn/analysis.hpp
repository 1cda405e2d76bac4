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

// Closed-form parameter and multiply-accumulate counts, and a wall-clock
// scaling benchmark.
//
// Parameters (biases only where query_bias is set):
//   SA   2 d d' + 2 d^2            (+ d')
//   SSA  0
//   EA   d_in d + 2 S d            (+ d)
//   MEA  2 d_in d + 2 S d/H        (+ d)
//
// MACs per sample:
//   SA   2 N d d' + N d^2 + N^2 d' + N^2 d + N d^2
//   SSA  2 N^2 d
//   EA   N d_in d + N d S + N S d
//   MEA  N d_in d + H (N (d/H) S + N S (d/H)) + N d d_in
//
// Normalization (exponentials, divisions) and bias additions are not
// counted: they are O(N S) or O(N d) element-wise work.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "extattn/config.hpp"

namespace extattn {

struct CostReport {
  AttentionConfig config;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::optional<double> wall_time;  // median seconds per forward, if measured
};

/// Throws ConfigError on an invalid config or on 64-bit overflow.
std::uint64_t count_params(const AttentionConfig& config);
std::uint64_t count_macs(const AttentionConfig& config);
CostReport cost_report(const AttentionConfig& config);

enum class Precision { F64, F32 };

struct BenchOptions {
  Mechanism mechanism = Mechanism::External;
  std::size_t d = 64;
  std::size_t d_prime = 64;
  std::size_t s = 64;
  std::size_t heads = 1;
  std::vector<std::size_t> n_list;
  unsigned repeats = 5;  // >= 5
  unsigned warmup = 1;
  Precision precision = Precision::F64;
  std::uint64_t seed = 0;
  /// Rows whose estimated working set exceeds this are skipped, not run.
  std::size_t memory_limit_bytes = std::size_t{4} << 30;
};

struct BenchRow {
  CostReport cost;
  bool skipped = false;
  std::string skip_reason;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  /// Least-squares slope of log(seconds) against log(N) over measured rows;
  /// empty with fewer than two measured rows.
  std::optional<double> slope;
};

/// Median forward wall time at each N (d_in = d). Throws ConfigError when
/// repeats < 5 or n_list is empty.
BenchResult bench_scaling(const BenchOptions& options);

/// Least-squares slope of log(y) on log(x). All values must be positive.
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

inline constexpr const char* kCostCsvHeader =
    "mechanism,N,d,d_prime,S,H,params,macs,median_seconds";

/// One line per report, LF endings, '.' decimal separator; median_seconds
/// is left empty when not measured.
void write_cost_csv(std::ostream& out, std::span<const CostReport> reports);

}  // namespace extattn
