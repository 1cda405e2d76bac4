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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "extattn/analysis.hpp"
#include "extattn/attention.hpp"
#include "extattn/random.hpp"

namespace extattn {
namespace {

AttentionConfig table_config(Mechanism m) {
  AttentionConfig c;
  c.mechanism = m;
  c.n = 16384;
  c.d_in = 512;
  c.d = 512;
  c.d_prime = 512;
  c.s = 256;
  return c;
}

TEST(CountParams, ReferenceConfigs) {
  EXPECT_EQ(count_params(table_config(Mechanism::SelfAttention)), 1048576u);
  EXPECT_EQ(count_params(table_config(Mechanism::External)), 524288u);
  AttentionConfig tiny;
  EXPECT_EQ(count_params(tiny), 3u);
  EXPECT_EQ(count_macs(tiny), 3u);
}

TEST(CountMacs, ReferenceConfigs) {
  EXPECT_EQ(count_macs(table_config(Mechanism::SelfAttention)), 292057776128u);
  EXPECT_EQ(count_macs(table_config(Mechanism::External)), 8589934592u);
  const double ratio =
      static_cast<double>(count_macs(table_config(Mechanism::SelfAttention))) /
      static_cast<double>(count_macs(table_config(Mechanism::External)));
  EXPECT_GE(ratio, 30.0);
}

TEST(CountMacs, ExternalIsLinearInNAndS) {
  auto c = table_config(Mechanism::External);
  const auto base = count_macs(c);
  c.n *= 2;
  EXPECT_EQ(count_macs(c), 2 * base);
  c = table_config(Mechanism::External);
  const std::uint64_t projection = c.n * c.d_in * c.d;
  c.s *= 2;
  EXPECT_EQ(count_macs(c) - projection, 2 * (base - projection));
}

TEST(CountMacs, SelfAttentionAffinityTermIsQuadratic) {
  auto at = [](std::size_t n) {
    auto c = table_config(Mechanism::SelfAttention);
    c.n = n;
    const std::uint64_t projections = 2 * n * c.d * c.d_prime + 2 * n * c.d * c.d;
    return count_macs(c) - projections;
  };
  EXPECT_EQ(at(2048), 4 * at(1024));
  EXPECT_EQ(at(3000), 9 * at(1000));
}

TEST(CountParams, MatchesEnumerationOfModelTensors) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    AttentionConfig c;
    c.mechanism = static_cast<Mechanism>(rng.below(4));
    c.heads = c.mechanism == Mechanism::MultiHeadExternal ? 1 + rng.below(4) : 1;
    c.d = c.heads * (1 + rng.below(6));
    c.d_in = c.mechanism == Mechanism::External || c.mechanism == Mechanism::MultiHeadExternal
                 ? 1 + rng.below(8)
                 : c.d;
    c.d_prime = 1 + rng.below(8);
    c.s = 1 + rng.below(8);
    c.n = 1 + rng.below(8);
    c.query_bias = c.mechanism != Mechanism::SimplifiedSelfAttention && rng.below(2) == 1;
    std::uint64_t total = 0;
    for (const auto& l : make_model(c, trial).layers) {
      total += l.weight.numel();
      if (l.bias) total += l.bias->numel();
    }
    EXPECT_EQ(count_params(c), total) << describe(c);
  }
}

TEST(CountMacs, OverflowIsRejected) {
  auto c = table_config(Mechanism::SelfAttention);
  c.n = std::size_t{1} << 40;
  EXPECT_THROW(count_macs(c), ConfigError);
}

TEST(CostCsv, HeaderAndRows) {
  CostReport a = cost_report(table_config(Mechanism::External));
  CostReport b = cost_report(table_config(Mechanism::SelfAttention));
  b.wall_time = 0.25;
  std::ostringstream out;
  const CostReport rows[] = {a, b};
  write_cost_csv(out, rows);
  EXPECT_EQ(out.str(),
            "mechanism,N,d,d_prime,S,H,params,macs,median_seconds\n"
            "ea,16384,512,0,256,1,524288,8589934592,\n"
            "sa,16384,512,512,0,1,1048576,292057776128,0.25\n");
}

TEST(FitSlope, ExactPowerLaws) {
  const double x[] = {1, 2, 4, 8};
  const double y1[] = {3, 6, 12, 24};
  const double y2[] = {1, 4, 16, 64};
  EXPECT_NEAR(fit_loglog_slope(x, y1), 1.0, 1e-12);
  EXPECT_NEAR(fit_loglog_slope(x, y2), 2.0, 1e-12);
  const double bad[] = {1, 0, 1, 1};
  EXPECT_THROW(fit_loglog_slope(x, bad), Error);
}

TEST(Bench, RejectsFewRepeatsAndEmptyList) {
  BenchOptions o;
  o.n_list = {64};
  o.repeats = 4;
  EXPECT_THROW(bench_scaling(o), ConfigError);
  o.repeats = 5;
  o.n_list.clear();
  EXPECT_THROW(bench_scaling(o), ConfigError);
}

TEST(Bench, SmallRunMeasuresEveryRow) {
  for (Precision p : {Precision::F64, Precision::F32}) {
    BenchOptions o;
    o.d = 8;
    o.s = 8;
    o.n_list = {64, 128, 256};
    o.precision = p;
    const auto r = bench_scaling(o);
    ASSERT_EQ(r.rows.size(), 3u);
    for (const auto& row : r.rows) {
      EXPECT_FALSE(row.skipped);
      ASSERT_TRUE(row.cost.wall_time.has_value());
      EXPECT_GT(*row.cost.wall_time, 0.0);
    }
    EXPECT_TRUE(r.slope.has_value());
  }
}

TEST(Bench, RowsAboveMemoryLimitAreSkipped) {
  BenchOptions o;
  o.mechanism = Mechanism::SelfAttention;
  o.d = 8;
  o.d_prime = 8;
  o.n_list = {16, 1 << 20};
  o.memory_limit_bytes = 1 << 20;
  const auto r = bench_scaling(o);
  EXPECT_FALSE(r.rows[0].skipped);
  EXPECT_TRUE(r.rows[1].skipped);
  EXPECT_FALSE(r.rows[1].cost.wall_time.has_value());
  EXPECT_FALSE(r.rows[1].skip_reason.empty());
  EXPECT_FALSE(r.slope.has_value());
}

TEST(Bench, ExternalTimeGrowsWithMemorySize) {
  auto time_at = [](std::size_t s) {
    BenchOptions o;
    o.d = 64;
    o.s = s;
    o.n_list = {2048};
    o.repeats = 7;
    return *bench_scaling(o).rows[0].cost.wall_time;
  };
  EXPECT_LT(time_at(8), time_at(256));
}

}  // namespace
}  // namespace extattn
