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

#include <fstream>
#include <iterator>
#include <string>

#include "extattn/attention_export.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace extattn {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AttentionModel model_for(Mechanism m, std::size_t n, std::size_t s, std::size_t heads) {
  AttentionConfig c;
  c.mechanism = m;
  c.n = n;
  c.d_in = 4;
  c.d = 4;
  c.d_prime = 4;
  c.s = s;
  c.heads = heads;
  return make_model(c, 31);
}

TEST(Layout, SquareExplicitAndInvalid) {
  const auto sq = infer_layout(16, std::nullopt, std::nullopt);
  EXPECT_EQ(sq.rows, 4u);
  EXPECT_EQ(sq.cols, 4u);
  const auto ex = infer_layout(12, 3, 4);
  EXPECT_EQ(ex.rows, 3u);
  EXPECT_EQ(ex.cols, 4u);
  EXPECT_THROW(infer_layout(12, std::nullopt, std::nullopt), ConfigError);
  EXPECT_THROW(infer_layout(12, 3, std::nullopt), ConfigError);
  EXPECT_THROW(infer_layout(12, 5, 2), ConfigError);
}

TEST(Grayscale, MinMaxScaling) {
  const double v[] = {2.0, 2.5, 3.0};
  EXPECT_EQ(to_grayscale(v), (std::vector<std::uint8_t>{0, 128, 255}));
  const double flat[] = {0.3, 0.3};
  EXPECT_EQ(to_grayscale(flat), (std::vector<std::uint8_t>{0, 0}));
}

TEST(Pgm, BinaryLayout) {
  test::TempDir dir;
  const std::uint8_t px[] = {0, 10, 20, 30, 40, 255};
  write_pgm(dir / "a.pgm", {2, 3}, px);
  EXPECT_EQ(read_file(dir / "a.pgm"), std::string("P5\n3 2\n255\n") +
                                          std::string(reinterpret_cast<const char*>(px), 6));
  EXPECT_THROW(write_pgm(dir / "b.pgm", {2, 2}, px), DimensionError);
}

TEST(Dump, SingleMemoryGivesOneBlankMap) {
  test::TempDir dir;
  const auto model = model_for(Mechanism::External, 9, 1, 1);
  const auto dump =
      dump_attention_maps(model, oracle::random_tensor({9, 4}, 1), {3, 3}, dir.path());
  ASSERT_EQ(dump.images.size(), 1u);
  EXPECT_EQ(read_file(dump.images[0]), "P5\n3 3\n255\n" + std::string(9, '\0'));
}

TEST(Dump, MultiHeadFileCountAndCsv) {
  test::TempDir dir;
  const auto model = model_for(Mechanism::MultiHeadExternal, 6, 3, 2);
  const auto dump =
      dump_attention_maps(model, oracle::random_tensor({6, 4}, 2), {2, 3}, dir.path());
  EXPECT_EQ(dump.images.size(), 6u);
  EXPECT_TRUE(std::filesystem::exists(dir / "attn_h1_s2.pgm"));
  std::ifstream csv(dump.csv);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "h,s,pixel,value");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2 * 3 * 6);
}

TEST(Dump, ExternalMapMatchesAttentionColumn) {
  test::TempDir dir;
  const auto model = model_for(Mechanism::External, 4, 2, 1);
  const Tensor x = oracle::random_tensor({4, 4}, 3);
  dump_attention_maps(model, x, {2, 2}, dir.path());
  const Tensor attn = forward(model, x, false).attn;
  std::vector<double> col(4);
  for (std::size_t i = 0; i < 4; ++i) col[i] = attn.at(i, 1);
  const auto px = to_grayscale(col);
  EXPECT_EQ(read_file(dir / "attn_h0_s1.pgm"),
            "P5\n2 2\n255\n" + std::string(px.begin(), px.end()));
}

TEST(Dump, SelfAttentionWritesOneMapPerQuery) {
  test::TempDir dir;
  const auto model = model_for(Mechanism::SelfAttention, 4, 1, 1);
  const auto dump =
      dump_attention_maps(model, oracle::random_tensor({4, 4}, 4), {2, 2}, dir.path());
  EXPECT_EQ(dump.images.size(), 4u);
}

TEST(Dump, RepeatedRunsAreByteIdentical) {
  test::TempDir a, b;
  const auto model = model_for(Mechanism::MultiHeadExternal, 9, 3, 2);
  const Tensor x = oracle::random_tensor({9, 4}, 5);
  const auto da = dump_attention_maps(model, x, {3, 3}, a.path());
  const auto db = dump_attention_maps(model, x, {3, 3}, b.path());
  ASSERT_EQ(da.images.size(), db.images.size());
  for (std::size_t i = 0; i < da.images.size(); ++i)
    EXPECT_EQ(read_file(da.images[i]), read_file(db.images[i]));
  EXPECT_EQ(read_file(da.csv), read_file(db.csv));
}

TEST(Dump, LayoutMustCoverInput) {
  test::TempDir dir;
  const auto model = model_for(Mechanism::External, 6, 2, 1);
  EXPECT_THROW(dump_attention_maps(model, oracle::random_tensor({6, 4}, 1), {2, 2}, dir.path()),
               ConfigError);
}

}  // namespace
}  // namespace extattn
