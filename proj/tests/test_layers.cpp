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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include "extattn/layers.hpp"
#include "extattn/random.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace extattn {
namespace {

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(Rng, KnownMt19937Output) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the C++
  // standard; seed 5489 is that default.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(2);
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 3000; ++i) ++hits[rng.below(3)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(InitLayer, SameSeedSameWeights) {
  EXPECT_EQ(init_layer(5, 7, 42, true).weight, init_layer(5, 7, 42, true).weight);
  EXPECT_NE(init_layer(5, 7, 42, true).weight, init_layer(5, 7, 43, true).weight);
}

TEST(InitLayer, BoundedByFanIn) {
  const LinearLayer l = init_layer(64, 4, 3, true);
  for (double v : l.weight.data()) {
    EXPECT_GE(v, -0.5);
    EXPECT_LE(v, 0.5);
  }
  ASSERT_TRUE(l.bias.has_value());
  EXPECT_EQ(*l.bias, Tensor::zeros({64}));
  EXPECT_FALSE(init_layer(2, 2, 3, false).bias.has_value());
}

TEST(InitLayer, MeanOfMillionWeights) {
  const LinearLayer l = init_layer(1000, 1000, 11, false);
  double mean = 0.0;
  for (double v : l.weight.data()) mean += v;
  mean /= 1e6;
  // range 2 * sqrt(1/1000); standard error of the mean is range / sqrt(12 n).
  const double range = 2.0 * std::sqrt(1.0 / 1000.0);
  EXPECT_LE(std::abs(mean), 3.0 * range / std::sqrt(12.0 * 1e6));
}

TEST(ApplyLinear, IdentityWeight) {
  const Tensor x = oracle::random_tensor({4, 3}, 1);
  EXPECT_EQ(apply_linear(make_layer("id", Tensor::identity(3)), x), x);
}

TEST(ApplyLinear, ZeroWeightGivesBias) {
  const Tensor b = Tensor({3}, {1.0, -2.0, 0.5});
  const LinearLayer l = make_layer("z", Tensor::zeros({3, 2}), b);
  const Tensor y = apply_linear(l, oracle::random_tensor({4, 2}, 2));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.at(i, j), b[j]);
}

TEST(ApplyLinear, MatchesMatmulPlusBias) {
  const LinearLayer l = oracle::random_layer(3, 2, 5, true, "l");
  const Tensor x = oracle::random_tensor({4, 2}, 6);
  const auto ref = oracle::linear(oracle::to_matrix(x), l);
  EXPECT_LE(oracle::max_abs_diff(ref, apply_linear(l, x)), 1e-12);
}

TEST(ApplyLinear, LeadingAxesAreFlattened) {
  const LinearLayer l = oracle::random_layer(3, 2, 5, true, "l");
  const Tensor x = oracle::random_tensor({2, 4, 2}, 6);
  const Tensor y = apply_linear(l, x);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 3}));
  EXPECT_EQ(slice_leading(y, 1), apply_linear(l, slice_leading(x, 1)));
}

TEST(ApplyLinear, RejectsWrongInnerExtent) {
  EXPECT_THROW(apply_linear(init_layer(3, 2, 1, false), Tensor({4, 3})), DimensionError);
}

TEST(LinearLayer, ValidateRejectsBadBias) {
  LinearLayer l = init_layer(3, 2, 1, false);
  l.bias = Tensor({2});
  EXPECT_THROW(l.validate(), DimensionError);
}

TEST(Serialization, RoundTripIsBitExact) {
  test::TempDir dir;
  std::vector<LinearLayer> layers = {oracle::random_layer(3, 4, 1, true, "wq"),
                                     init_layer(5, 3, 2, false, "mk"),
                                     init_layer(5, 3, 3, false, "mv")};
  layers[1].weight[0] = -0.0;
  layers[1].weight[1] = std::numeric_limits<double>::denorm_min();
  save_weights(layers, dir / "w.bin");
  EXPECT_EQ(load_weights(dir / "w.bin"), layers);
  const auto back = load_weights(dir / "w.bin");
  EXPECT_TRUE(std::signbit(back[1].weight[0]));
}

TEST(Serialization, EmptyListIsValid) {
  test::TempDir dir;
  save_weights(std::vector<LinearLayer>{}, dir / "empty.bin");
  EXPECT_EQ(read_bytes(dir / "empty.bin").size(), 12u);
  EXPECT_TRUE(load_weights(dir / "empty.bin").empty());
}

TEST(Serialization, HeaderLayout) {
  test::TempDir dir;
  save_tensors(std::vector<NamedTensor>{{"ab", Tensor({1}, {1.0})}}, dir / "t.bin");
  const auto b = read_bytes(dir / "t.bin");
  const std::vector<unsigned char> expected = {
      'E', 'A', 'N', 'W', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
      2,   0,   0,   0,   'a', 'b',              // name
      1,   0,   0,   0,                          // rank
      1,   0,   0,   0,   0, 0, 0, 0,            // extent
      0,   0,   0,   0,   0, 0, 0xF0, 0x3F};     // 1.0
  ASSERT_EQ(b.size(), expected.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    EXPECT_EQ(static_cast<unsigned char>(b[i]), expected[i]) << "byte " << i;
}

TEST(Serialization, TruncationAtEveryLengthIsRejected) {
  test::TempDir dir;
  save_weights(std::vector<LinearLayer>{oracle::random_layer(2, 3, 1, true, "wq")},
               dir / "w.bin");
  const auto bytes = read_bytes(dir / "w.bin");
  for (std::size_t len = 4; len < bytes.size(); ++len) {
    write_bytes(dir / "cut.bin", std::vector<char>(bytes.begin(), bytes.begin() + len));
    EXPECT_THROW(load_weights(dir / "cut.bin"), TruncatedFileError) << "length " << len;
  }
}

TEST(Serialization, BadMagicVersionAndTrailingBytes) {
  test::TempDir dir;
  save_weights(std::vector<LinearLayer>{init_layer(2, 2, 1, false, "wq")}, dir / "w.bin");
  auto bytes = read_bytes(dir / "w.bin");

  auto bad = bytes;
  bad[0] = 'X';
  write_bytes(dir / "magic.bin", bad);
  EXPECT_THROW(load_weights(dir / "magic.bin"), BadMagicError);

  bad = bytes;
  bad[4] = 2;
  write_bytes(dir / "version.bin", bad);
  EXPECT_THROW(load_weights(dir / "version.bin"), VersionMismatchError);

  bad = bytes;
  bad.push_back(0);
  write_bytes(dir / "trailing.bin", bad);
  EXPECT_THROW(load_weights(dir / "trailing.bin"), IoError);

  write_bytes(dir / "short.bin", {'E', 'A'});
  EXPECT_THROW(load_weights(dir / "short.bin"), IoError);
  EXPECT_THROW(load_weights(dir / "missing.bin"), IoError);
}

TEST(Serialization, HugeExtentDoesNotAllocate) {
  test::TempDir dir;
  // Header claims a 2^40-element tensor but the file ends right after it.
  std::vector<char> b = {'E', 'A', 'N', 'W', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'x',
                         1,   0,   0,   0,   0, 0, 0, 0, 0, 1, 0, 0};
  write_bytes(dir / "huge.bin", b);
  EXPECT_THROW(load_tensors(dir / "huge.bin"), TruncatedFileError);
}

}  // namespace
}  // namespace extattn
