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
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "extattn/harness.hpp"
#include "temp_dir.hpp"

namespace extattn {
namespace {

TEST(ToyTask, CopyTargetIsInput) {
  const ToyTask task = make_task(TaskKind::Copy, 1);
  for (const auto& s : task.train_set()) {
    EXPECT_EQ(s.input, s.target);
    EXPECT_EQ(s.input.shape(), (Shape{task.n, task.d_in}));
  }
}

TEST(ToyTask, DenoiseWithoutNoiseIsCopy) {
  TaskOptions o = default_task_options(TaskKind::Denoise);
  o.noise_sigma = 0.0;
  const ToyTask denoise = make_task(TaskKind::Denoise, 4, o);
  const ToyTask copy = make_task(TaskKind::Copy, 4, o);
  for (std::uint64_t i = 0; i < 5; ++i) {
    EXPECT_EQ(denoise.sample(i).input, denoise.sample(i).target);
    EXPECT_EQ(denoise.sample(i).input, copy.sample(i).input);
  }
  const ToyTask noisy = make_task(TaskKind::Denoise, 4);
  EXPECT_NE(noisy.sample(0).input, noisy.sample(0).target);
}

TEST(ToyTask, ClassifyIsReproducibleAndPrototypesOrthonormal) {
  const ToyTask a = make_task(TaskKind::Classify, 7);
  const ToyTask b = make_task(TaskKind::Classify, 7);
  EXPECT_EQ(a.prototypes, b.prototypes);
  std::vector<std::size_t> counts(a.num_classes, 0);
  for (std::uint64_t i = 0; i < 64; ++i) {
    EXPECT_EQ(a.sample(i).label, b.sample(i).label);
    EXPECT_EQ(a.sample(i).input, b.sample(i).input);
    ++counts[a.sample(i).label];
  }
  for (std::size_t c : counts) EXPECT_GT(c, 0u);
  for (std::size_t i = 0; i < a.num_classes; ++i)
    for (std::size_t j = 0; j < a.num_classes; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < a.d_in; ++k) dot += a.prototypes.at(i, k) * a.prototypes.at(j, k);
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(ToyTask, LabelFollowsMeanTokenRule) {
  const ToyTask task = make_task(TaskKind::Classify, 3);
  for (std::uint64_t i = 0; i < 32; ++i) {
    const Sample s = task.sample(i);
    std::vector<double> scores(task.num_classes, 0.0);
    for (std::size_t c = 0; c < task.num_classes; ++c)
      for (std::size_t p = 0; p < task.n; ++p)
        for (std::size_t k = 0; k < task.d_in; ++k)
          scores[c] += s.input.at(p, k) * task.prototypes.at(c, k);
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
    EXPECT_EQ(static_cast<std::size_t>(best), s.label);
  }
}

TEST(ToyTask, TrainAndEvalStreamsDiffer) {
  const ToyTask task = make_task(TaskKind::Copy, 2);
  EXPECT_NE(task.sample(0).input, task.eval_sample(0).input);
  EXPECT_EQ(task.sample(3).input, task.train_set()[3].input);
  EXPECT_EQ(task.eval_sample(5).input, task.eval_set()[5].input);
}

TEST(ToyTask, InvalidOptionsRejected) {
  TaskOptions o;
  o.n = 0;
  EXPECT_THROW(make_task(TaskKind::Copy, 1, o), ConfigError);
  o = default_task_options(TaskKind::Classify);
  o.num_classes = o.d_in + 1;
  EXPECT_THROW(make_task(TaskKind::Classify, 1, o), ConfigError);
  EXPECT_THROW(make_task("regress", 1), ConfigError);
}

TrainOptions quick(std::size_t steps, double lr, std::uint64_t seed) {
  TrainOptions o = default_train_options(TaskKind::Copy);
  o.steps = steps;
  o.lr = lr;
  o.seed = seed;
  return o;
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  const auto r = train(make_task(TaskKind::Copy, 1), quick(10, 0.0, 1));
  ASSERT_EQ(r.log.losses.size(), 10u);
  for (double l : r.log.losses) EXPECT_EQ(l, r.log.losses.front());
  EXPECT_FALSE(training_succeeded(r.log));
}

TEST(Train, SameSeedSameCurve) {
  const ToyTask task = make_task(TaskKind::Copy, 5);
  const auto a = train(task, quick(20, 0.05, 5));
  const auto b = train(task, quick(20, 0.05, 5));
  EXPECT_EQ(a.log.losses, b.log.losses);
  EXPECT_EQ(a.model.layers(), b.model.layers());
  const auto c = train(task, quick(20, 0.05, 6));
  EXPECT_NE(a.log.losses, c.log.losses);
}

TEST(Train, DoubleNormLossStaysFiniteUpToUnitLearningRate) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = train(make_task(TaskKind::Copy, seed), quick(60, 1.0, seed));
    for (double l : r.log.losses) EXPECT_TRUE(std::isfinite(l)) << "seed " << seed;
  }
}

TEST(Train, CopyLearnsWithDefaults) {
  const auto r = train(make_task(TaskKind::Copy, 3), quick(500, 0.05, 3));
  EXPECT_LT(r.log.final_loss, 0.1 * r.log.initial_loss);
  EXPECT_TRUE(training_succeeded(r.log));
}

TEST(Train, MultiHeadBlockTrains) {
  TrainOptions o = quick(100, 0.05, 2);
  o.mechanism = Mechanism::MultiHeadExternal;
  const auto r = train(make_task(TaskKind::Copy, 2), o);
  EXPECT_LT(r.log.final_loss, r.log.initial_loss);
  EXPECT_EQ(r.log.config.heads, 2u);
}

TEST(Train, RejectsBadOptions) {
  const ToyTask task = make_task(TaskKind::Copy, 1);
  EXPECT_THROW(train(task, quick(0, 0.05, 1)), ConfigError);
  EXPECT_THROW(train(task, quick(5, -1.0, 1)), ConfigError);
  TrainOptions sa = quick(5, 0.05, 1);
  sa.mechanism = Mechanism::SelfAttention;
  EXPECT_THROW(train(task, sa), ConfigError);
}

TEST(Train, DivergenceReportsStep) {
  try {
    (void)train(make_task(TaskKind::Copy, 1), quick(200, 1e6, 1));
    SUCCEED() << "clipping kept the run finite";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(TrainLogFiles, CsvAndJson) {
  test::TempDir dir;
  const auto r = train(make_task(TaskKind::Copy, 1), quick(3, 0.05, 9));
  write_loss_csv(r.log, dir / "loss.csv");
  write_summary_json(r.log, dir / "summary.json");

  std::ifstream csv(dir / "loss.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "step,loss");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);

  std::ifstream js(dir / "summary.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_EQ(j.at("final_loss").get<double>(), r.log.final_loss);
  EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 9u);
  EXPECT_EQ(j.at("config").at("mechanism"), "ea");
  EXPECT_TRUE(j.contains("eval_metric"));
}

}  // namespace
}  // namespace extattn
