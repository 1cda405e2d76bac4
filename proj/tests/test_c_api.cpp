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
#include <string>

#include "extattn/extattn.h"
#include "temp_dir.hpp"

namespace {

extattn_config ea_config(uint64_t n, uint64_t d, uint64_t s) {
  extattn_config c;
  extattn_config_init(&c);
  c.n = n;
  c.d_in = d;
  c.d = d;
  c.d_prime = d;
  c.s = s;
  return c;
}

TEST(CApi, StatusStringsAndVersion) {
  EXPECT_STREQ(extattn_status_string(EXTATTN_OK), "ok");
  EXPECT_NE(std::string(extattn_version()), "");
  for (int s = 0; s <= EXTATTN_ERR_INTERNAL; ++s)
    EXPECT_NE(extattn_status_string(static_cast<extattn_status>(s)), nullptr);
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(extattn_config_validate(nullptr), EXTATTN_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(extattn_last_error()), "");
  uint64_t p = 0;
  EXPECT_EQ(extattn_count(nullptr, &p, &p), EXTATTN_ERR_INVALID_ARGUMENT);
  extattn_model_destroy(nullptr);
  extattn_tensor_destroy(nullptr);
}

TEST(CApi, ConfigErrors) {
  extattn_config c = ea_config(4, 7, 2);
  c.mechanism = EXTATTN_MECH_MEA;
  c.heads = 2;
  EXPECT_EQ(extattn_config_validate(&c), EXTATTN_ERR_CONFIG);
  c.mechanism = 42;
  EXPECT_EQ(extattn_config_validate(&c), EXTATTN_ERR_INVALID_ARGUMENT);
  int m = 0;
  EXPECT_EQ(extattn_parse_mechanism("ea", &m), EXTATTN_OK);
  EXPECT_EQ(m, EXTATTN_MECH_EA);
  EXPECT_EQ(extattn_parse_mechanism("nope", &m), EXTATTN_ERR_CONFIG);
}

TEST(CApi, CountMatchesReference) {
  extattn_config c = ea_config(16384, 512, 256);
  c.mechanism = EXTATTN_MECH_SA;
  uint64_t params = 0, macs = 0;
  ASSERT_EQ(extattn_count(&c, &params, &macs), EXTATTN_OK);
  EXPECT_EQ(params, 1048576u);
  EXPECT_EQ(macs, 292057776128u);
}

TEST(CApi, ForwardSaveLoadRoundTrip) {
  extattn::test::TempDir dir;
  const extattn_config c = ea_config(4, 3, 2);
  extattn_model* model = nullptr;
  ASSERT_EQ(extattn_model_create(&c, 5, &model), EXTATTN_OK);
  const uint64_t shape[2] = {4, 3};
  extattn_tensor* x = nullptr;
  ASSERT_EQ(extattn_tensor_random(shape, 2, 7, &x), EXTATTN_OK);

  extattn_tensor *out = nullptr, *attn = nullptr;
  ASSERT_EQ(extattn_model_forward(model, x, &out, &attn), EXTATTN_OK);
  EXPECT_EQ(extattn_tensor_extent(attn, 1), 2u);

  const std::string path = (dir / "m.bin").string();
  ASSERT_EQ(extattn_model_save(model, path.c_str()), EXTATTN_OK);
  extattn_model* loaded = nullptr;
  ASSERT_EQ(extattn_model_load(path.c_str(), 4, EXTATTN_NORM_DOUBLE, &loaded), EXTATTN_OK);
  extattn_config back;
  ASSERT_EQ(extattn_model_config(loaded, &back), EXTATTN_OK);
  EXPECT_EQ(back.mechanism, EXTATTN_MECH_EA);
  EXPECT_EQ(back.s, 2u);

  extattn_tensor* out2 = nullptr;
  ASSERT_EQ(extattn_model_forward(loaded, x, &out2, nullptr), EXTATTN_OK);
  ASSERT_EQ(extattn_tensor_numel(out), extattn_tensor_numel(out2));
  for (size_t i = 0; i < extattn_tensor_numel(out); ++i)
    EXPECT_EQ(extattn_tensor_data(out)[i], extattn_tensor_data(out2)[i]);

  const std::string tpath = (dir / "x.bin").string();
  ASSERT_EQ(extattn_tensor_save(x, "input", tpath.c_str()), EXTATTN_OK);
  extattn_tensor* x2 = nullptr;
  ASSERT_EQ(extattn_tensor_load(tpath.c_str(), &x2), EXTATTN_OK);
  EXPECT_EQ(extattn_tensor_rank(x2), 2u);
  EXPECT_EQ(extattn_tensor_load(path.c_str(), &x2), EXTATTN_ERR_IO);

  for (auto* t : {x, x2, out, out2, attn}) extattn_tensor_destroy(t);
  extattn_model_destroy(model);
  extattn_model_destroy(loaded);
}

TEST(CApi, LoadErrorsHaveDistinctCodes) {
  extattn::test::TempDir dir;
  extattn_model* model = nullptr;
  EXPECT_EQ(extattn_model_load((dir / "missing.bin").c_str(), 4, 1, &model), EXTATTN_ERR_IO);
  {
    std::FILE* f = std::fopen((dir / "junk.bin").c_str(), "wb");
    std::fputs("JUNKJUNKJUNK", f);
    std::fclose(f);
  }
  EXPECT_EQ(extattn_model_load((dir / "junk.bin").c_str(), 4, 1, &model),
            EXTATTN_ERR_BAD_MAGIC);
  {
    std::FILE* f = std::fopen((dir / "cut.bin").c_str(), "wb");
    std::fwrite("EANW\1\0\0\0\1\0\0\0\5\0", 1, 14, f);
    std::fclose(f);
  }
  EXPECT_EQ(extattn_model_load((dir / "cut.bin").c_str(), 4, 1, &model),
            EXTATTN_ERR_TRUNCATED);
  {
    std::FILE* f = std::fopen((dir / "ver.bin").c_str(), "wb");
    std::fwrite("EANW\7\0\0\0\0\0\0\0", 1, 12, f);
    std::fclose(f);
  }
  EXPECT_EQ(extattn_model_load((dir / "ver.bin").c_str(), 4, 1, &model), EXTATTN_ERR_VERSION);
}

TEST(CApi, GradcheckReport) {
  const extattn_config c = ea_config(8, 8, 4);
  extattn_gradcheck* report = nullptr;
  ASSERT_EQ(extattn_gradcheck_run(&c, 1, 1e-5, &report), EXTATTN_OK);
  EXPECT_EQ(extattn_gradcheck_count(report), 4u);
  EXPECT_STREQ(extattn_gradcheck_name(report, 3), "input");
  EXPECT_LT(extattn_gradcheck_max_error(report), 1e-4);
  EXPECT_EQ(extattn_gradcheck_name(report, 99), nullptr);
  extattn_gradcheck_destroy(report);
}

TEST(CApi, BenchRowsAndCsv) {
  extattn::test::TempDir dir;
  extattn_bench_options o;
  extattn_bench_options_init(&o);
  const uint64_t ns[] = {32, 64};
  o.d = 4;
  o.s = 4;
  o.n_list = ns;
  o.n_count = 2;
  extattn_bench* bench = nullptr;
  ASSERT_EQ(extattn_bench_run(&o, &bench), EXTATTN_OK);
  ASSERT_EQ(extattn_bench_row_count(bench), 2u);
  extattn_bench_row row;
  ASSERT_EQ(extattn_bench_row_get(bench, 1, &row), EXTATTN_OK);
  EXPECT_EQ(row.n, 64u);
  EXPECT_FALSE(row.skipped);
  EXPECT_GT(row.median_seconds, 0.0);
  EXPECT_EQ(extattn_bench_row_get(bench, 2, &row), EXTATTN_ERR_INVALID_ARGUMENT);
  double slope = 0;
  EXPECT_EQ(extattn_bench_slope(bench, &slope), EXTATTN_OK);
  EXPECT_EQ(extattn_bench_write_csv(bench, (dir / "b.csv").c_str()), EXTATTN_OK);
  extattn_bench_destroy(bench);
  o.repeats = 2;
  EXPECT_EQ(extattn_bench_run(&o, &bench), EXTATTN_ERR_CONFIG);
}

TEST(CApi, TrainingDefaultsDependOnTask) {
  extattn_train_options copy, classify;
  extattn_train_options_init(&copy, EXTATTN_TASK_COPY);
  extattn_train_options_init(&classify, EXTATTN_TASK_CLASSIFY);
  EXPECT_EQ(copy.norm, EXTATTN_NORM_DOUBLE);
  EXPECT_EQ(classify.norm, EXTATTN_NORM_SOFTMAX);
  EXPECT_GT(classify.d_in, copy.d_in);

  copy.steps = 5;
  extattn_train_log* log = nullptr;
  extattn_model* model = nullptr;
  ASSERT_EQ(extattn_train_run(&copy, &log, &model), EXTATTN_OK);
  EXPECT_EQ(extattn_train_log_steps(log), 5u);
  EXPECT_EQ(extattn_train_log_loss(log, 0), extattn_train_log_initial_loss(log));
  EXPECT_TRUE(std::isnan(extattn_train_log_loss(log, 5)));
  EXPECT_STREQ(extattn_train_log_eval_metric_name(log), "mse");
  extattn_config cfg;
  ASSERT_EQ(extattn_model_config(model, &cfg), EXTATTN_OK);
  EXPECT_EQ(cfg.n, copy.n);
  extattn_train_log_destroy(log);
  extattn_model_destroy(model);

  copy.steps = 0;
  EXPECT_EQ(extattn_train_run(&copy, &log, nullptr), EXTATTN_ERR_CONFIG);
}

}  // namespace
