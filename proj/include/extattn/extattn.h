/*
 * Copyright 2026 The extattn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * extattn C API.
 *
 * All objects are opaque handles created by an extattn_*_create/_load/_run
 * function and released with the matching _destroy function (which accepts
 * NULL). Every fallible call returns an extattn_status; on failure a message
 * describing the error is available from extattn_last_error() until the next
 * failing call on the same thread.
 *
 * Handles are immutable after creation and may be shared between threads.
 */
#ifndef EXTATTN_EXTATTN_H
#define EXTATTN_EXTATTN_H

#include <stddef.h>
#include <stdint.h>

#if defined(EXTATTN_BUILDING_LIBRARY)
#define EXTATTN_API __attribute__((visibility("default")))
#else
#define EXTATTN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum extattn_status {
  EXTATTN_OK = 0,
  EXTATTN_ERR_INVALID_ARGUMENT = 1, /* NULL pointer, bad enum value, ... */
  EXTATTN_ERR_DIMENSION = 2,        /* incompatible shapes */
  EXTATTN_ERR_CONFIG = 3,           /* configuration violates an invariant */
  EXTATTN_ERR_NUMERIC = 4,          /* NaN or overflow */
  EXTATTN_ERR_IO = 5,               /* cannot open/read/write a file */
  EXTATTN_ERR_BAD_MAGIC = 6,        /* not a weight file */
  EXTATTN_ERR_TRUNCATED = 7,        /* weight file ends early */
  EXTATTN_ERR_VERSION = 8,          /* unsupported weight-file version */
  EXTATTN_ERR_OUT_OF_MEMORY = 9,
  EXTATTN_ERR_INTERNAL = 10
} extattn_status;

EXTATTN_API const char* extattn_status_string(extattn_status status);
EXTATTN_API const char* extattn_last_error(void);
EXTATTN_API const char* extattn_version(void);

/* ---- configuration ------------------------------------------------------ */

typedef enum extattn_mechanism {
  EXTATTN_MECH_SA = 0,  /* self-attention */
  EXTATTN_MECH_SSA = 1, /* simplified self-attention */
  EXTATTN_MECH_EA = 2,  /* external attention */
  EXTATTN_MECH_MEA = 3  /* multi-head external attention */
} extattn_mechanism;

typedef enum extattn_norm {
  EXTATTN_NORM_SOFTMAX = 0,
  EXTATTN_NORM_DOUBLE = 1
} extattn_norm;

typedef struct extattn_config {
  int mechanism; /* extattn_mechanism */
  uint64_t n;
  uint64_t d_in;
  uint64_t d;
  uint64_t d_prime;
  uint64_t s;
  uint64_t heads;
  int norm;       /* extattn_norm */
  int query_bias; /* nonzero: query projection has a bias */
} extattn_config;

/* EA, N = d_in = d = d' = S = H = 1, double normalization, no bias. */
EXTATTN_API void extattn_config_init(extattn_config* config);
EXTATTN_API extattn_status extattn_config_validate(const extattn_config* config);
/* Parses "sa", "ssa", "ea", "mea" / "softmax", "double". */
EXTATTN_API extattn_status extattn_parse_mechanism(const char* name, int* mechanism);
EXTATTN_API extattn_status extattn_parse_norm(const char* name, int* norm);

/* H * k heads and S / k memory elements. */
EXTATTN_API extattn_status extattn_head_memory_tradeoff(const extattn_config* base, uint64_t k,
                                                        extattn_config* out);

/* ---- cost counters ------------------------------------------------------- */

EXTATTN_API extattn_status extattn_count(const extattn_config* config, uint64_t* params,
                                         uint64_t* macs);

/* Writes the cost CSV header and one row per config (median_seconds empty). */
EXTATTN_API extattn_status extattn_write_cost_csv(const extattn_config* configs, size_t count,
                                                  const char* path);

/* ---- tensors ------------------------------------------------------------- */

typedef struct extattn_tensor extattn_tensor;

/* Copies shape and data (product of shape entries doubles). */
EXTATTN_API extattn_status extattn_tensor_create(const uint64_t* shape, size_t rank,
                                                 const double* data, extattn_tensor** out);
/* Entries ~ N(0, 1) from the library's deterministic generator. */
EXTATTN_API extattn_status extattn_tensor_random(const uint64_t* shape, size_t rank,
                                                 uint64_t seed, extattn_tensor** out);
EXTATTN_API void extattn_tensor_destroy(extattn_tensor* tensor);
EXTATTN_API size_t extattn_tensor_rank(const extattn_tensor* tensor);
EXTATTN_API uint64_t extattn_tensor_extent(const extattn_tensor* tensor, size_t axis);
EXTATTN_API size_t extattn_tensor_numel(const extattn_tensor* tensor);
EXTATTN_API const double* extattn_tensor_data(const extattn_tensor* tensor);

/* Single-tensor weight file. Loading requires exactly one tensor. */
EXTATTN_API extattn_status extattn_tensor_save(const extattn_tensor* tensor, const char* name,
                                               const char* path);
EXTATTN_API extattn_status extattn_tensor_load(const char* path, extattn_tensor** out);

/* ---- models -------------------------------------------------------------- */

typedef struct extattn_model extattn_model;

EXTATTN_API extattn_status extattn_model_create(const extattn_config* config, uint64_t seed,
                                                extattn_model** out);
/* Infers the mechanism from the layer names in the file; n is the pixel
 * count recorded in the resulting config. */
EXTATTN_API extattn_status extattn_model_load(const char* path, uint64_t n, int norm,
                                              extattn_model** out);
EXTATTN_API extattn_status extattn_model_save(const extattn_model* model, const char* path);
EXTATTN_API void extattn_model_destroy(extattn_model* model);
EXTATTN_API extattn_status extattn_model_config(const extattn_model* model,
                                                extattn_config* out);

/* Either output pointer may be NULL. */
EXTATTN_API extattn_status extattn_model_forward(const extattn_model* model,
                                                 const extattn_tensor* input,
                                                 extattn_tensor** f_out, extattn_tensor** attn);

/* Writes attn_h{h}_s{s}.pgm and attn.csv into out_dir. rows/cols of 0 mean
 * "infer from a square N". */
EXTATTN_API extattn_status extattn_dump_attention(const extattn_model* model,
                                                  const extattn_tensor* input, uint64_t rows,
                                                  uint64_t cols, const char* out_dir,
                                                  size_t* image_count);

/* ---- gradient check ------------------------------------------------------ */

typedef struct extattn_gradcheck extattn_gradcheck;

EXTATTN_API extattn_status extattn_gradcheck_run(const extattn_config* config, uint64_t seed,
                                                 double step, extattn_gradcheck** out);
EXTATTN_API void extattn_gradcheck_destroy(extattn_gradcheck* report);
EXTATTN_API size_t extattn_gradcheck_count(const extattn_gradcheck* report);
EXTATTN_API const char* extattn_gradcheck_name(const extattn_gradcheck* report, size_t i);
EXTATTN_API double extattn_gradcheck_error(const extattn_gradcheck* report, size_t i);
EXTATTN_API size_t extattn_gradcheck_entries(const extattn_gradcheck* report, size_t i);
EXTATTN_API double extattn_gradcheck_max_error(const extattn_gradcheck* report);

/* ---- benchmark ----------------------------------------------------------- */

typedef struct extattn_bench_options {
  int mechanism;
  uint64_t d;
  uint64_t d_prime;
  uint64_t s;
  uint64_t heads;
  const uint64_t* n_list;
  size_t n_count;
  uint32_t repeats; /* >= 5 */
  uint32_t warmup;
  int single_precision; /* nonzero: float32 forward */
  uint64_t seed;
  uint64_t memory_limit_bytes; /* 0: library default */
} extattn_bench_options;

typedef struct extattn_bench extattn_bench;

EXTATTN_API void extattn_bench_options_init(extattn_bench_options* options);
EXTATTN_API extattn_status extattn_bench_run(const extattn_bench_options* options,
                                             extattn_bench** out);
EXTATTN_API void extattn_bench_destroy(extattn_bench* bench);
EXTATTN_API size_t extattn_bench_row_count(const extattn_bench* bench);

typedef struct extattn_bench_row {
  uint64_t n;
  uint64_t params;
  uint64_t macs;
  double median_seconds; /* NaN when skipped */
  int skipped;
} extattn_bench_row;

EXTATTN_API extattn_status extattn_bench_row_get(const extattn_bench* bench, size_t i,
                                                 extattn_bench_row* row);
/* EXTATTN_ERR_NUMERIC when fewer than two rows were measured. */
EXTATTN_API extattn_status extattn_bench_slope(const extattn_bench* bench, double* slope);
EXTATTN_API extattn_status extattn_bench_write_csv(const extattn_bench* bench, const char* path);

/* ---- training ------------------------------------------------------------ */

typedef enum extattn_task {
  EXTATTN_TASK_COPY = 0,
  EXTATTN_TASK_DENOISE = 1,
  EXTATTN_TASK_CLASSIFY = 2
} extattn_task;

typedef struct extattn_train_options {
  int task;      /* extattn_task */
  int mechanism; /* EA or MEA */
  int norm;
  uint64_t n;
  uint64_t d_in;
  uint64_t d;
  uint64_t s;
  uint64_t heads;
  uint64_t num_classes;
  double noise_sigma;
  uint64_t train_size;
  uint64_t eval_size;
  uint64_t steps;
  double lr;
  uint64_t seed;
} extattn_train_options;

typedef struct extattn_train_log extattn_train_log;

/* Fills in the defaults for the given task (extattn_task). Classify uses
 * row-softmax normalization and a larger learning rate than copy/denoise. */
EXTATTN_API void extattn_train_options_init(extattn_train_options* options, int task);
EXTATTN_API extattn_status extattn_parse_task(const char* name, int* task);

/* model_out may be NULL; otherwise it receives the trained block plus its
 * read-out layer (saved under the name "readout"). */
EXTATTN_API extattn_status extattn_train_run(const extattn_train_options* options,
                                             extattn_train_log** log_out,
                                             extattn_model** model_out);
EXTATTN_API void extattn_train_log_destroy(extattn_train_log* log);
EXTATTN_API size_t extattn_train_log_steps(const extattn_train_log* log);
EXTATTN_API double extattn_train_log_loss(const extattn_train_log* log, size_t step);
EXTATTN_API double extattn_train_log_initial_loss(const extattn_train_log* log);
EXTATTN_API double extattn_train_log_final_loss(const extattn_train_log* log);
EXTATTN_API double extattn_train_log_eval_metric(const extattn_train_log* log);
EXTATTN_API const char* extattn_train_log_eval_metric_name(const extattn_train_log* log);
/* Nonzero when the run met its task's success threshold. */
EXTATTN_API int extattn_train_log_succeeded(const extattn_train_log* log);
EXTATTN_API extattn_status extattn_train_log_write_csv(const extattn_train_log* log,
                                                       const char* path);
EXTATTN_API extattn_status extattn_train_log_write_json(const extattn_train_log* log,
                                                        const char* path);

#ifdef __cplusplus
}
#endif

#endif /* EXTATTN_EXTATTN_H */
