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

#include "extattn/extattn.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include "extattn/analysis.hpp"
#include "extattn/attention.hpp"
#include "extattn/attention_export.hpp"
#include "extattn/error.hpp"
#include "extattn/grad.hpp"
#include "extattn/harness.hpp"
#include "extattn/layers.hpp"
#include "extattn/random.hpp"

struct extattn_tensor {
  extattn::Tensor value;
  std::vector<uint64_t> shape;
};

struct extattn_model {
  extattn::AttentionModel model;
  std::vector<extattn::LinearLayer> extra;  // saved after the block's layers
};

struct extattn_gradcheck {
  extattn::GradCheckReport report;
};

struct extattn_bench {
  extattn::BenchResult result;
};

struct extattn_train_log {
  extattn::TrainLog log;
};

namespace {

using namespace extattn;

thread_local std::string g_last_error;

extattn_status fail(extattn_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
void require(const T* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

// Runs an API body, mapping the library's exceptions onto status codes.
template <typename F>
extattn_status call(F&& body) {
  try {
    body();
    return EXTATTN_OK;
  } catch (const InvalidArgument& e) {
    return fail(EXTATTN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const BadMagicError& e) {
    return fail(EXTATTN_ERR_BAD_MAGIC, e.what());
  } catch (const TruncatedFileError& e) {
    return fail(EXTATTN_ERR_TRUNCATED, e.what());
  } catch (const VersionMismatchError& e) {
    return fail(EXTATTN_ERR_VERSION, e.what());
  } catch (const IoError& e) {
    return fail(EXTATTN_ERR_IO, e.what());
  } catch (const DimensionError& e) {
    return fail(EXTATTN_ERR_DIMENSION, e.what());
  } catch (const ConfigError& e) {
    return fail(EXTATTN_ERR_CONFIG, e.what());
  } catch (const NumericError& e) {
    return fail(EXTATTN_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(EXTATTN_ERR_OUT_OF_MEMORY, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(EXTATTN_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(EXTATTN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EXTATTN_ERR_INTERNAL, "unknown error");
  }
}

Mechanism to_mechanism(int m) {
  switch (m) {
    case EXTATTN_MECH_SA: return Mechanism::SelfAttention;
    case EXTATTN_MECH_SSA: return Mechanism::SimplifiedSelfAttention;
    case EXTATTN_MECH_EA: return Mechanism::External;
    case EXTATTN_MECH_MEA: return Mechanism::MultiHeadExternal;
  }
  throw InvalidArgument("unknown mechanism value " + std::to_string(m));
}

int from_mechanism(Mechanism m) {
  switch (m) {
    case Mechanism::SelfAttention: return EXTATTN_MECH_SA;
    case Mechanism::SimplifiedSelfAttention: return EXTATTN_MECH_SSA;
    case Mechanism::External: return EXTATTN_MECH_EA;
    case Mechanism::MultiHeadExternal: return EXTATTN_MECH_MEA;
  }
  return -1;
}

Normalization to_norm(int n) {
  switch (n) {
    case EXTATTN_NORM_SOFTMAX: return Normalization::Softmax;
    case EXTATTN_NORM_DOUBLE: return Normalization::DoubleNorm;
  }
  throw InvalidArgument("unknown normalization value " + std::to_string(n));
}

int from_norm(Normalization n) {
  return n == Normalization::Softmax ? EXTATTN_NORM_SOFTMAX : EXTATTN_NORM_DOUBLE;
}

AttentionConfig to_config(const extattn_config* c) {
  require(c, "config");
  AttentionConfig cfg;
  cfg.mechanism = to_mechanism(c->mechanism);
  cfg.n = c->n;
  cfg.d_in = c->d_in;
  cfg.d = c->d;
  cfg.d_prime = c->d_prime;
  cfg.s = c->s;
  cfg.heads = c->heads;
  cfg.norm = to_norm(c->norm);
  cfg.query_bias = c->query_bias != 0;
  return cfg;
}

extattn_config from_config(const AttentionConfig& cfg) {
  extattn_config c;
  c.mechanism = from_mechanism(cfg.mechanism);
  c.n = cfg.n;
  c.d_in = cfg.d_in;
  c.d = cfg.d;
  c.d_prime = cfg.d_prime;
  c.s = cfg.s;
  c.heads = cfg.heads;
  c.norm = from_norm(cfg.norm);
  c.query_bias = cfg.query_bias ? 1 : 0;
  return c;
}

Shape to_shape(const uint64_t* shape, size_t rank) {
  if (rank == 0) throw DimensionError("tensor rank must be at least 1");
  require(shape, "shape");
  return Shape(shape, shape + rank);
}

extattn_tensor* wrap(Tensor t) {
  auto* out = new extattn_tensor{std::move(t), {}};
  out->shape.assign(out->value.shape().begin(), out->value.shape().end());
  return out;
}

}  // namespace

extern "C" {

const char* extattn_status_string(extattn_status status) {
  switch (status) {
    case EXTATTN_OK: return "ok";
    case EXTATTN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EXTATTN_ERR_DIMENSION: return "dimension error";
    case EXTATTN_ERR_CONFIG: return "configuration error";
    case EXTATTN_ERR_NUMERIC: return "numeric error";
    case EXTATTN_ERR_IO: return "I/O error";
    case EXTATTN_ERR_BAD_MAGIC: return "bad magic";
    case EXTATTN_ERR_TRUNCATED: return "truncated file";
    case EXTATTN_ERR_VERSION: return "version mismatch";
    case EXTATTN_ERR_OUT_OF_MEMORY: return "out of memory";
    case EXTATTN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* extattn_last_error(void) { return g_last_error.c_str(); }

const char* extattn_version(void) { return "0.1.0"; }

void extattn_config_init(extattn_config* config) {
  if (!config) return;
  *config = from_config(AttentionConfig{});
}

extattn_status extattn_config_validate(const extattn_config* config) {
  return call([&] { to_config(config).validate(); });
}

extattn_status extattn_parse_mechanism(const char* name, int* mechanism) {
  return call([&] {
    require(name, "name");
    require(mechanism, "mechanism");
    auto m = parse_mechanism(name);
    if (!m) throw ConfigError(std::string("unknown mechanism '") + name + "'");
    *mechanism = from_mechanism(*m);
  });
}

extattn_status extattn_parse_norm(const char* name, int* norm) {
  return call([&] {
    require(name, "name");
    require(norm, "norm");
    auto n = parse_normalization(name);
    if (!n) throw ConfigError(std::string("unknown normalization '") + name + "'");
    *norm = *n == Normalization::Softmax ? EXTATTN_NORM_SOFTMAX : EXTATTN_NORM_DOUBLE;
  });
}

extattn_status extattn_head_memory_tradeoff(const extattn_config* base, uint64_t k,
                                            extattn_config* out) {
  return call([&] {
    require(out, "out");
    *out = from_config(head_memory_tradeoff(to_config(base), k));
  });
}

extattn_status extattn_count(const extattn_config* config, uint64_t* params, uint64_t* macs) {
  return call([&] {
    const AttentionConfig cfg = to_config(config);
    const auto report = cost_report(cfg);
    if (params) *params = report.params;
    if (macs) *macs = report.macs;
  });
}

extattn_status extattn_write_cost_csv(const extattn_config* configs, size_t count,
                                      const char* path) {
  return call([&] {
    require(path, "path");
    if (count) require(configs, "configs");
    std::vector<CostReport> reports;
    for (size_t i = 0; i < count; ++i) reports.push_back(cost_report(to_config(&configs[i])));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(std::string("cannot open '") + path + "' for writing");
    write_cost_csv(out, reports);
    if (!out) throw IoError(std::string("write to '") + path + "' failed");
  });
}

extattn_status extattn_tensor_create(const uint64_t* shape, size_t rank, const double* data,
                                     extattn_tensor** out) {
  return call([&] {
    require(out, "out");
    Shape s = to_shape(shape, rank);
    const size_t numel = shape_numel(s);
    require(data, "data");
    *out = wrap(Tensor(std::move(s), std::vector<double>(data, data + numel)));
  });
}

extattn_status extattn_tensor_random(const uint64_t* shape, size_t rank, uint64_t seed,
                                     extattn_tensor** out) {
  return call([&] {
    require(out, "out");
    Tensor t(to_shape(shape, rank));
    Rng rng(seed);
    for (double& v : t.data()) v = rng.normal();
    *out = wrap(std::move(t));
  });
}

void extattn_tensor_destroy(extattn_tensor* tensor) { delete tensor; }

size_t extattn_tensor_rank(const extattn_tensor* tensor) {
  return tensor ? tensor->shape.size() : 0;
}

uint64_t extattn_tensor_extent(const extattn_tensor* tensor, size_t axis) {
  return tensor && axis < tensor->shape.size() ? tensor->shape[axis] : 0;
}

size_t extattn_tensor_numel(const extattn_tensor* tensor) {
  return tensor ? tensor->value.numel() : 0;
}

const double* extattn_tensor_data(const extattn_tensor* tensor) {
  return tensor ? tensor->value.data().data() : nullptr;
}

extattn_status extattn_tensor_save(const extattn_tensor* tensor, const char* name,
                                   const char* path) {
  return call([&] {
    require(tensor, "tensor");
    require(path, "path");
    std::vector<NamedTensor> one{{name ? name : "input", tensor->value}};
    save_tensors(one, path);
  });
}

extattn_status extattn_tensor_load(const char* path, extattn_tensor** out) {
  return call([&] {
    require(path, "path");
    require(out, "out");
    auto tensors = load_tensors(path);
    if (tensors.size() != 1) {
      throw IoError(std::string("'") + path + "' holds " + std::to_string(tensors.size()) +
                    " tensors, expected exactly one");
    }
    *out = wrap(std::move(tensors.front().value));
  });
}

extattn_status extattn_model_create(const extattn_config* config, uint64_t seed,
                                    extattn_model** out) {
  return call([&] {
    require(out, "out");
    *out = new extattn_model{make_model(to_config(config), seed), {}};
  });
}

extattn_status extattn_model_load(const char* path, uint64_t n, int norm, extattn_model** out) {
  return call([&] {
    require(path, "path");
    require(out, "out");
    const Normalization nn = to_norm(norm);
    auto layers = load_weights(path);
    auto model = model_from_layers(layers, n == 0 ? 1 : n, nn);
    std::vector<LinearLayer> extra;
    for (auto& l : layers) {
      bool used = false;
      for (const auto& m : model.layers) used = used || m.name == l.name;
      if (!used) extra.push_back(std::move(l));
    }
    *out = new extattn_model{std::move(model), std::move(extra)};
  });
}

extattn_status extattn_model_save(const extattn_model* model, const char* path) {
  return call([&] {
    require(model, "model");
    require(path, "path");
    std::vector<LinearLayer> layers = model->model.layers;
    layers.insert(layers.end(), model->extra.begin(), model->extra.end());
    save_weights(layers, path);
  });
}

void extattn_model_destroy(extattn_model* model) { delete model; }

extattn_status extattn_model_config(const extattn_model* model, extattn_config* out) {
  return call([&] {
    require(model, "model");
    require(out, "out");
    *out = from_config(model->model.config);
  });
}

extattn_status extattn_model_forward(const extattn_model* model, const extattn_tensor* input,
                                     extattn_tensor** f_out, extattn_tensor** attn) {
  return call([&] {
    require(model, "model");
    require(input, "input");
    auto result = forward(model->model, input->value, /*record=*/false);
    extattn_tensor* out_handle = f_out ? wrap(std::move(result.f_out)) : nullptr;
    if (attn) *attn = wrap(std::move(result.attn));
    if (f_out) *f_out = out_handle;
  });
}

extattn_status extattn_dump_attention(const extattn_model* model, const extattn_tensor* input,
                                      uint64_t rows, uint64_t cols, const char* out_dir,
                                      size_t* image_count) {
  return call([&] {
    require(model, "model");
    require(input, "input");
    require(out_dir, "out_dir");
    const Tensor& x = input->value;
    if (x.rank() < 2) throw DimensionError("attention input must be [N x d_in]");
    const size_t n = x.shape()[x.rank() - 2];
    std::optional<size_t> r, c;
    if (rows || cols) {
      r = rows;
      c = cols;
    }
    const MapLayout layout = infer_layout(n, r, c);
    auto dump = dump_attention_maps(model->model, x, layout, out_dir);
    if (image_count) *image_count = dump.images.size();
  });
}

extattn_status extattn_gradcheck_run(const extattn_config* config, uint64_t seed, double step,
                                     extattn_gradcheck** out) {
  return call([&] {
    require(out, "out");
    *out = new extattn_gradcheck{finite_diff_check(to_config(config), seed, step)};
  });
}

void extattn_gradcheck_destroy(extattn_gradcheck* report) { delete report; }

size_t extattn_gradcheck_count(const extattn_gradcheck* report) {
  return report ? report->report.params.size() : 0;
}

const char* extattn_gradcheck_name(const extattn_gradcheck* report, size_t i) {
  if (!report || i >= report->report.params.size()) return nullptr;
  return report->report.params[i].name.c_str();
}

double extattn_gradcheck_error(const extattn_gradcheck* report, size_t i) {
  if (!report || i >= report->report.params.size()) return std::nan("");
  return report->report.params[i].max_rel_error;
}

size_t extattn_gradcheck_entries(const extattn_gradcheck* report, size_t i) {
  if (!report || i >= report->report.params.size()) return 0;
  return report->report.params[i].entries;
}

double extattn_gradcheck_max_error(const extattn_gradcheck* report) {
  return report ? report->report.max_rel_error() : std::nan("");
}

void extattn_bench_options_init(extattn_bench_options* options) {
  if (!options) return;
  const BenchOptions defaults;
  options->mechanism = from_mechanism(defaults.mechanism);
  options->d = defaults.d;
  options->d_prime = defaults.d_prime;
  options->s = defaults.s;
  options->heads = defaults.heads;
  options->n_list = nullptr;
  options->n_count = 0;
  options->repeats = defaults.repeats;
  options->warmup = defaults.warmup;
  options->single_precision = 0;
  options->seed = defaults.seed;
  options->memory_limit_bytes = 0;
}

extattn_status extattn_bench_run(const extattn_bench_options* options, extattn_bench** out) {
  return call([&] {
    require(options, "options");
    require(out, "out");
    BenchOptions o;
    o.mechanism = to_mechanism(options->mechanism);
    o.d = options->d;
    o.d_prime = options->d_prime;
    o.s = options->s;
    o.heads = options->heads;
    if (options->n_count) require(options->n_list, "n_list");
    o.n_list.assign(options->n_list, options->n_list + options->n_count);
    o.repeats = options->repeats;
    o.warmup = options->warmup;
    o.precision = options->single_precision ? Precision::F32 : Precision::F64;
    o.seed = options->seed;
    if (options->memory_limit_bytes) o.memory_limit_bytes = options->memory_limit_bytes;
    *out = new extattn_bench{bench_scaling(o)};
  });
}

void extattn_bench_destroy(extattn_bench* bench) { delete bench; }

size_t extattn_bench_row_count(const extattn_bench* bench) {
  return bench ? bench->result.rows.size() : 0;
}

extattn_status extattn_bench_row_get(const extattn_bench* bench, size_t i,
                                     extattn_bench_row* row) {
  return call([&] {
    require(bench, "bench");
    require(row, "row");
    if (i >= bench->result.rows.size()) throw InvalidArgument("row index out of range");
    const auto& r = bench->result.rows[i];
    row->n = r.cost.config.n;
    row->params = r.cost.params;
    row->macs = r.cost.macs;
    row->median_seconds = r.cost.wall_time.value_or(std::numeric_limits<double>::quiet_NaN());
    row->skipped = r.skipped ? 1 : 0;
  });
}

extattn_status extattn_bench_slope(const extattn_bench* bench, double* slope) {
  return call([&] {
    require(bench, "bench");
    require(slope, "slope");
    if (!bench->result.slope) throw NumericError("fewer than two measured rows; no slope");
    *slope = *bench->result.slope;
  });
}

extattn_status extattn_bench_write_csv(const extattn_bench* bench, const char* path) {
  return call([&] {
    require(bench, "bench");
    require(path, "path");
    std::vector<CostReport> reports;
    for (const auto& r : bench->result.rows) reports.push_back(r.cost);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(std::string("cannot open '") + path + "' for writing");
    write_cost_csv(out, reports);
    if (!out) throw IoError(std::string("write to '") + path + "' failed");
  });
}

void extattn_train_options_init(extattn_train_options* options, int kind) {
  if (!options) return;
  if (kind < EXTATTN_TASK_COPY || kind > EXTATTN_TASK_CLASSIFY) kind = EXTATTN_TASK_COPY;
  const auto task_kind = static_cast<TaskKind>(kind);
  const TaskOptions task = default_task_options(task_kind);
  const TrainOptions train = default_train_options(task_kind);
  options->task = kind;
  options->mechanism = EXTATTN_MECH_EA;
  options->norm = from_norm(train.norm);
  options->n = task.n;
  options->d_in = task.d_in;
  options->d = train.d;
  options->s = train.s;
  options->heads = train.heads;
  options->num_classes = task.num_classes;
  options->noise_sigma = task.noise_sigma;
  options->train_size = task.train_size;
  options->eval_size = task.eval_size;
  options->steps = train.steps;
  options->lr = train.lr;
  options->seed = train.seed;
}

extattn_status extattn_parse_task(const char* name, int* task) {
  return call([&] {
    require(name, "name");
    require(task, "task");
    auto k = parse_task_kind(name);
    if (!k) throw ConfigError(std::string("unknown task '") + name + "'");
    *task = static_cast<int>(*k);
  });
}

extattn_status extattn_train_run(const extattn_train_options* options,
                                 extattn_train_log** log_out, extattn_model** model_out) {
  return call([&] {
    require(options, "options");
    require(log_out, "log_out");
    if (options->task < EXTATTN_TASK_COPY || options->task > EXTATTN_TASK_CLASSIFY) {
      throw InvalidArgument("unknown task value " + std::to_string(options->task));
    }
    TaskOptions t;
    t.n = options->n;
    t.d_in = options->d_in;
    t.num_classes = options->num_classes;
    t.noise_sigma = options->noise_sigma;
    t.train_size = options->train_size;
    t.eval_size = options->eval_size;
    const ToyTask task = make_task(static_cast<TaskKind>(options->task), options->seed, t);

    TrainOptions o;
    o.mechanism = to_mechanism(options->mechanism);
    o.norm = to_norm(options->norm);
    o.d = options->d;
    o.s = options->s;
    o.heads = options->heads;
    o.steps = options->steps;
    o.lr = options->lr;
    o.seed = options->seed;

    auto result = train(task, o);
    extattn_model* model = nullptr;
    if (model_out) model = new extattn_model{result.model.block, {result.model.readout}};
    *log_out = new extattn_train_log{std::move(result.log)};
    if (model_out) *model_out = model;
  });
}

void extattn_train_log_destroy(extattn_train_log* log) { delete log; }

size_t extattn_train_log_steps(const extattn_train_log* log) {
  return log ? log->log.losses.size() : 0;
}

double extattn_train_log_loss(const extattn_train_log* log, size_t step) {
  if (!log || step >= log->log.losses.size()) return std::nan("");
  return log->log.losses[step];
}

double extattn_train_log_initial_loss(const extattn_train_log* log) {
  return log ? log->log.initial_loss : std::nan("");
}

double extattn_train_log_final_loss(const extattn_train_log* log) {
  return log ? log->log.final_loss : std::nan("");
}

double extattn_train_log_eval_metric(const extattn_train_log* log) {
  return log ? log->log.eval_metric : std::nan("");
}

const char* extattn_train_log_eval_metric_name(const extattn_train_log* log) {
  return log ? log->log.eval_metric_name.c_str() : nullptr;
}

int extattn_train_log_succeeded(const extattn_train_log* log) {
  return log && training_succeeded(log->log) ? 1 : 0;
}

extattn_status extattn_train_log_write_csv(const extattn_train_log* log, const char* path) {
  return call([&] {
    require(log, "log");
    require(path, "path");
    write_loss_csv(log->log, path);
  });
}

extattn_status extattn_train_log_write_json(const extattn_train_log* log, const char* path) {
  return call([&] {
    require(log, "log");
    require(path, "path");
    write_summary_json(log->log, path);
  });
}

}  // extern "C"
