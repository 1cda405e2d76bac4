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

// Command-line front end. Talks to the library only through extattn.h.
//
// Exit codes: 0 success, 1 a check or threshold failed, 2 usage or
// configuration error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "extattn/extattn.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

// Thrown by check() so a failing library call unwinds to main.
struct CallFailed {
  extattn_status status;
};

void check(extattn_status status) {
  if (status != EXTATTN_OK) {
    std::cerr << "error: " << extattn_last_error() << " (" << extattn_status_string(status)
              << ")\n";
    throw CallFailed{status};
  }
}

int exit_code_for(extattn_status status) {
  return status == EXTATTN_ERR_NUMERIC ? kExitCheckFailed : kExitUsage;
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using TensorPtr = std::unique_ptr<extattn_tensor, Deleter<extattn_tensor, extattn_tensor_destroy>>;
using ModelPtr = std::unique_ptr<extattn_model, Deleter<extattn_model, extattn_model_destroy>>;
using GradcheckPtr =
    std::unique_ptr<extattn_gradcheck, Deleter<extattn_gradcheck, extattn_gradcheck_destroy>>;
using BenchPtr = std::unique_ptr<extattn_bench, Deleter<extattn_bench, extattn_bench_destroy>>;
using TrainLogPtr =
    std::unique_ptr<extattn_train_log, Deleter<extattn_train_log, extattn_train_log_destroy>>;

const char* mechanism_name(int m) {
  switch (m) {
    case EXTATTN_MECH_SA: return "sa";
    case EXTATTN_MECH_SSA: return "ssa";
    case EXTATTN_MECH_EA: return "ea";
    case EXTATTN_MECH_MEA: return "mea";
  }
  return "?";
}

// Shape flags shared by several subcommands. Zero means "pick
// the default for this mechanism".
struct ShapeFlags {
  std::string mech;
  std::string norm = "double";
  uint64_t n = 8;
  uint64_t d_in = 0;
  uint64_t d = 8;
  uint64_t d_prime = 0;
  uint64_t s = 4;
  uint64_t heads = 0;
  bool query_bias = false;

  void add_to(CLI::App& cmd, bool with_n = true) {
    cmd.add_option("--mech", mech, "sa | ssa | ea | mea")->required();
    cmd.add_option("--norm", norm, "External-attention normalization: double | softmax")
        ->capture_default_str();
    if (with_n) cmd.add_option("--n", n, "Pixels per sample")->capture_default_str();
    cmd.add_option("--din", d_in, "Input width (default: d)");
    cmd.add_option("--d", d, "Feature width")->capture_default_str();
    cmd.add_option("--dprime", d_prime, "Self-attention query/key width (default: d)");
    cmd.add_option("--s", s, "Memory elements per head")->capture_default_str();
    cmd.add_option("--heads", heads, "Heads for mea (default: 2)");
    cmd.add_flag("--query-bias", query_bias, "Give the query projection a bias");
  }

  extattn_config config() const {
    extattn_config c;
    extattn_config_init(&c);
    check(extattn_parse_mechanism(mech.c_str(), &c.mechanism));
    check(extattn_parse_norm(norm.c_str(), &c.norm));
    c.n = n;
    c.d = d;
    c.d_in = d_in ? d_in : d;
    c.d_prime = d_prime ? d_prime : d;
    c.s = s;
    c.heads = heads ? heads : (c.mechanism == EXTATTN_MECH_MEA ? 2 : 1);
    c.query_bias = query_bias ? 1 : 0;
    check(extattn_config_validate(&c));
    return c;
  }
};

std::string format_general(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

int run_gradcheck(const ShapeFlags& flags, uint64_t seed, double step) {
  const extattn_config c = flags.config();
  extattn_gradcheck* raw = nullptr;
  check(extattn_gradcheck_run(&c, seed, step, &raw));
  GradcheckPtr report(raw);

  constexpr double kTolerance = 1e-4;
  std::printf("%-14s %8s %14s  %s\n", "parameter", "entries", "max_rel_err", "status");
  bool ok = true;
  for (size_t i = 0; i < extattn_gradcheck_count(report.get()); ++i) {
    const double err = extattn_gradcheck_error(report.get(), i);
    const bool pass = err < kTolerance;
    ok = ok && pass;
    std::printf("%-14s %8zu %14s  %s\n", extattn_gradcheck_name(report.get(), i),
                extattn_gradcheck_entries(report.get(), i), format_general(err).c_str(),
                pass ? "ok" : "FAIL");
  }
  std::printf("max relative error %s (tolerance %s, step %s, seed %llu)\n",
              format_general(extattn_gradcheck_max_error(report.get())).c_str(),
              format_general(kTolerance).c_str(), format_general(step).c_str(),
              static_cast<unsigned long long>(seed));
  return ok ? kExitOk : kExitCheckFailed;
}

void print_cost_header() {
  std::printf("%-4s %8s %6s %6s %6s %6s %6s %14s %16s\n", "mech", "N", "d_in", "d", "d'", "S",
              "H", "params", "macs");
}

void print_cost_row(const extattn_config& c, uint64_t params, uint64_t macs) {
  std::printf("%-4s %8llu %6llu %6llu %6llu %6llu %6llu %14llu %16llu\n",
              mechanism_name(c.mechanism), static_cast<unsigned long long>(c.n),
              static_cast<unsigned long long>(c.d_in), static_cast<unsigned long long>(c.d),
              static_cast<unsigned long long>(c.d_prime), static_cast<unsigned long long>(c.s),
              static_cast<unsigned long long>(c.heads), static_cast<unsigned long long>(params),
              static_cast<unsigned long long>(macs));
}

int run_count(const ShapeFlags& flags, const std::string& csv) {
  const extattn_config c = flags.config();
  uint64_t params = 0, macs = 0;
  check(extattn_count(&c, &params, &macs));
  print_cost_header();
  print_cost_row(c, params, macs);
  std::printf("params %llu\nmacs %llu\n", static_cast<unsigned long long>(params),
              static_cast<unsigned long long>(macs));
  if (!csv.empty()) check(extattn_write_cost_csv(&c, 1, csv.c_str()));
  return kExitOk;
}

int run_bench(const ShapeFlags& flags, const std::vector<uint64_t>& n_list, uint32_t repeats,
              uint32_t warmup, bool f32, uint64_t seed, double memory_gib,
              const std::string& csv) {
  extattn_config c = flags.config();  // validates the shape flags once
  extattn_bench_options o;
  extattn_bench_options_init(&o);
  o.mechanism = c.mechanism;
  o.d = c.d;
  o.d_prime = c.d_prime;
  o.s = c.s;
  o.heads = c.heads;
  o.n_list = n_list.data();
  o.n_count = n_list.size();
  o.repeats = repeats;
  o.warmup = warmup;
  o.single_precision = f32 ? 1 : 0;
  o.seed = seed;
  if (memory_gib > 0) o.memory_limit_bytes = static_cast<uint64_t>(memory_gib * 1073741824.0);

  extattn_bench* raw = nullptr;
  check(extattn_bench_run(&o, &raw));
  BenchPtr bench(raw);

  std::printf("%8s %14s %16s %14s\n", "N", "params", "macs", "median_s");
  for (size_t i = 0; i < extattn_bench_row_count(bench.get()); ++i) {
    extattn_bench_row row;
    check(extattn_bench_row_get(bench.get(), i, &row));
    std::printf("%8llu %14llu %16llu %14s\n", static_cast<unsigned long long>(row.n),
                static_cast<unsigned long long>(row.params),
                static_cast<unsigned long long>(row.macs),
                row.skipped ? "skipped" : format_general(row.median_seconds).c_str());
  }
  double slope = 0.0;
  if (extattn_bench_slope(bench.get(), &slope) == EXTATTN_OK) {
    std::printf("log-log slope %.4f\n", slope);
  } else {
    std::printf("log-log slope n/a (%s)\n", extattn_last_error());
  }
  if (!csv.empty()) check(extattn_bench_write_csv(bench.get(), csv.c_str()));
  return kExitOk;
}

struct TrainFlags {
  std::string task = "copy";
  std::string mech = "ea";
  std::optional<std::string> norm;
  uint64_t steps = 500;
  std::optional<double> lr;
  uint64_t seed = 0;
  std::optional<uint64_t> n, d_in, d, s, heads, classes, train_size, eval_size;
  std::optional<double> sigma;
  std::string save;
  std::string out = ".";
};

int run_train(const TrainFlags& f) {
  int task = 0;
  check(extattn_parse_task(f.task.c_str(), &task));
  extattn_train_options o;
  extattn_train_options_init(&o, task);
  check(extattn_parse_mechanism(f.mech.c_str(), &o.mechanism));
  if (f.norm) check(extattn_parse_norm(f.norm->c_str(), &o.norm));
  o.steps = f.steps;
  if (f.lr) o.lr = *f.lr;
  o.seed = f.seed;
  if (f.n) o.n = *f.n;
  if (f.d_in) o.d_in = *f.d_in;
  if (f.d) o.d = *f.d;
  if (f.s) o.s = *f.s;
  if (f.heads) o.heads = *f.heads;
  if (f.classes) o.num_classes = *f.classes;
  if (f.train_size) o.train_size = *f.train_size;
  if (f.eval_size) o.eval_size = *f.eval_size;
  if (f.sigma) o.noise_sigma = *f.sigma;

  extattn_train_log* raw_log = nullptr;
  extattn_model* raw_model = nullptr;
  check(extattn_train_run(&o, &raw_log, f.save.empty() ? nullptr : &raw_model));
  TrainLogPtr log(raw_log);
  ModelPtr model(raw_model);

  const std::filesystem::path out_dir(f.out);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create '" << f.out << "': " << ec.message() << '\n';
    return kExitUsage;
  }
  const auto csv = (out_dir / "train_loss.csv").string();
  const auto json = (out_dir / "train_summary.json").string();
  check(extattn_train_log_write_csv(log.get(), csv.c_str()));
  check(extattn_train_log_write_json(log.get(), json.c_str()));
  if (model) check(extattn_model_save(model.get(), f.save.c_str()));

  const double initial = extattn_train_log_initial_loss(log.get());
  const double final_loss = extattn_train_log_final_loss(log.get());
  std::printf("task %s, mechanism %s, %llu steps, lr %g, seed %llu\n", f.task.c_str(),
              f.mech.c_str(), static_cast<unsigned long long>(o.steps), o.lr,
              static_cast<unsigned long long>(o.seed));
  std::printf("initial loss %.6g\nfinal loss %.6g (%.2f%% of initial)\n", initial, final_loss,
              100.0 * final_loss / initial);
  std::printf("eval %s %.6g\n", extattn_train_log_eval_metric_name(log.get()),
              extattn_train_log_eval_metric(log.get()));
  std::printf("wrote %s and %s\n", csv.c_str(), json.c_str());
  const bool ok = extattn_train_log_succeeded(log.get()) != 0;
  std::printf("%s\n", ok ? "success" : "threshold not met");
  return ok ? kExitOk : kExitCheckFailed;
}

int run_dump(const std::string& weights, const std::string& input, const std::string& out,
             uint64_t rows, uint64_t cols, const std::string& norm_name) {
  if ((rows == 0) != (cols == 0)) {
    std::cerr << "error: --rows and --cols must be given together\n";
    return kExitUsage;
  }
  extattn_tensor* raw_input = nullptr;
  check(extattn_tensor_load(input.c_str(), &raw_input));
  TensorPtr sample(raw_input);
  const size_t rank = extattn_tensor_rank(sample.get());
  const uint64_t n = extattn_tensor_extent(sample.get(), rank >= 2 ? rank - 2 : 0);

  int norm = 0;
  check(extattn_parse_norm(norm_name.c_str(), &norm));
  extattn_model* raw_model = nullptr;
  check(extattn_model_load(weights.c_str(), n, norm, &raw_model));
  ModelPtr model(raw_model);

  size_t images = 0;
  check(extattn_dump_attention(model.get(), sample.get(), rows, cols, out.c_str(), &images));
  std::printf("wrote %zu maps and attn.csv to %s\n", images, out.c_str());
  return kExitOk;
}

int run_init(const ShapeFlags& flags, uint64_t seed, const std::string& out) {
  const extattn_config c = flags.config();
  extattn_model* raw = nullptr;
  check(extattn_model_create(&c, seed, &raw));
  ModelPtr model(raw);
  check(extattn_model_save(model.get(), out.c_str()));
  std::printf("wrote %s weights to %s\n", mechanism_name(c.mechanism), out.c_str());
  return kExitOk;
}

int run_make_input(uint64_t n, uint64_t d_in, uint64_t seed, const std::string& out) {
  const uint64_t shape[2] = {n, d_in};
  extattn_tensor* raw = nullptr;
  check(extattn_tensor_random(shape, 2, seed, &raw));
  TensorPtr t(raw);
  check(extattn_tensor_save(t.get(), "input", out.c_str()));
  std::printf("wrote %llux%llu input to %s\n", static_cast<unsigned long long>(n),
              static_cast<unsigned long long>(d_in), out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"External attention toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(extattn_version()));

  ShapeFlags grad_flags;
  uint64_t grad_seed = 1;
  double grad_step = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad_flags.add_to(*grad);
  grad->add_option("--seed", grad_seed)->capture_default_str();
  grad->add_option("--step", grad_step, "Central-difference step h")->capture_default_str();

  ShapeFlags count_flags;
  std::string count_csv;
  auto* count = app.add_subcommand("count", "Analytic parameter and multiply-accumulate counts");
  count_flags.add_to(*count);
  count->add_option("--csv", count_csv, "Also write the row as CSV");

  ShapeFlags bench_flags;
  bench_flags.d = 64;
  bench_flags.s = 64;
  std::vector<uint64_t> n_list{1024, 2048, 4096, 8192};
  uint32_t repeats = 5, warmup = 1;
  bool f32 = false;
  uint64_t bench_seed = 0;
  double memory_gib = 0;
  std::string bench_csv;
  auto* bench = app.add_subcommand("bench", "Time the forward pass over a list of N");
  bench_flags.add_to(*bench, /*with_n=*/false);
  bench->add_option("--nlist", n_list, "Comma-separated pixel counts")->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed runs per N (>= 5)")->capture_default_str();
  bench->add_option("--warmup", warmup, "Untimed runs per N")->capture_default_str();
  bench->add_flag("--f32", f32, "Time a float32 forward pass");
  bench->add_option("--seed", bench_seed)->capture_default_str();
  bench->add_option("--memory-gib", memory_gib, "Skip N whose estimate exceeds this");
  bench->add_option("--csv", bench_csv, "Write rows as CSV");

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train-demo", "Train an ea/mea block on a toy task");
  train->add_option("--task", train_flags.task, "copy | denoise | classify")->capture_default_str();
  train->add_option("--mech", train_flags.mech, "ea | mea")->capture_default_str();
  train->add_option("--norm", train_flags.norm, "double | softmax (default depends on task)");
  train->add_option("--steps", train_flags.steps)->capture_default_str();
  train->add_option("--lr", train_flags.lr, "Learning rate (default depends on task)");
  train->add_option("--seed", train_flags.seed)->capture_default_str();
  train->add_option("--n", train_flags.n, "Pixels per sample");
  train->add_option("--din", train_flags.d_in, "Channels per pixel");
  train->add_option("--d", train_flags.d, "Block width");
  train->add_option("--s", train_flags.s, "Memory elements");
  train->add_option("--heads", train_flags.heads, "Heads for mea");
  train->add_option("--classes", train_flags.classes, "Classes for classify");
  train->add_option("--sigma", train_flags.sigma, "Noise level for denoise");
  train->add_option("--train-size", train_flags.train_size, "Training samples");
  train->add_option("--eval-size", train_flags.eval_size, "Held-out samples");
  train->add_option("--save", train_flags.save, "Write trained weights here");
  train->add_option("--out", train_flags.out, "Directory for train_loss.csv and train_summary.json")
      ->capture_default_str();

  std::string dump_weights, dump_input, dump_out, dump_norm = "double";
  uint64_t rows = 0, cols = 0;
  auto* dump = app.add_subcommand("dump-attn", "Write attention maps as PGM images");
  dump->add_option("--weights", dump_weights)->required();
  dump->add_option("--input", dump_input, "Single-tensor file of shape N x d_in")->required();
  dump->add_option("--out", dump_out, "Output directory")->required();
  dump->add_option("--rows", rows, "Image rows (with --cols) when N is not square");
  dump->add_option("--cols", cols, "Image columns");
  dump->add_option("--norm", dump_norm)->capture_default_str();

  ShapeFlags init_flags;
  uint64_t init_seed = 0;
  std::string init_out;
  auto* init = app.add_subcommand("init", "Write freshly initialized weights");
  init_flags.add_to(*init);
  init->add_option("--seed", init_seed)->capture_default_str();
  init->add_option("--out", init_out)->required();

  uint64_t input_n = 64, input_din = 8, input_seed = 0;
  std::string input_out;
  auto* make_input = app.add_subcommand("make-input", "Write a N(0, 1) input tensor");
  make_input->add_option("--n", input_n)->capture_default_str();
  make_input->add_option("--din", input_din)->capture_default_str();
  make_input->add_option("--seed", input_seed)->capture_default_str();
  make_input->add_option("--out", input_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*grad) return run_gradcheck(grad_flags, grad_seed, grad_step);
    if (*count) return run_count(count_flags, count_csv);
    if (*bench) {
      return run_bench(bench_flags, n_list, repeats, warmup, f32, bench_seed, memory_gib,
                       bench_csv);
    }
    if (*train) return run_train(train_flags);
    if (*dump) return run_dump(dump_weights, dump_input, dump_out, rows, cols, dump_norm);
    if (*init) return run_init(init_flags, init_seed, init_out);
    if (*make_input) return run_make_input(input_n, input_din, input_seed, input_out);
  } catch (const CallFailed& e) {
    return exit_code_for(e.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
