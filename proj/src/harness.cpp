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

#include "extattn/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "extattn/grad.hpp"
#include "extattn/random.hpp"

namespace extattn {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Copy: return "copy";
    case TaskKind::Denoise: return "denoise";
    case TaskKind::Classify: return "classify";
  }
  return "?";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) {
  if (s == "copy") return TaskKind::Copy;
  if (s == "denoise") return TaskKind::Denoise;
  if (s == "classify") return TaskKind::Classify;
  return std::nullopt;
}

namespace {

constexpr std::uint64_t kEvalStreamBase = std::uint64_t{1} << 40;
constexpr std::uint64_t kPrototypeStream = 0xC1A55;

Tensor gaussian(Rng& rng, Shape shape, double sigma = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = sigma * rng.normal();
  return t;
}

Sample draw(const ToyTask& task, std::uint64_t stream) {
  Rng rng(derive_seed(task.seed, stream));
  Sample s;
  switch (task.kind) {
    case TaskKind::Copy:
      s.input = gaussian(rng, {task.n, task.d_in});
      s.target = s.input;
      break;
    case TaskKind::Denoise:
      s.target = gaussian(rng, {task.n, task.d_in});
      s.input = s.target + gaussian(rng, {task.n, task.d_in}, task.noise_sigma);
      break;
    case TaskKind::Classify: {
      const std::size_t cls = rng.below(task.num_classes);
      s.input = gaussian(rng, {task.n, task.d_in});
      for (std::size_t i = 0; i < task.n; ++i)
        for (std::size_t j = 0; j < task.d_in; ++j) s.input.at(i, j) += task.prototypes.at(cls, j);
      // The label is defined by the rule, not by the class used to draw.
      std::vector<double> mean(task.d_in, 0.0);
      for (std::size_t i = 0; i < task.n; ++i)
        for (std::size_t j = 0; j < task.d_in; ++j) mean[j] += s.input.at(i, j);
      double best = -INFINITY;
      for (std::size_t c = 0; c < task.num_classes; ++c) {
        double dot = 0.0;
        for (std::size_t j = 0; j < task.d_in; ++j) dot += mean[j] * task.prototypes.at(c, j);
        if (dot > best) {
          best = dot;
          s.label = c;
        }
      }
      break;
    }
  }
  return s;
}

}  // namespace

Sample ToyTask::sample(std::uint64_t index) const { return draw(*this, index); }

Sample ToyTask::eval_sample(std::uint64_t index) const {
  return draw(*this, kEvalStreamBase + index);
}

std::vector<Sample> ToyTask::train_set() const {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < train_size; ++i) out.push_back(sample(i));
  return out;
}

std::vector<Sample> ToyTask::eval_set() const {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < eval_size; ++i) out.push_back(eval_sample(i));
  return out;
}

ToyTask make_task(TaskKind kind, std::uint64_t seed, const TaskOptions& o) {
  if (o.n == 0 || o.d_in == 0 || o.train_size == 0) {
    throw ConfigError("task dimensions and training-set size must be >= 1");
  }
  if (kind == TaskKind::Classify && o.num_classes < 2) {
    throw ConfigError("classify task needs at least 2 classes");
  }
  if (kind == TaskKind::Classify && o.num_classes > o.d_in) {
    throw ConfigError("classify task needs num_classes <= d_in for orthogonal prototypes");
  }
  if (!(o.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  ToyTask task{kind, seed, o.n, o.d_in, o.num_classes, o.noise_sigma, o.train_size,
               o.eval_size, {}};
  if (kind == TaskKind::Classify) {
    // Orthonormal prototypes (Gram-Schmidt on Gaussian draws) so every pair
    // of classes is equally separated.
    Rng rng(derive_seed(seed, kPrototypeStream));
    task.prototypes = gaussian(rng, {o.num_classes, o.d_in});
    auto& p = task.prototypes;
    for (std::size_t c = 0; c < o.num_classes; ++c) {
      for (std::size_t prev = 0; prev < c; ++prev) {
        double dot = 0.0;
        for (std::size_t j = 0; j < o.d_in; ++j) dot += p.at(c, j) * p.at(prev, j);
        for (std::size_t j = 0; j < o.d_in; ++j) p.at(c, j) -= dot * p.at(prev, j);
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < o.d_in; ++j) norm += p.at(c, j) * p.at(c, j);
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < o.d_in; ++j) p.at(c, j) /= norm;
    }
  }
  return task;
}

ToyTask make_task(std::string_view kind, std::uint64_t seed, const TaskOptions& options) {
  auto k = parse_task_kind(kind);
  if (!k) throw ConfigError("unknown task kind '" + std::string(kind) + "'");
  return make_task(*k, seed, options);
}

TaskOptions default_task_options(TaskKind kind) {
  TaskOptions o;
  if (kind == TaskKind::Classify) {
    o.n = 16;
    o.d_in = 4;
    o.train_size = 128;
    o.eval_size = 256;
  }
  return o;
}

TrainOptions default_train_options(TaskKind kind) {
  TrainOptions o;
  if (kind == TaskKind::Classify) {
    o.norm = Normalization::Softmax;
    o.lr = 0.3;
  }
  return o;
}

ToyTask make_task(TaskKind kind, std::uint64_t seed) {
  return make_task(kind, seed, default_task_options(kind));
}

ToyTask make_task(std::string_view kind, std::uint64_t seed) {
  auto k = parse_task_kind(kind);
  if (!k) throw ConfigError("unknown task kind '" + std::string(kind) + "'");
  return make_task(*k, seed);
}

std::vector<LinearLayer> TrainedModel::layers() const {
  std::vector<LinearLayer> out = block.layers;
  out.push_back(readout);
  return out;
}

namespace {

using GradMap = std::map<std::string, Tensor>;

struct SampleResult {
  double loss = 0.0;
  bool correct = false;
};

// Loss of one sample; when grads is non-null, adds its gradients (scaled by
// weight) into grads.
SampleResult run_sample(const TrainedModel& model, const ToyTask& task, const Sample& sample,
                        GradMap* grads, double weight) {
  auto fwd = forward(model.block, sample.input, grads != nullptr);
  const Tensor& features = fwd.f_out;  // [N x w]
  const std::size_t n = features.shape()[0], w = features.shape()[1];
  SampleResult res;
  Tensor d_features;
  const LinearLayer& ro = model.readout;

  auto add = [&](const std::string& key, const Tensor& g) {
    auto it = grads->find(key);
    Tensor scaled = scale(g, weight);
    if (it == grads->end()) {
      grads->emplace(key, std::move(scaled));
    } else {
      it->second = it->second + scaled;
    }
  };

  if (task.kind == TaskKind::Classify) {
    Tensor pooled({1, w});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) pooled.at(0, j) += features.at(i, j);
    for (double& v : pooled.data()) v /= static_cast<double>(n);
    const Tensor logits = apply_linear(ro, pooled);
    const Tensor probs = softmax(logits, 1);
    res.loss = -std::log(std::max(probs[sample.label], 1e-300));
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < logits.numel(); ++c)
      if (logits[c] > logits[argmax]) argmax = c;
    res.correct = argmax == sample.label;
    if (grads) {
      Tensor d_logits = probs;
      d_logits[sample.label] -= 1.0;
      add("readout.weight", matmul(transpose2d(d_logits), pooled));
      add("readout.bias", d_logits.reshape({logits.numel()}));
      const Tensor d_pooled = matmul(d_logits, ro.weight);
      d_features = Tensor({n, w});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j)
          d_features.at(i, j) = d_pooled.at(0, j) / static_cast<double>(n);
    }
  } else {
    const Tensor pred = apply_linear(ro, features);
    const Tensor diff = pred - sample.target;
    const double count = static_cast<double>(diff.numel());
    for (double v : diff.data()) res.loss += v * v;
    res.loss /= count;
    if (grads) {
      const Tensor d_pred = scale(diff, 2.0 / count);
      add("readout.weight", matmul(transpose2d(d_pred), features));
      Tensor db({d_pred.shape()[1]});
      for (std::size_t i = 0; i < d_pred.shape()[0]; ++i)
        for (std::size_t j = 0; j < d_pred.shape()[1]; ++j) db[j] += d_pred.at(i, j);
      add("readout.bias", db);
      d_features = matmul(d_pred, ro.weight);
    }
  }

  if (grads) {
    Gradients g = backward(std::move(fwd.tape), d_features);
    for (const auto& [key, value] : g.params) add(key, value);
  }
  return res;
}

void apply_update(TrainedModel& model, const GradMap& grads, double lr) {
  auto step = [&](Tensor& param, const std::string& key) {
    auto it = grads.find(key);
    if (it == grads.end()) return;
    auto p = param.data();
    auto g = it->second.data();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  auto step_layer = [&](LinearLayer& layer) {
    step(layer.weight, layer.name + ".weight");
    if (layer.bias) step(*layer.bias, layer.name + ".bias");
  };
  for (auto& layer : model.block.layers) step_layer(layer);
  step_layer(model.readout);
}

}  // namespace

double evaluate_loss(const TrainedModel& model, const ToyTask& task,
                     const std::vector<Sample>& samples) {
  double total = 0.0;
  for (const auto& s : samples) total += run_sample(model, task, s, nullptr, 0.0).loss;
  return total / static_cast<double>(samples.size());
}

double evaluate_metric(const TrainedModel& model, const ToyTask& task,
                       const std::vector<Sample>& samples) {
  if (task.kind != TaskKind::Classify) return evaluate_loss(model, task, samples);
  std::size_t correct = 0;
  for (const auto& s : samples) correct += run_sample(model, task, s, nullptr, 0.0).correct;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const ToyTask& task, const TrainOptions& opt) {
  if (opt.steps == 0) throw ConfigError("training needs at least one step");
  if (!(opt.lr >= 0.0) || !std::isfinite(opt.lr)) throw ConfigError("learning rate must be >= 0");
  if (opt.mechanism != Mechanism::External && opt.mechanism != Mechanism::MultiHeadExternal) {
    throw ConfigError("training supports the ea and mea mechanisms only");
  }

  AttentionConfig cfg;
  cfg.mechanism = opt.mechanism;
  cfg.n = task.n;
  cfg.d_in = task.d_in;
  cfg.d = opt.d;
  cfg.s = opt.s;
  cfg.heads = opt.mechanism == Mechanism::MultiHeadExternal ? opt.heads : 1;
  cfg.norm = opt.norm;
  cfg.validate();

  TrainedModel model;
  model.block = make_model(cfg, derive_seed(opt.seed, 1));
  const std::size_t readout_out =
      task.kind == TaskKind::Classify ? task.num_classes : task.d_in;
  model.readout = init_layer(readout_out, cfg.output_width(), derive_seed(opt.seed, 2),
                             /*bias=*/true, "readout");

  const auto train_set = task.train_set();
  const double weight = 1.0 / static_cast<double>(train_set.size());

  TrainLog log;
  log.config = cfg;
  log.task = task.kind;
  log.steps = opt.steps;
  log.lr = opt.lr;
  log.seed = opt.seed;
  log.eval_metric_name = task.kind == TaskKind::Classify ? "accuracy" : "mse";

  for (std::size_t step = 0; step < opt.steps; ++step) {
    GradMap grads;
    double loss = 0.0;
    try {
      for (const auto& s : train_set)
        loss += weight * run_sample(model, task, s, &grads, weight).loss;
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (std::isnan(loss)) throw NumericError("loss became NaN at step " + std::to_string(step));
    log.losses.push_back(loss);

    double norm2 = 0.0;
    for (const auto& [key, g] : grads)
      for (double v : g.data()) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm > opt.clip_norm) {
      for (auto& [key, g] : grads) g = scale(g, opt.clip_norm / norm);
    }
    apply_update(model, grads, opt.lr);
  }

  log.initial_loss = log.losses.front();
  log.final_loss = log.losses.back();
  log.eval_metric = evaluate_metric(model, task, task.eval_set());
  return {std::move(log), std::move(model)};
}

bool training_succeeded(const TrainLog& log) {
  if (log.task == TaskKind::Classify) return log.eval_metric > 0.9;
  return log.final_loss < 0.1 * log.initial_loss;
}

namespace {
std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
}  // namespace

void write_loss_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "step,loss\n";
  for (std::size_t i = 0; i < log.losses.size(); ++i)
    out << i << ',' << format_double(log.losses[i]) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_summary_json(const TrainLog& log, const std::filesystem::path& path) {
  const auto& c = log.config;
  nlohmann::ordered_json config = {
      {"mechanism", to_string(c.mechanism)},
      {"task", to_string(log.task)},
      {"N", c.n},
      {"d_in", c.d_in},
      {"d", c.d},
      {"S", c.s},
      {"H", c.heads},
      {"norm", to_string(c.norm)},
      {"steps", log.steps},
      {"lr", log.lr},
  };
  nlohmann::ordered_json j = {
      {"final_loss", log.final_loss},
      {"initial_loss", log.initial_loss},
      {"eval_metric", log.eval_metric},
      {"eval_metric_name", log.eval_metric_name},
      {"config", config},
      {"seed", log.seed},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace extattn
