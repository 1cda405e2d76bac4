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

// Synthetic tasks and a plain-SGD training loop for an attention block
// followed by a linear read-out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "extattn/attention.hpp"
#include "extattn/config.hpp"
#include "extattn/layers.hpp"
#include "extattn/tensor.hpp"

namespace extattn {

enum class TaskKind { Copy, Denoise, Classify };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view s);

struct Sample {
  Tensor input;   // [N x d_in]
  Tensor target;  // [N x d_in] for copy/denoise; empty for classify
  std::size_t label = 0;
};

/// copy:     input tokens ~ N(0, 1), target = input
/// denoise:  target ~ N(0, 1), input = target + N(0, noise_sigma^2)
/// classify: tokens = prototype[c] + N(0, 1); the label is the prototype
///           with the largest inner product with the mean token. Prototypes
///           are orthonormal, so num_classes <= d_in.
///
/// Training samples are indices [0, train_size); evaluation samples use a
/// disjoint index range, so the two never share a generator stream.
struct ToyTask {
  TaskKind kind = TaskKind::Copy;
  std::uint64_t seed = 0;
  std::size_t n = 64;
  std::size_t d_in = 1;
  std::size_t num_classes = 4;
  double noise_sigma = 0.1;
  std::size_t train_size = 32;
  std::size_t eval_size = 64;
  Tensor prototypes;  // [num_classes x d_in], orthonormal rows; classify only

  Sample sample(std::uint64_t index) const;
  Sample eval_sample(std::uint64_t index) const;
  std::vector<Sample> train_set() const;
  std::vector<Sample> eval_set() const;
};

// Defaults describe a single-channel 8x8 image. With a mean-reduced MSE,
// each extra input channel divides the per-channel gradient, so wide tokens
// leave plain SGD on its initial plateau for far longer.
struct TaskOptions {
  std::size_t n = 64;
  std::size_t d_in = 1;
  std::size_t num_classes = 4;
  double noise_sigma = 0.1;
  std::size_t train_size = 32;
  std::size_t eval_size = 64;
};

/// Copy and denoise use the struct defaults. Classify uses N = 16 tokens of
/// width 4, four classes, 128 training and 256 evaluation samples.
TaskOptions default_task_options(TaskKind kind);

ToyTask make_task(TaskKind kind, std::uint64_t seed, const TaskOptions& options);
ToyTask make_task(TaskKind kind, std::uint64_t seed);
/// Throws ConfigError for an unknown kind name.
ToyTask make_task(std::string_view kind, std::uint64_t seed, const TaskOptions& options);
ToyTask make_task(std::string_view kind, std::uint64_t seed);

struct TrainOptions {
  Mechanism mechanism = Mechanism::External;
  std::size_t d = 8;
  std::size_t s = 16;
  std::size_t heads = 2;
  Normalization norm = Normalization::DoubleNorm;
  std::size_t steps = 500;
  double lr = 0.05;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
};

/// Classify switches to row-softmax normalization and lr = 0.3. Double
/// normalization is exactly invariant to a vector added to every token,
/// which erases the mean token that defines the class.
TrainOptions default_train_options(TaskKind kind);

struct TrainLog {
  std::vector<double> losses;  // one per step, measured before that step's update
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double eval_metric = 0.0;  // held-out MSE, or accuracy for classify
  std::string eval_metric_name;
  AttentionConfig config;
  TaskKind task = TaskKind::Copy;
  std::size_t steps = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
};

/// An attention block plus the read-out layer trained on top of it.
struct TrainedModel {
  AttentionModel block;
  LinearLayer readout;

  std::vector<LinearLayer> layers() const;
};

struct TrainResult {
  TrainLog log;
  TrainedModel model;
};

/// Full-batch SGD on the task's training set (MSE for copy/denoise, softmax
/// cross-entropy on mean-pooled features for classify), with the gradient
/// clipped to a global L2 norm of clip_norm. Only EA and MEA blocks are
/// supported. Throws NumericError naming the step if the loss turns NaN.
TrainResult train(const ToyTask& task, const TrainOptions& options);

/// Loss and metric of a model on a sample set, without updating it.
double evaluate_loss(const TrainedModel& model, const ToyTask& task,
                     const std::vector<Sample>& samples);
double evaluate_metric(const TrainedModel& model, const ToyTask& task,
                       const std::vector<Sample>& samples);

/// Final loss below 10% of the initial loss (copy, denoise) or eval accuracy
/// above 0.9 (classify).
bool training_succeeded(const TrainLog& log);

void write_loss_csv(const TrainLog& log, const std::filesystem::path& path);
void write_summary_json(const TrainLog& log, const std::filesystem::path& path);

}  // namespace extattn
