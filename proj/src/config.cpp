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

#include "extattn/config.hpp"

#include "extattn/error.hpp"

namespace extattn {

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::SelfAttention: return "sa";
    case Mechanism::SimplifiedSelfAttention: return "ssa";
    case Mechanism::External: return "ea";
    case Mechanism::MultiHeadExternal: return "mea";
  }
  return "?";
}

std::string_view to_string(Normalization n) {
  return n == Normalization::Softmax ? "softmax" : "double";
}

std::optional<Mechanism> parse_mechanism(std::string_view s) {
  if (s == "sa") return Mechanism::SelfAttention;
  if (s == "ssa") return Mechanism::SimplifiedSelfAttention;
  if (s == "ea") return Mechanism::External;
  if (s == "mea") return Mechanism::MultiHeadExternal;
  return std::nullopt;
}

std::optional<Normalization> parse_normalization(std::string_view s) {
  if (s == "softmax") return Normalization::Softmax;
  if (s == "double" || s == "doublenorm") return Normalization::DoubleNorm;
  return std::nullopt;
}

void AttentionConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be >= 1");
  };
  positive(n, "N");
  positive(d, "d");
  switch (mechanism) {
    case Mechanism::SelfAttention:
      positive(d_prime, "d'");
      break;
    case Mechanism::SimplifiedSelfAttention:
      break;
    case Mechanism::External:
      positive(d_in, "d_in");
      positive(s, "S");
      break;
    case Mechanism::MultiHeadExternal:
      positive(d_in, "d_in");
      positive(s, "S");
      positive(heads, "H");
      if (d % heads != 0) {
        throw ConfigError("d = " + std::to_string(d) + " is not divisible by H = " +
                          std::to_string(heads));
      }
      break;
  }
}

std::size_t AttentionConfig::input_width() const {
  switch (mechanism) {
    case Mechanism::External:
    case Mechanism::MultiHeadExternal:
      return d_in;
    default:
      return d;
  }
}

std::size_t AttentionConfig::output_width() const {
  return mechanism == Mechanism::MultiHeadExternal ? d_in : d;
}

std::string describe(const AttentionConfig& cfg) {
  std::string s(to_string(cfg.mechanism));
  s += " N=" + std::to_string(cfg.n) + " d=" + std::to_string(cfg.d);
  switch (cfg.mechanism) {
    case Mechanism::SelfAttention:
      s += " d'=" + std::to_string(cfg.d_prime);
      break;
    case Mechanism::SimplifiedSelfAttention:
      break;
    case Mechanism::MultiHeadExternal:
      s += " H=" + std::to_string(cfg.heads);
      [[fallthrough]];
    case Mechanism::External:
      s += " d_in=" + std::to_string(cfg.d_in) + " S=" + std::to_string(cfg.s) + " norm=" +
           std::string(to_string(cfg.norm));
      break;
  }
  return s;
}

}  // namespace extattn
