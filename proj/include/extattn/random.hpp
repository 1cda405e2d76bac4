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

#include <cstdint>
#include <random>

namespace extattn {

/// Deterministic generator used for every random draw in the library.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Conversions to real values are done here rather than with
/// the <random> distributions, whose algorithms are implementation-defined:
///   uniform() = (bits >> 11) * 2^-53, a value in [0, 1)
///   normal()  = Box-Muller on two uniform() draws (no cached second value)
/// so weight initialization is bit-identical on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform integer in [0, n), by rejection sampling.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed and a stream index into an independent seed
/// (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace extattn
