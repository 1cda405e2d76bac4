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

#include "extattn/attention_export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

namespace extattn {

MapLayout infer_layout(std::size_t n, std::optional<std::size_t> rows,
                       std::optional<std::size_t> cols) {
  if (rows.has_value() != cols.has_value()) {
    throw ConfigError("--rows and --cols must be given together");
  }
  if (rows) {
    if (*rows == 0 || *cols == 0 || *rows * *cols != n) {
      throw ConfigError("layout " + std::to_string(*rows) + "x" + std::to_string(*cols) +
                        " does not cover N = " + std::to_string(n));
    }
    return {*rows, *cols};
  }
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) {
    throw ConfigError("N = " + std::to_string(n) +
                      " is not a perfect square; give --rows and --cols");
  }
  return {side, side};
}

std::vector<std::uint8_t> to_grayscale(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = (values[i] - *lo) / range;
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const MapLayout& layout,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != layout.rows * layout.cols) {
    throw DimensionError("write_pgm: pixel count does not match layout");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << layout.cols << ' ' << layout.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

AttentionDump dump_attention_maps(const AttentionModel& model, const Tensor& input,
                                  const MapLayout& layout, const std::filesystem::path& out_dir) {
  Tensor sample = input;
  if (sample.rank() == 3) {
    if (sample.shape()[0] != 1) {
      throw DimensionError("dump_attention_maps: expected a single sample, got batch of " +
                           std::to_string(sample.shape()[0]));
    }
    sample = std::move(sample).reshape({sample.shape()[1], sample.shape()[2]});
  }
  detail::require_rank(sample.shape(), 2, "dump_attention_maps");
  const std::size_t n = sample.shape()[0];
  if (layout.rows * layout.cols != n) {
    throw ConfigError("layout " + std::to_string(layout.rows) + "x" +
                      std::to_string(layout.cols) + " does not cover N = " + std::to_string(n));
  }

  const Tensor attn = forward(model, sample, /*record=*/false).attn;
  // View every mechanism's map as (heads, N, maps) with pixels along axis 1.
  std::size_t heads = 1, maps = 0;
  Tensor view;
  switch (model.config.mechanism) {
    case Mechanism::SelfAttention:
    case Mechanism::SimplifiedSelfAttention:
      // Row i of A is query pixel i's map; transpose so pixels run down axis 1.
      maps = n;
      view = transpose2d(attn).reshape({1, n, n});
      break;
    case Mechanism::External:
      maps = attn.shape()[1];
      view = attn.reshape({1, n, maps});
      break;
    case Mechanism::MultiHeadExternal:
      heads = attn.shape()[1];
      maps = attn.shape()[3];
      view = attn.reshape({heads, n, maps});
      break;
  }

  std::filesystem::create_directories(out_dir);
  AttentionDump dump;
  dump.csv = out_dir / "attn.csv";
  std::ofstream csv(dump.csv, std::ios::binary);
  if (!csv) throw IoError("cannot open '" + dump.csv.string() + "' for writing");
  csv << "h,s,pixel,value\n";

  std::vector<double> values(n);
  char buf[64];
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t s = 0; s < maps; ++s) {
      for (std::size_t p = 0; p < n; ++p) {
        values[p] = view.at(h, p, s);
        auto res = std::to_chars(buf, buf + sizeof(buf), values[p]);
        csv << h << ',' << s << ',' << p << ',';
        csv.write(buf, res.ptr - buf);
        csv << '\n';
      }
      auto path = out_dir / ("attn_h" + std::to_string(h) + "_s" + std::to_string(s) + ".pgm");
      write_pgm(path, layout, to_grayscale(values));
      dump.images.push_back(std::move(path));
    }
  }
  if (!csv) throw IoError("write to '" + dump.csv.string() + "' failed");
  return dump;
}

}  // namespace extattn
