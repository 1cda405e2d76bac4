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

#include "extattn/layers.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "extattn/random.hpp"

namespace extattn {

void LinearLayer::validate() const {
  if (weight.rank() != 2) {
    throw DimensionError("layer '" + name + "': weight must be 2-D, got " +
                         shape_to_string(weight.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->shape()[0] != weight.shape()[0])) {
    throw DimensionError("layer '" + name + "': bias shape " + shape_to_string(bias->shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
  }
}

LinearLayer init_layer(std::size_t out, std::size_t in, std::uint64_t seed, bool bias,
                       std::string name) {
  if (out == 0 || in == 0) throw DimensionError("init_layer: extents must be >= 1");
  Rng rng(seed);
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  Tensor w({out, in});
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  LinearLayer layer{std::move(name), std::move(w), std::nullopt};
  if (bias) layer.bias = Tensor::zeros({out});
  return layer;
}

LinearLayer make_layer(std::string name, Tensor weight, std::optional<Tensor> bias) {
  LinearLayer layer{std::move(name), std::move(weight), std::move(bias)};
  layer.validate();
  return layer;
}

Tensor apply_linear(const LinearLayer& layer, const Tensor& x) {
  layer.validate();
  const std::size_t in = layer.in_features();
  const std::size_t out = layer.out_features();
  if (x.empty() || x.shape().back() != in) {
    throw DimensionError("apply_linear '" + layer.name + "': input shape " +
                         shape_to_string(x.shape()) + " does not end in " + std::to_string(in));
  }
  const std::size_t rows = x.numel() / in;
  Tensor y = matmul_transposed(x.reshape({rows, in}), layer.weight);
  if (layer.bias) {
    auto yd = y.data();
    auto bd = layer.bias->data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out; ++j) yd[r * out + j] += bd[j];
  }
  Shape shape = x.shape();
  shape.back() = out;
  return std::move(y).reshape(std::move(shape));
}

namespace {

constexpr char kMagic[4] = {'E', 'A', 'N', 'W'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  }

  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw IoError("write to '" + path.string() + "' failed");
  }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, n);
  }

  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path_ + "' for reading");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw TruncatedFileError("'" + path_ + "' truncated while reading " + what);
    }
  }

  std::uint64_t le(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(le(8, what)); }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_tensors(std::span<const NamedTensor> tensors, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t e : t.value.shape()) w.u64(e);
    for (double v : t.value.data()) w.f64(v);
  }
  w.finish(path);
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  Reader r(path);
  if (r.remaining() < 4 || r.bytes(4, "magic") != std::string(kMagic, 4)) {
    throw BadMagicError("'" + r.path() + "' is not a weight file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion) {
    throw VersionMismatchError("'" + r.path() + "' has format version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kWeightFormatVersion));
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32("name length");
    std::string name = r.bytes(name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0) throw IoError("'" + r.path() + "': tensor '" + name + "' has rank 0");
    r.need(static_cast<std::size_t>(rank) * 8, "extents");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = r.u64("extent");
      if (e == 0) throw IoError("'" + r.path() + "': tensor '" + name + "' has a zero extent");
      // Anything larger than the remaining bytes cannot be complete.
      if (numel > r.remaining() / e) {
        throw TruncatedFileError("'" + r.path() + "' truncated in tensor '" + name + "'");
      }
      numel *= e;
    }
    if (numel > r.remaining() / 8) {
      throw TruncatedFileError("'" + r.path() + "' truncated in tensor '" + name + "'");
    }
    std::vector<double> data(numel);
    for (double& v : data) v = r.f64("tensor data");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (r.remaining() != 0) {
    throw IoError("'" + r.path() + "' has " + std::to_string(r.remaining()) +
                  " trailing bytes");
  }
  return out;
}

void save_weights(std::span<const LinearLayer> layers, const std::filesystem::path& path) {
  std::vector<NamedTensor> tensors;
  for (const auto& l : layers) {
    l.validate();
    tensors.push_back({l.name + ".weight", l.weight});
    if (l.bias) tensors.push_back({l.name + ".bias", *l.bias});
  }
  save_tensors(tensors, path);
}

std::vector<LinearLayer> load_weights(const std::filesystem::path& path) {
  auto strip = [](const std::string& s, const std::string& suffix) -> std::optional<std::string> {
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
      return s.substr(0, s.size() - suffix.size());
    return std::nullopt;
  };

  std::vector<LinearLayer> layers;
  for (auto& t : load_tensors(path)) {
    if (auto base = strip(t.name, ".bias")) {
      auto it = std::find_if(layers.begin(), layers.end(),
                             [&](const LinearLayer& l) { return l.name == *base; });
      if (it == layers.end() || it->bias) {
        throw IoError("'" + path.string() + "': bias '" + t.name + "' has no matching weight");
      }
      it->bias = std::move(t.value);
      it->validate();
      continue;
    }
    std::string name = strip(t.name, ".weight").value_or(t.name);
    if (t.value.rank() != 2) {
      throw DimensionError("'" + path.string() + "': weight '" + t.name + "' is not 2-D");
    }
    layers.push_back({std::move(name), std::move(t.value), std::nullopt});
  }
  return layers;
}

}  // namespace extattn
