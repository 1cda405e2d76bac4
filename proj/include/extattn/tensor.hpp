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

// Dense row-major tensors and the handful of numeric kernels the attention
// mechanisms are built from.
//
// All kernels reduce in a fixed order (ascending index along the reduced
// axis), so results are bit-reproducible across runs. The core uses
// Tensor (double); TensorF (float) exists for the benchmark only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "extattn/error.hpp"

namespace extattn {

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  /// An empty placeholder (rank 0, no data). Every real tensor has rank >= 1.
  BasicTensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_numel(shape_), T{0});
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_to_string(shape_));
    }
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor full(Shape shape, T value) {
    BasicTensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static BasicTensor identity(std::size_t n) {
    BasicTensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = T{1};
    return t;
  }

  /// Builds a 2-D tensor from nested rows; all rows must have equal length.
  static BasicTensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("from_rows: ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicTensor({r, c}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_to_string(shape_));
    }
    return shape_[axis];
  }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  T operator[](std::size_t flat) const { return data_[flat]; }
  T& operator[](std::size_t flat) { return data_[flat]; }

  T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  T at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same data, new shape. Element counts must agree.
  BasicTensor reshape(Shape shape) const& {
    check_reshape(shape);
    return BasicTensor(std::move(shape), data_);
  }
  BasicTensor reshape(Shape shape) && {
    check_reshape(shape);
    return BasicTensor(std::move(shape), std::move(data_));
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor rank must be at least 1");
    for (std::size_t e : shape_) {
      if (e == 0) {
        throw DimensionError("tensor extents must be >= 1, got " + shape_to_string(shape_));
      }
    }
  }

  void check_reshape(const Shape& shape) const {
    if (shape_numel(shape) != data_.size() || shape.empty()) {
      throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                           shape_to_string(shape));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

namespace detail {

inline void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_to_string(shape));
  }
}

// Decomposes a shape around `axis` into (outer, length, inner) so that the
// element (o, k, i) lives at o * length * inner + k * inner + i.
struct AxisSplit {
  std::size_t outer;
  std::size_t length;
  std::size_t inner;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

/// Standard matrix product a[m x k] * b[k x n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  BasicTensor<T> c({m, n});
  auto cd = c.data();
  auto ad = a.data();
  auto bd = b.data();
  // i-k-j order: each output element still accumulates over k in ascending
  // order, starting from zero.
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = cd.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ad[i * k + p];
      const T* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

/// a[m x k] * b[n x k]^T without materializing the transpose.
template <typename T>
BasicTensor<T> matmul_transposed(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1]) {
    throw DimensionError("matmul_transposed: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  BasicTensor<T> c({m, n});
  auto cd = c.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = ad.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = bd.data() + j * k;
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      cd[i * n + j] = s;
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> transpose2d(const BasicTensor<T>& x) {
  detail::require_rank(x.shape(), 2, "transpose2d");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  BasicTensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  return x.reshape(std::move(shape));
}

/// General axis permutation: output axis i is input axis axes[i].
template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  std::vector<bool> seen(rank, false);
  if (axes.size() != rank) {
    throw DimensionError("permute: axis list length does not match shape " +
                         shape_to_string(x.shape()));
  }
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) {
      throw DimensionError("permute: invalid axis list for shape " + shape_to_string(x.shape()));
    }
    seen[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.shape()[axes[i]];

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.shape()[i];

  BasicTensor<T> out(out_shape);
  auto od = out.data();
  auto xd = x.data();
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < od.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[axes[i]];
    od[flat] = xd[src];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

/// Concatenates along the last axis; every other extent must agree.
template <typename T>
BasicTensor<T> concat_last_axis(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_last_axis: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t rank = first.size();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != rank || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat_last_axis: shape " + shape_to_string(s) +
                           " incompatible with " + shape_to_string(first));
    }
    total += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  BasicTensor<T> out(out_shape);
  const std::size_t rows = out.numel() / total;
  auto od = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape().back();
    auto pd = p.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pd.begin() + r * w, w, od.begin() + r * total + offset);
    offset += w;
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_last_axis(const std::vector<BasicTensor<T>>& parts) {
  return concat_last_axis(std::span<const BasicTensor<T>>(parts));
}

/// Copy of x[i, ...] (rank drops by one; a rank-1 input yields shape (1)).
template <typename T>
BasicTensor<T> slice_leading(const BasicTensor<T>& x, std::size_t i) {
  if (x.empty() || i >= x.shape()[0]) {
    throw DimensionError("slice_leading: index " + std::to_string(i) + " out of range for " +
                         shape_to_string(x.shape()));
  }
  Shape rest(x.shape().begin() + 1, x.shape().end());
  if (rest.empty()) rest = {1};
  const std::size_t n = shape_numel(rest);
  auto xd = x.data();
  return BasicTensor<T>(rest, std::vector<T>(xd.begin() + i * n, xd.begin() + (i + 1) * n));
}

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  Shape shape = parts[0].shape();
  std::vector<T> data;
  data.reserve(parts.size() * parts[0].numel());
  for (const auto& p : parts) {
    if (p.shape() != shape) {
      throw DimensionError("stack: shape " + shape_to_string(p.shape()) + " differs from " +
                           shape_to_string(shape));
    }
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape.insert(shape.begin(), parts.size());
  return BasicTensor<T>(std::move(shape), std::move(data));
}

/// Throws NumericError if any element is NaN (or, with allow_inf false, infinite).
template <typename T>
void check_finite(const BasicTensor<T>& x, const std::string& what, bool allow_inf = false) {
  auto d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::isnan(d[i]) || (!allow_inf && std::isinf(d[i]))) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

/// Numerically stable softmax along `axis` (max-subtracted).
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
  const auto s = detail::split_axis(x.shape(), axis, "softmax");
  check_finite(x, "softmax input", /*allow_inf=*/true);
  BasicTensor<T> out(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.length; ++k) mx = std::max(mx, xd[base + k * s.inner]);
      T sum{0};
      for (std::size_t k = 0; k < s.length; ++k) {
        const T e = std::exp(xd[base + k * s.inner] - mx);
        od[base + k * s.inner] = e;
        sum += e;
      }
      for (std::size_t k = 0; k < s.length; ++k) od[base + k * s.inner] /= sum;
    }
  }
  return out;
}

inline constexpr double kDefaultL1Eps = 1e-9;

/// Guard for the L1 step of double normalization. It only prevents 0/0, so
/// rows of strictly positive input sum to one up to rounding.
template <typename T>
constexpr T double_norm_eps() {
  return std::numeric_limits<T>::min();
}

/// x / (sum |x| along axis + eps).
template <typename T>
BasicTensor<T> l1_normalize(const BasicTensor<T>& x, std::size_t axis,
                            T eps = static_cast<T>(kDefaultL1Eps)) {
  const auto s = detail::split_axis(x.shape(), axis, "l1_normalize");
  BasicTensor<T> out(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.length * s.inner + i;
      T sum{0};
      for (std::size_t k = 0; k < s.length; ++k) sum += std::abs(xd[base + k * s.inner]);
      const T denom = sum + eps;
      for (std::size_t k = 0; k < s.length; ++k)
        od[base + k * s.inner] = xd[base + k * s.inner] / denom;
    }
  }
  return out;
}

// Elementwise helpers. Shapes must match exactly; no broadcasting.

namespace detail {
template <typename T, typename F>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, F f) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  BasicTensor<T> out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = f(ad[i], bd[i]);
  return out;
}
}  // namespace detail

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "add", std::plus<T>());
}

template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "subtract", std::minus<T>());
}

template <typename T>
BasicTensor<T> hadamard(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "hadamard", std::multiplies<T>());
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  BasicTensor<T> out = x;
  for (T& v : out.data()) v *= factor;
  return out;
}

template <typename T>
T sum(const BasicTensor<T>& x) {
  T s{0};
  for (T v : x.data()) s += v;
  return s;
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  T m{0};
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

}  // namespace extattn
