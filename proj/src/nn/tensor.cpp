// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "srgdiff/error.hpp"

namespace srgdiff::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_))
    throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = stddev * rng.normal();
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0])
    throw RangeError("row slice out of range for " + to_string(shape_));
  const std::size_t row = shape_[0] ? data_.size() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * row,
                                                  data_.begin() + end * row));
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_)
    throw ShapeError("add: " + to_string(shape_) + " vs " + to_string(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor r = a;
  r += b;
  return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("sub: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Tensor operator*(const Tensor& a, double s) {
  Tensor r = a;
  r *= s;
  return r;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("compare: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  Shape s = items.front().shape();
  std::vector<double> data;
  data.reserve(items.size() * items.front().size());
  for (const Tensor& t : items) {
    if (t.shape() != s)
      throw ShapeError("stack: " + to_string(t.shape()) + " vs " + to_string(s));
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  s.insert(s.begin(), items.size());
  return Tensor(std::move(s), std::move(data));
}

Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  if (t.rank() == 0) throw ShapeError("take_rows on a rank-0 tensor");
  Shape shape = t.shape();
  const std::size_t row = shape[0] == 0 ? 0 : t.size() / shape[0];
  Tensor out([&] {
    shape[0] = rows.size();
    return shape;
  }());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) throw RangeError("row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(t.data() + rows[i] * row, row, out.data() + i * row);
  }
  return out;
}

}  // namespace srgdiff::nn
