#pragma once

// Dense row-major tensors of rank 0..2, double precision throughout.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "headliner/common.hpp"

namespace headliner::ad {

struct Tensor {
  std::vector<std::size_t> shape;  // empty = scalar
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}

  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(numel_of(shape), fill);
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.data[0] = v;
    return t;
  }

  static Tensor vector(std::vector<double> v) {
    Tensor t;
    t.shape = {v.size()};
    t.data = std::move(v);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    if (v.size() != rows * cols) fail("tensor: matrix data size mismatch");
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(v);
    return t;
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const {
    if (i >= shape.size()) fail("tensor: dim %zu of rank-%zu tensor", i, shape.size());
    return shape[i];
  }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
  double item() const {
    if (numel() != 1) fail("tensor: item() on tensor with %zu elements", numel());
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

// index of the largest element; first occurrence wins ties
inline std::size_t argmax(const std::vector<double>& v) {
  if (v.empty()) fail("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace headliner::ad
