// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcml {

/// Deterministic generator used across the toolkit.
using Rng = std::mt19937_64;

/// Dense vector of 64-bit reals.
using Vec = std::vector<double>;

/// Dense row-major matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sub: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec scale(const Vec& v, double s) {
  Vec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] * s;
  return r;
}

/// r += s * v
inline void axpy(Vec& r, double s, const Vec& v) {
  if (r.size() != v.size()) throw std::invalid_argument("axpy: size mismatch");
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += s * v[i];
}

/// y = W x + b
inline Vec affine(const Mat& w, const Vec& x, const Vec& b) {
  if (w.cols != x.size() || w.rows != b.size())
    throw std::invalid_argument("affine: shape mismatch");
  Vec y(b);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double s = 0.0;
    const double* row = &w.data[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
  return y;
}

/// Wᵀ g, the input gradient of an affine layer.
inline Vec affine_backward_input(const Mat& w, const Vec& g) {
  if (w.rows != g.size()) throw std::invalid_argument("affine_backward_input: shape mismatch");
  Vec r(w.cols, 0.0);
  for (std::size_t row = 0; row < w.rows; ++row) {
    const double gi = g[row];
    const double* wrow = &w.data[row * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) r[c] += wrow[c] * gi;
  }
  return r;
}

/// wgrad += g ⊗ x
inline void accumulate_outer(Mat& wgrad, const Vec& g, const Vec& x) {
  if (wgrad.rows != g.size() || wgrad.cols != x.size())
    throw std::invalid_argument("accumulate_outer: shape mismatch");
  for (std::size_t r = 0; r < wgrad.rows; ++r) {
    double* row = &wgrad.data[r * wgrad.cols];
    const double gi = g[r];
    for (std::size_t c = 0; c < wgrad.cols; ++c) row[c] += gi * x[c];
  }
}

/// Scales v to unit Euclidean norm. A zero vector has no direction and is rejected.
inline Vec l2_normalize(const Vec& v) {
  const double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("l2_normalize: zero vector");
  return scale(v, 1.0 / n);
}

/// Jᵀg for the normalization map, J = (I − ŷŷᵀ)/||v||.
inline Vec l2_normalize_backward(const Vec& v, const Vec& upstream) {
  const double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("l2_normalize_backward: zero vector");
  if (v.size() != upstream.size())
    throw std::invalid_argument("l2_normalize_backward: size mismatch");
  const Vec y = scale(v, 1.0 / n);
  const double proj = dot(y, upstream);
  Vec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = (upstream[i] - proj * y[i]) / n;
  return r;
}

/// Max-subtracted softmax.
inline Vec softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

}  // namespace hcml
