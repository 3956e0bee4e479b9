//
// Copyright 2026 The dpaccel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Small dense linear algebra: vectors as std::vector<double>, a row-major
// matrix, symmetric eigenvalues (closed form for 3x3, cyclic Jacobi for the
// general case), power iteration and Cholesky solves.

#ifndef DPACCEL_LINALG_HPP_
#define DPACCEL_LINALG_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "dpaccel/errors.hpp"

namespace dpaccel {

using Vector = std::vector<double>;
using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

// y += a * x
inline void Axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double Norm2(std::span<const double> x) { return std::sqrt(Dot(x, x)); }

inline double Norm1(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += std::abs(v);
  return sum;
}

inline Vector Subtract(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix Identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix Diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  static Matrix FromRows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < m.rows_; ++i) {
      internal::Require(rows[i].size() == m.cols_, "Matrix: ragged rows");
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  void MultiplyInto(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) out[i] = Dot(row(i), x);
  }

  Vector operator*(std::span<const double> x) const {
    Vector out(rows_);
    MultiplyInto(x, out);
    return out;
  }

  bool IsSymmetric(double tol = 0.0) const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
inline Vector JacobiEigenvalues(Matrix a, double tol = 1e-14,
                                int max_sweeps = 100) {
  internal::Require(a.rows() == a.cols(), "JacobiEigenvalues: not square");
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        scale += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * scale || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  std::sort(values.begin(), values.end());
  return values;
}

// Ascending eigenvalues of a symmetric 3x3 matrix. Uses the trigonometric
// closed form of the characteristic cubic and falls back to Jacobi when the
// cubic's discriminant is too small relative to the matrix scale for the
// closed form to resolve the spectrum.
inline std::array<double, 3> SymmetricEigenvalues3(const Mat3& m) {
  const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
  const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
  const double d0 = m[0][0] - q, d1 = m[1][1] - q, d2 = m[2][2] - q;
  const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
  if (p2 == 0.0) return {q, q, q};
  const double p = std::sqrt(p2 / 6.0);
  const double scale = std::max(std::abs(q), p);

  Mat3 b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
  const double det_b =
      b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
      b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
      b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = det_b / 2.0;

  // r near +-1 means a (near) repeated root, where acos loses accuracy.
  if (p < 1e-14 * scale || 1.0 - std::abs(r) < 1e-10) {
    Matrix a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = m[i][j];
    const Vector v = JacobiEigenvalues(a);
    return {v[0], v[1], v[2]};
  }
  const double phi = std::acos(std::clamp(r, -1.0, 1.0)) / 3.0;
  const double largest = q + 2.0 * p * std::cos(phi);
  const double smallest =
      q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double middle = 3.0 * q - largest - smallest;
  return {smallest, middle, largest};
}

// Largest eigenvalue of a symmetric positive semi-definite matrix. Stops when
// successive Rayleigh quotients agree to `rel_tol`.
inline double PowerIterationTop(const Matrix& a, double rel_tol = 1e-8,
                                int max_iter = 100000) {
  internal::Require(a.rows() == a.cols() && a.rows() > 0,
                    "PowerIterationTop: need a non-empty square matrix");
  const std::size_t n = a.rows();
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  double norm = Norm2(v);
  for (double& e : v) e /= norm;
  Vector w(n);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    a.MultiplyInto(v, w);
    const double next = Dot(v, w);
    norm = Norm2(w);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next))
      return next;
    lambda = next;
  }
  throw NumericError("PowerIterationTop: no convergence");
}

// Solves a x = b for symmetric positive definite a.
inline Vector CholeskySolve(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  internal::Require(a.cols() == n && b.size() == n,
                    "CholeskySolve: dimension mismatch");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag <= 0.0) throw NumericError("CholeskySolve: not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

// Neumaier-compensated running sum; used wherever privacy leaks accumulate.
class CompensatedSum {
 public:
  void Add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      carry_ += (sum_ - t) + v;
    else
      carry_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace dpaccel

#endif  // DPACCEL_LINALG_HPP_
