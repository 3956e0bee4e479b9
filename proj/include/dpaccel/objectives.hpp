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

#ifndef DPACCEL_OBJECTIVES_HPP_
#define DPACCEL_OBJECTIVES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"
#include "dpaccel/rng.hpp"

namespace dpaccel {

// Finite-sum objective F(x) = (1/n) sum_i f(x; y_i) that is mu-strongly
// convex and L-smooth, with a state-independent bound S1 on the L1 distance
// between any two per-datum gradients.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t size() const = 0;
  virtual double mu() const = 0;
  virtual double L() const = 0;
  virtual double sensitivity() const = 0;

  virtual double Value(std::span<const double> x) const = 0;

  // Gradient of f(.; y_i) at x.
  virtual void DatumGradient(std::size_t i, std::span<const double> x,
                             std::span<double> out) const = 0;

  // Mean of per-datum gradients over `batch`.
  virtual void BatchGradient(std::span<const double> x,
                             std::span<const std::size_t> batch,
                             std::span<double> out) const {
    Vector scratch(dim());
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i : batch) {
      DatumGradient(i, x, scratch);
      Axpy(1.0, scratch, out);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : out) v *= inv;
  }

  // Exact mean over all n data.
  virtual void Gradient(std::span<const double> x,
                        std::span<double> out) const {
    std::vector<std::size_t> all(size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    BatchGradient(x, all, out);
  }
};

inline Vector FullGradient(const Objective& obj, std::span<const double> x) {
  Vector out(obj.dim());
  obj.Gradient(x, out);
  return out;
}

inline Vector MinibatchGradient(const Objective& obj, std::span<const double> x,
                                std::span<const std::size_t> batch) {
  internal::Require(!batch.empty() && batch.size() <= obj.size(),
                    "MinibatchGradient: batch size must be in [1, n]");
  Vector out(obj.dim());
  if (batch.size() == obj.size())
    obj.Gradient(x, out);
  else
    obj.BatchGradient(x, batch, out);
  return out;
}

inline double SensitivityBound(const Objective& obj) {
  return obj.sensitivity();
}

// Draws m-of-n index sets uniformly without replacement by a partial
// Fisher-Yates shuffle over a persistent permutation (O(m) per draw). Draws
// for m == n return all indices and consume no randomness.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t m) : m_(m), perm_(n) {
    internal::Require(m >= 1 && m <= n, "BatchSampler: need 1 <= m <= n");
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  std::size_t n() const { return perm_.size(); }
  std::size_t m() const { return m_; }
  bool full() const { return m_ == perm_.size(); }

  std::span<const std::size_t> Draw(RngStream& rng) {
    if (!full()) {
      const std::size_t n = perm_.size();
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t j = i + rng.UniformIndex(n - i);
        std::swap(perm_[i], perm_[j]);
      }
    }
    return {perm_.data(), m_};
  }

 private:
  std::size_t m_;
  std::vector<std::size_t> perm_;
};

// f(x; i) = 1/2 x'Qx + a_i'x + b, so F(x) = 1/2 x'Qx + a'x + b with a the
// mean of the a_i. A single term reproduces the plain quadratic.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Matrix q, Vector a, double b = 0.0,
                     double sensitivity = 0.0)
      : QuadraticObjective(std::move(q), std::vector<Vector>{std::move(a)}, b,
                           sensitivity) {}

  QuadraticObjective(Matrix q, std::vector<Vector> terms, double b,
                     double sensitivity)
      : q_(std::move(q)), terms_(std::move(terms)), b_(b),
        sensitivity_(sensitivity) {
    internal::Require(!terms_.empty(), "QuadraticObjective: no data terms");
    internal::Require(q_.rows() == q_.cols() && q_.IsSymmetric(1e-12),
                      "QuadraticObjective: Q must be square symmetric");
    internal::Require(sensitivity >= 0.0,
                      "QuadraticObjective: sensitivity must be >= 0");
    const std::size_t d = q_.rows();
    a_.assign(d, 0.0);
    for (const Vector& t : terms_) {
      internal::Require(t.size() == d, "QuadraticObjective: term dimension");
      Axpy(1.0 / static_cast<double>(terms_.size()), t, a_);
    }
    eigenvalues_ = JacobiEigenvalues(q_);
    internal::Require(eigenvalues_.front() > 0.0,
                      "QuadraticObjective: Q must be positive definite");
  }

  std::size_t dim() const override { return q_.rows(); }
  std::size_t size() const override { return terms_.size(); }
  double mu() const override { return eigenvalues_.front(); }
  double L() const override { return eigenvalues_.back(); }
  double sensitivity() const override { return sensitivity_; }

  const Matrix& q() const { return q_; }
  const Vector& a() const { return a_; }
  const Vector& eigenvalues() const { return eigenvalues_; }

  Vector Minimizer() const {
    Vector x = CholeskySolve(q_, a_);
    for (double& v : x) v = -v;
    return x;
  }

  double Value(std::span<const double> x) const override {
    const Vector qx = q_ * x;
    return 0.5 * Dot(x, qx) + Dot(a_, x) + b_;
  }

  // F(x) - F(x*) = 1/2 (x - x*)'Q(x - x*), free of cancellation.
  double Suboptimality(std::span<const double> x) const {
    const Vector e = Subtract(x, Minimizer());
    return 0.5 * Dot(e, q_ * e);
  }

  void DatumGradient(std::size_t i, std::span<const double> x,
                     std::span<double> out) const override {
    q_.MultiplyInto(x, out);
    Axpy(1.0, terms_[i], out);
  }

  void Gradient(std::span<const double> x,
                std::span<double> out) const override {
    q_.MultiplyInto(x, out);
    Axpy(1.0, a_, out);
  }

 private:
  Matrix q_;
  std::vector<Vector> terms_;
  Vector a_;
  double b_;
  double sensitivity_;
  Vector eigenvalues_;
};

// Labelled covariates y_i = (u_i, z_i), z_i in {-1, +1}, every ||u_i||_1 <=
// u_max. U is stored row-major, one record per row.
struct Dataset {
  std::size_t d = 0;
  std::size_t n = 0;
  std::vector<double> covariates;
  std::vector<double> labels;
  double u_max = 0.0;
  std::uint64_t seed = 0;
  Vector true_parameter;

  std::span<const double> row(std::size_t i) const {
    return {covariates.data() + i * d, d};
  }
};

// Covariates have i.i.d. uniform(-1, 1) entries rescaled to an L1 norm of
// u_max * beta_i with beta_i ~ uniform(0.5, 1). The true parameter has
// uniform(-1, 1) entries normalized to unit Euclidean norm, and each label is
// +1 with the logistic probability of u_i'x_true.
inline Dataset GenerateSynthetic(std::size_t d, std::size_t n, double u_max,
                                 std::uint64_t seed) {
  internal::Require(d >= 1 && n >= 1, "GenerateSynthetic: need d, n >= 1");
  internal::Require(u_max > 0.0, "GenerateSynthetic: u_max must be > 0");
  RngStream rng(seed);
  Dataset data;
  data.d = d;
  data.n = n;
  data.u_max = u_max;
  data.seed = seed;
  data.true_parameter.resize(d);
  for (double& v : data.true_parameter) v = rng.Uniform(-1.0, 1.0);
  const double norm = Norm2(data.true_parameter);
  for (double& v : data.true_parameter) v /= norm;

  data.covariates.resize(n * d);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> u(data.covariates.data() + i * d, d);
    for (double& v : u) v = rng.Uniform(-1.0, 1.0);
    const double target = u_max * rng.Uniform(0.5, 1.0);
    const double l1 = Norm1(u);
    for (double& v : u) v *= target / l1;
    const double p = 1.0 / (1.0 + std::exp(-Dot(u, data.true_parameter)));
    data.labels[i] = rng.Uniform01() < p ? 1.0 : -1.0;
  }
  return data;
}

// CSV with header z,u_1,...,u_d; values printed round-trip exact.
inline void WriteDatasetCsv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << "z";
  for (std::size_t j = 1; j <= data.d; ++j) out << ",u_" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < data.n; ++i) {
    out << static_cast<int>(data.labels[i]);
    for (double v : data.row(i)) out << ',' << v;
    out << '\n';
  }
}

inline nlohmann::json DatasetMetadata(const Dataset& data) {
  return {{"d", data.d},
          {"n", data.n},
          {"seed", data.seed},
          {"u_max", data.u_max},
          {"true_parameter", data.true_parameter}};
}

inline void WriteDatasetMetadata(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << DatasetMetadata(data).dump(2) << '\n';
}

// Reads a dataset CSV. u_max comes from the sidecar when given, otherwise
// from the largest observed L1 norm.
inline Dataset ReadDatasetCsv(const std::string& path,
                              const std::string& metadata_path = "") {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::string line;
  std::getline(in, line);
  Dataset data;
  data.d = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  internal::Require(line.rfind("z,", 0) == 0 && data.d >= 1,
                    "dataset csv: expected header z,u_1,...,u_d");
  double observed_max = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const double z = std::stod(cell);
    internal::Require(z == 1.0 || z == -1.0, "dataset csv: labels must be +-1");
    data.labels.push_back(z);
    std::size_t cols = 0;
    double l1 = 0.0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      data.covariates.push_back(v);
      l1 += std::abs(v);
      ++cols;
    }
    internal::Require(cols == data.d, "dataset csv: ragged row");
    observed_max = std::max(observed_max, l1);
  }
  data.n = data.labels.size();
  internal::Require(data.n >= 1, "dataset csv: no records");
  data.u_max = observed_max;
  if (!metadata_path.empty()) {
    std::ifstream meta_in(metadata_path);
    if (!meta_in) throw InvalidArgument("cannot open " + metadata_path);
    const nlohmann::json meta = nlohmann::json::parse(meta_in);
    data.u_max = meta.at("u_max").get<double>();
    data.seed = meta.value("seed", std::uint64_t{0});
    data.true_parameter = meta.value("true_parameter", Vector{});
    internal::Require(observed_max <= data.u_max * (1.0 + 1e-12),
                      "dataset csv: a record exceeds the declared u_max");
  }
  return data;
}

// Ridge-regularized logistic loss
//   F(x) = (1/n) sum_i ln(1 + exp(-z_i u_i'x)) + lambda ||x||^2,
// with mu = 2 lambda, S1 = 2 u_max and L the top eigenvalue of
// (1/n) U'U + 2 lambda I.
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(Dataset data, double lambda)
      : data_(std::move(data)), lambda_(lambda) {
    internal::Require(lambda > 0.0, "LogisticObjective: lambda must be > 0");
    internal::Require(data_.covariates.size() == data_.n * data_.d &&
                          data_.labels.size() == data_.n,
                      "LogisticObjective: malformed dataset");
    const std::size_t d = data_.d;
    Matrix gram(d, d);
    for (std::size_t i = 0; i < data_.n; ++i) {
      const auto u = data_.row(i);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = j; k < d; ++k) gram(j, k) += u[j] * u[k];
    }
    const double inv_n = 1.0 / static_cast<double>(data_.n);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = j; k < d; ++k) {
        gram(j, k) *= inv_n;
        gram(k, j) = gram(j, k);
      }
      gram(j, j) += 2.0 * lambda_;
    }
    L_ = PowerIterationTop(gram, 1e-8);
  }

  std::size_t dim() const override { return data_.d; }
  std::size_t size() const override { return data_.n; }
  double mu() const override { return 2.0 * lambda_; }
  double L() const override { return L_; }
  double sensitivity() const override { return 2.0 * data_.u_max; }
  double lambda() const { return lambda_; }
  const Dataset& data() const { return data_; }

  double Value(std::span<const double> x) const override {
    double loss = 0.0;
    for (std::size_t i = 0; i < data_.n; ++i)
      loss += Softplus(-data_.labels[i] * Dot(data_.row(i), x));
    return loss / static_cast<double>(data_.n) + lambda_ * Dot(x, x);
  }

  void DatumGradient(std::size_t i, std::span<const double> x,
                     std::span<double> out) const override {
    const auto u = data_.row(i);
    const double z = data_.labels[i];
    const double w = -z * Sigmoid(-z * Dot(u, x));
    for (std::size_t j = 0; j < data_.d; ++j)
      out[j] = w * u[j] + 2.0 * lambda_ * x[j];
  }

  void BatchGradient(std::span<const double> x,
                     std::span<const std::size_t> batch,
                     std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i : batch) {
      const auto u = data_.row(i);
      const double z = data_.labels[i];
      Axpy(-z * Sigmoid(-z * Dot(u, x)), u, out);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t j = 0; j < data_.d; ++j)
      out[j] = out[j] * inv + 2.0 * lambda_ * x[j];
  }

  void Gradient(std::span<const double> x,
                std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < data_.n; ++i) {
      const auto u = data_.row(i);
      const double z = data_.labels[i];
      Axpy(-z * Sigmoid(-z * Dot(u, x)), u, out);
    }
    const double inv = 1.0 / static_cast<double>(data_.n);
    for (std::size_t j = 0; j < data_.d; ++j)
      out[j] = out[j] * inv + 2.0 * lambda_ * x[j];
  }

 private:
  static double Sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
  }
  static double Softplus(double s) {
    return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }

  Dataset data_;
  double lambda_;
  double L_ = 0.0;
};

}  // namespace dpaccel

#endif  // DPACCEL_OBJECTIVES_HPP_
