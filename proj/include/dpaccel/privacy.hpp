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

// Laplace mechanism, pure epsilon-DP accounting under sequential composition
// and amplification by subsampling without replacement, and per-iteration
// noise scales.

#ifndef DPACCEL_PRIVACY_HPP_
#define DPACCEL_PRIVACY_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"
#include "dpaccel/rng.hpp"

namespace dpaccel {

// Absolute slack allowed between the composed leak and the budget.
inline constexpr double kBudgetTolerance = 1e-9;

// Scale b of a zero-mean Laplace law (variance 2 b^2).
class LaplaceScale {
 public:
  explicit LaplaceScale(double b) : b_(b) {
    internal::Require(std::isfinite(b) && b >= 0.0,
                      "LaplaceScale: scale must be finite and >= 0");
  }
  double value() const { return b_; }
  double variance() const { return 2.0 * b_ * b_; }

 private:
  double b_;
};

// Fills `out` with i.i.d. Laplace(b) draws by inverse CDF: with U uniform on
// (-1/2, 1/2), X = -b sgn(U) ln(1 - 2|U|).
inline void LaplaceFill(RngStream& rng, LaplaceScale b, std::span<double> out) {
  if (!(b.value() > 0.0))
    throw InvalidArgument("laplace: scale must be > 0");
  const double scale = b.value();
  for (double& v : out) {
    const double u = rng.Uniform01() - 0.5;
    const double mag = -scale * std::log1p(-2.0 * std::abs(u));
    v = u < 0.0 ? -mag : mag;
  }
}

inline Vector LaplaceSample(RngStream& rng, LaplaceScale b, std::size_t d) {
  Vector out(d);
  LaplaceFill(rng, b, out);
  return out;
}

// Leak of one Laplace(b) release of an S-sensitive gradient average over a
// uniformly drawn m-of-n subsample:
//   ln[(exp(S/(b m)) - 1) m/n + 1],
// which is exactly S/(b n) when m == n.
inline double EpsilonOf(double sensitivity, double b, std::size_t n,
                        std::size_t m) {
  internal::Require(sensitivity >= 0.0, "EpsilonOf: sensitivity must be >= 0");
  internal::Require(b > 0.0, "EpsilonOf: scale must be > 0");
  internal::Require(m >= 1 && m <= n, "EpsilonOf: need 1 <= m <= n");
  if (m == n) return sensitivity / (b * static_cast<double>(n));
  const double x = sensitivity / (b * static_cast<double>(m));
  const double ratio = static_cast<double>(m) / static_cast<double>(n);
  if (x < 1.0) return std::log1p(std::expm1(x) * ratio);
  // ln(r e^x + 1 - r) written to stay finite for large x.
  return x + std::log(ratio) + std::log1p((1.0 - ratio) * std::exp(-x) / ratio);
}

// Per-step pre-amplification budget eps0 such that a subsampled Laplace step
// with scale S/(m eps0) leaks exactly epsilon/T:
//   eps0 = ln[1 + (exp(epsilon/T) - 1) n/m].
inline double PerIterationEpsilon(double epsilon, std::size_t horizon,
                                  std::size_t n, std::size_t m) {
  internal::Require(epsilon > 0.0, "PerIterationEpsilon: epsilon must be > 0");
  internal::Require(horizon >= 1, "PerIterationEpsilon: horizon must be >= 1");
  internal::Require(m >= 1 && m <= n, "PerIterationEpsilon: need 1 <= m <= n");
  const double per_step = epsilon / static_cast<double>(horizon);
  if (m == n) return per_step;
  return std::log1p(std::expm1(per_step) * static_cast<double>(n) /
                    static_cast<double>(m));
}

enum class ScheduleProvenance { kUniform, kOptimized, kOptimizedRescaled };

inline std::string_view ToString(ScheduleProvenance p) {
  switch (p) {
    case ScheduleProvenance::kUniform:
      return "uniform";
    case ScheduleProvenance::kOptimized:
      return "optimized";
    case ScheduleProvenance::kOptimizedRescaled:
      return "optimized-rescaled";
  }
  return "unknown";
}

// Laplace scales b_1..b_T, stored 0-based: scales[t - 1] is b_t.
struct NoiseSchedule {
  std::vector<double> scales;
  ScheduleProvenance provenance = ScheduleProvenance::kUniform;

  std::size_t size() const { return scales.size(); }
  double operator[](std::size_t i) const { return scales[i]; }
};

// Leak of each step of a schedule.
inline std::vector<double> StepLeaks(const NoiseSchedule& schedule,
                                     double sensitivity, std::size_t n,
                                     std::size_t m) {
  std::vector<double> leaks;
  leaks.reserve(schedule.size());
  for (double b : schedule.scales)
    leaks.push_back(EpsilonOf(sensitivity, b, n, m));
  return leaks;
}

inline double ComposedLeak(const NoiseSchedule& schedule, double sensitivity,
                           std::size_t n, std::size_t m) {
  CompensatedSum total;
  for (double b : schedule.scales) total.Add(EpsilonOf(sensitivity, b, n, m));
  return total.value();
}

// Constant schedule b_t = S1/(m eps0) whose T-fold composition leaks epsilon.
inline NoiseSchedule UniformScale(double sensitivity, double epsilon,
                                  std::size_t horizon, std::size_t n,
                                  std::size_t m) {
  internal::Require(sensitivity > 0.0, "UniformScale: sensitivity must be > 0");
  const double eps0 = PerIterationEpsilon(epsilon, horizon, n, m);
  const double b = sensitivity / (static_cast<double>(m) * eps0);
  return {std::vector<double>(horizon, b), ScheduleProvenance::kUniform};
}

// Running record of leaks against a fixed total budget.
class PrivacyAccount {
 public:
  PrivacyAccount(double epsilon_total, std::size_t horizon, std::size_t n,
                 std::size_t m)
      : epsilon_total_(epsilon_total), horizon_(horizon), n_(n), m_(m) {
    internal::Require(epsilon_total > 0.0,
                      "PrivacyAccount: budget must be > 0");
    internal::Require(horizon >= 1, "PrivacyAccount: horizon must be >= 1");
    internal::Require(m >= 1 && m <= n, "PrivacyAccount: need 1 <= m <= n");
  }

  // Records one release. Throws BudgetExceeded, leaving the account
  // untouched, if the composed leak would pass the budget.
  void Spend(double eps_t) {
    internal::Require(eps_t >= 0.0 && std::isfinite(eps_t),
                      "PrivacyAccount: leak must be finite and >= 0");
    if (eps_t == 0.0) return;
    if (spent_.size() >= horizon_)
      throw BudgetExceeded("PrivacyAccount: horizon of " +
                           std::to_string(horizon_) + " releases exhausted");
    CompensatedSum next = total_;
    next.Add(eps_t);
    if (next.value() > epsilon_total_ + kBudgetTolerance)
      throw BudgetExceeded("PrivacyAccount: spending " + std::to_string(eps_t) +
                           " would exceed budget " +
                           std::to_string(epsilon_total_));
    total_ = next;
    spent_.push_back(eps_t);
  }

  double epsilon_total() const { return epsilon_total_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  const std::vector<double>& spent() const { return spent_; }
  double total_spent() const { return total_.value(); }
  double remaining() const { return epsilon_total_ - total_.value(); }

 private:
  double epsilon_total_;
  std::size_t horizon_;
  std::size_t n_;
  std::size_t m_;
  std::vector<double> spent_;
  CompensatedSum total_;
};

// Value-semantics form of PrivacyAccount::Spend.
inline PrivacyAccount AccountSpend(PrivacyAccount account, double eps_t) {
  account.Spend(eps_t);
  return account;
}

}  // namespace dpaccel

#endif  // DPACCEL_PRIVACY_HPP_
