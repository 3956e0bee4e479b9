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

// Privacy budget allocation across iterations.
//
// Accelerated methods with noisy gradients obey error bounds of the form
//
//   E_T <= a_{T,0} E_0 + sum_{t=1..T} a_{T,t} (d b_t^2 + sigma_s^2 / 2),
//
// so for a fixed horizon the noise scales should minimize sum a_{T,t} b_t^2
// subject to the composed leak equalling epsilon. Without subsampling the
// leak is sum S1/(n b_t) and the minimizer has the closed form
//
//   b_t = (sum_j a_{T,j}^{1/3}) / a_{T,t}^{1/3} * S1/(n epsilon),
//
// i.e. iteration t receives the fraction a_{T,t}^{1/3} / sum_j a_{T,j}^{1/3}
// of the budget. Under subsampling the same shape is kept and rescaled so the
// amplified leaks compose to epsilon.

#ifndef DPACCEL_BUDGET_HPP_
#define DPACCEL_BUDGET_HPP_

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <string_view>
#include <vector>

#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"
#include "dpaccel/optimizers.hpp"
#include "dpaccel/privacy.hpp"

namespace dpaccel {

enum class CoefficientKind { kNesterov, kMultiStage };

inline std::string_view ToString(CoefficientKind k) {
  return k == CoefficientKind::kNesterov ? "nag" : "masg";
}

// a[0] multiplies E_0; a[t] for t >= 1 weighs the noise of iteration t.
struct BoundCoefficients {
  std::vector<double> a;
  CoefficientKind kind = CoefficientKind::kNesterov;

  std::size_t horizon() const { return a.empty() ? 0 : a.size() - 1; }
};

namespace internal {

inline void RequireStepsize(double alpha, double L) {
  Require(alpha > 0.0, "stepsize must be > 0");
  // alpha = c / L with c = 1 can land one ulp above 1/L.
  Require(alpha * L <= 1.0 + 1e-12, "stepsize must not exceed 1/L");
}

}  // namespace internal

// a_{T,0} = q^T and a_{T,t} = q^(T-t) alpha (1 + alpha L), q = 1 - sqrt(mu alpha).
inline BoundCoefficients NagCoefficients(double mu, double L, double alpha,
                                         std::size_t horizon) {
  internal::Require(mu > 0.0 && mu <= L, "NagCoefficients: need 0 < mu <= L");
  internal::RequireStepsize(alpha, L);
  const double q = 1.0 - std::sqrt(mu * alpha);
  const double gain = alpha * (1.0 + alpha * L);
  BoundCoefficients out;
  out.kind = CoefficientKind::kNesterov;
  out.a.resize(horizon + 1);
  out.a[0] = std::pow(q, static_cast<double>(horizon));
  for (std::size_t t = 1; t <= horizon; ++t)
    out.a[t] = std::pow(q, static_cast<double>(horizon - t)) * gain;
  return out;
}

// Multi-stage coefficients: for t >= 1
//   a_{T,t} = 2^(s_T - s_t) [prod_{i=t+1..T} (1 - sqrt(mu alpha^(s_i)))]
//             alpha^(s_t) (1 + alpha^(s_t) L),
// and a_{T,0} = 2^(s_T - s_0) prod_{i=1..T} (1 - sqrt(mu alpha^(s_i))), where
// s_i is the stage of iteration i and s_0 = 1.
inline BoundCoefficients MasgCoefficients(double mu, double L,
                                          const StageSchedule& stages) {
  internal::Require(mu > 0.0 && mu <= L, "MasgCoefficients: need 0 < mu <= L");
  for (double alpha : stages.stepsizes) internal::RequireStepsize(alpha, L);
  const std::size_t horizon = stages.total();
  BoundCoefficients out;
  out.kind = CoefficientKind::kMultiStage;
  out.a.resize(horizon + 1);
  if (horizon == 0) {
    out.a[0] = 1.0;
    return out;
  }
  // Stage of each iteration, 1-based, s[0] = 1.
  std::vector<std::size_t> stage(horizon + 1, 1);
  for (std::size_t k = 0, i = 1; k < stages.stages(); ++k)
    for (std::size_t j = 0; j < stages.lengths[k]; ++j) stage[i++] = k + 1;
  const std::size_t last = stage[horizon];

  double suffix = 1.0;  // prod_{i=t+1..T}
  for (std::size_t t = horizon; t >= 1; --t) {
    const double alpha = stages.stepsizes[stage[t] - 1];
    out.a[t] = std::ldexp(suffix, static_cast<int>(last - stage[t])) * alpha *
               (1.0 + alpha * L);
    suffix *= 1.0 - std::sqrt(mu * alpha);
  }
  out.a[0] = std::ldexp(suffix, static_cast<int>(last - stage[0]));
  return out;
}

// Noise-minimizing schedule for m = n under a total leak of epsilon.
inline NoiseSchedule OptimalSchedule(const BoundCoefficients& coeffs,
                                     double sensitivity, std::size_t n,
                                     double epsilon) {
  internal::Require(coeffs.horizon() >= 1, "OptimalSchedule: empty horizon");
  internal::Require(sensitivity > 0.0 && epsilon > 0.0 && n >= 1,
                    "OptimalSchedule: need S1 > 0, epsilon > 0, n >= 1");
  CompensatedSum cube_roots;
  for (std::size_t t = 1; t <= coeffs.horizon(); ++t) {
    internal::Require(coeffs.a[t] > 0.0,
                      "OptimalSchedule: coefficients must be > 0");
    cube_roots.Add(std::cbrt(coeffs.a[t]));
  }
  const double unit = sensitivity / (static_cast<double>(n) * epsilon);
  NoiseSchedule out;
  out.provenance = ScheduleProvenance::kOptimized;
  out.scales.resize(coeffs.horizon());
  for (std::size_t t = 1; t <= coeffs.horizon(); ++t)
    out.scales[t - 1] = cube_roots.value() / std::cbrt(coeffs.a[t]) * unit;
  return out;
}

// Multiplies every scale by one common factor so that the subsampled leaks
// compose to exactly epsilon. The composed leak is strictly decreasing in
// the factor, so the root is unique; it is bracketed by doubling and then
// bisected in log space. The returned factor is the upper end of the final
// bracket, so the result never overspends.
inline NoiseSchedule RescaleForSubsampling(const NoiseSchedule& schedule,
                                           double sensitivity, std::size_t n,
                                           std::size_t m, double epsilon) {
  internal::Require(schedule.size() >= 1, "RescaleForSubsampling: empty");
  internal::Require(sensitivity > 0.0 && epsilon > 0.0,
                    "RescaleForSubsampling: need S1 > 0 and epsilon > 0");
  internal::Require(m >= 1 && m <= n, "RescaleForSubsampling: need 1 <= m <= n");
  auto leak_at = [&](double factor) {
    CompensatedSum total;
    for (double b : schedule.scales)
      total.Add(EpsilonOf(sensitivity, factor * b, n, m));
    return total.value();
  };
  NoiseSchedule out = schedule;
  if (m == n) {
    // Leak is proportional to 1/factor; only fix rounding in the input.
    const double factor = leak_at(1.0) / epsilon;
    if (std::abs(factor - 1.0) > 1e-15)
      for (double& b : out.scales) b *= factor;
    return out;
  }

  double lo = 1.0, hi = 1.0;
  int expansions = 0;
  while (leak_at(lo) < epsilon) {
    lo *= 0.5;
    if (++expansions > 2000) throw NumericError("RescaleForSubsampling: bracket");
  }
  while (leak_at(hi) > epsilon) {
    hi *= 2.0;
    if (++expansions > 2000) throw NumericError("RescaleForSubsampling: bracket");
  }
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (leak_at(mid) > epsilon)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * hi || std::abs(leak_at(hi) - epsilon) <= 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericError("RescaleForSubsampling: bisection did not converge");
  for (double& b : out.scales) b *= hi;
  out.provenance = ScheduleProvenance::kOptimizedRescaled;
  return out;
}

// a_{T,0} E_0 + sum_t a_{T,t} (d b_t^2 + sigma_s^2 / 2).
inline double ScheduleBound(const BoundCoefficients& coeffs,
                            const NoiseSchedule& schedule, double e0,
                            std::size_t d, double sigma_s2 = 0.0) {
  internal::Require(schedule.size() == coeffs.horizon(),
                    "ScheduleBound: schedule length must equal horizon");
  double bound = coeffs.a[0] * e0;
  for (std::size_t t = 1; t <= coeffs.horizon(); ++t) {
    const double b = schedule[t - 1];
    bound += coeffs.a[t] * (static_cast<double>(d) * b * b + 0.5 * sigma_s2);
  }
  return bound;
}

// Value of the bound at the optimal m = n schedule:
//   a_{T,0} E_0 + d S1^2/(n^2 eps^2) (sum_{t>=1} a_{T,t}^{1/3})^3.
inline double OptimizedBound(const BoundCoefficients& coeffs, double e0,
                             double sensitivity, std::size_t n, double epsilon,
                             std::size_t d) {
  CompensatedSum cube_roots;
  for (std::size_t t = 1; t <= coeffs.horizon(); ++t)
    cube_roots.Add(std::cbrt(coeffs.a[t]));
  const double unit = sensitivity / (static_cast<double>(n) * epsilon);
  const double s = cube_roots.value();
  return coeffs.a[0] * e0 + static_cast<double>(d) * unit * unit * s * s * s;
}

struct HorizonChoice {
  std::size_t horizon = 0;
  double bound = 0.0;
};

using CoefficientBuilder = std::function<BoundCoefficients(std::size_t)>;

// Scans T' = 1..max_horizon, rebuilding the coefficients each time (quadratic
// in max_horizon overall), and returns the T' with the smallest optimized
// bound. Ties go to the smaller T'.
inline HorizonChoice SelectHorizon(const CoefficientBuilder& build, double e0,
                                   double sensitivity, std::size_t n,
                                   double epsilon, std::size_t d,
                                   std::size_t max_horizon) {
  internal::Require(max_horizon >= 1, "SelectHorizon: need max_horizon >= 1");
  internal::Require(e0 >= 0.0, "SelectHorizon: E0 guess must be >= 0");
  HorizonChoice best{0, 0.0};
  for (std::size_t t = 1; t <= max_horizon; ++t) {
    const double value =
        OptimizedBound(build(t), e0, sensitivity, n, epsilon, d);
    if (best.horizon == 0 || value < best.bound) best = {t, value};
  }
  return best;
}

// Audit CSV t,b_t,eps_t.
inline void WriteScheduleCsv(const NoiseSchedule& schedule, double sensitivity,
                             std::size_t n, std::size_t m,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << "t,b_t,eps_t\n" << std::setprecision(17);
  for (std::size_t t = 1; t <= schedule.size(); ++t)
    out << t << ',' << schedule[t - 1] << ','
        << EpsilonOf(sensitivity, schedule[t - 1], n, m) << '\n';
}

}  // namespace dpaccel

#endif  // DPACCEL_BUDGET_HPP_
