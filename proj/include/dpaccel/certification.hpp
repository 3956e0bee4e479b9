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

// Performance bounds for noisy heavy ball.
//
// Heavy ball is the linear system xi_{t+1} = A xi_t + B (grad + noise) with
// xi_t = [x_t; x_{t-1}]. A rate rho is certified by (P, c0, c) satisfying the
// 3x3 matrix inequality
//
//   c0 X0 + c [X1 + (1 - rho^2) X2] - Phi(A, B, P, rho) >= 0,
//
// after which
//
//   E[F(x_t) - F*] <= rho^(2t) V(xi_0) / c
//       + (1 - rho^(2t)) / (1 - rho^2) * (L d alpha^2 / 2) * E_T
//         * (1 + 2 P12^2 / (P22 c L + 2 det P)).
//
// For quadratics the rate is the spectral radius of the per-eigenvalue
// companion blocks [[1 + beta - alpha lambda, -beta], [1, 0]].

#ifndef DPACCEL_CERTIFICATION_HPP_
#define DPACCEL_CERTIFICATION_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"

namespace dpaccel {

inline constexpr double kCertificateTolerance = 1e-9;

struct SystemMatrices {
  Mat2 A{};
  std::array<double, 2> B{};
  std::array<double, 2> C{};

  static SystemMatrices HeavyBall(double alpha, double beta) {
    SystemMatrices s;
    s.A = {{{1.0 + beta, -beta}, {1.0, 0.0}}};
    s.B = {alpha, 0.0};
    s.C = {1.0, 0.0};
    return s;
  }
};

struct NoiseBound {
  double subsampling = 0.0;  // sigma_s^2(m, n)
  double privacy = 0.0;      // 2 d S1^2 / (m^2 eps0^2)
  double total = 0.0;
};

// Uniform bound on the conditional covariance norm of subsampling plus
// Laplace noise: sigma_s^2 = S1^2/4 * (1/m) * (n - m)/(n - 1).
inline NoiseBound NoiseBoundFor(double sensitivity, std::size_t d,
                                std::size_t m, std::size_t n, double eps0) {
  internal::Require(m >= 1 && m <= n, "NoiseBoundFor: need 1 <= m <= n");
  internal::Require(eps0 > 0.0, "NoiseBoundFor: eps0 must be > 0");
  NoiseBound out;
  if (m < n) {
    out.subsampling = sensitivity * sensitivity / 4.0 /
                      static_cast<double>(m) *
                      static_cast<double>(n - m) / static_cast<double>(n - 1);
  }
  const double md = static_cast<double>(m);
  out.privacy = 2.0 * static_cast<double>(d) * sensitivity * sensitivity /
                (md * md * eps0 * eps0);
  out.total = out.subsampling + out.privacy;
  return out;
}

struct Certificate {
  double rho = 1.0;
  Mat2 P{};
  double c0 = 0.0;
  double c = 0.0;
  double slack = 0.0;  // smallest eigenvalue of the certificate matrix

  double det_p() const { return P[0][0] * P[1][1] - P[0][1] * P[1][0]; }

  // 1 + 2 P12^2 / (P22 c L + 2 det P), with 0/0 read as 0.
  double Amplification(double L) const {
    const double num = 2.0 * P[0][1] * P[0][1];
    const double den = P[1][1] * c * L + 2.0 * det_p();
    if (num == 0.0) return 1.0;
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 + num / den;
  }
};

// Scalar (d = 1) form of c0 X0 + c [X1 + (1 - rho^2) X2] - Phi, ordered as
// (x_t - x*, x_{t-1} - x*, grad F(x_t)).
inline Mat3 CertificateMatrix(double alpha, double beta, double mu, double L,
                              double rho, const Mat2& P, double c0, double c) {
  const SystemMatrices sys = SystemMatrices::HeavyBall(alpha, beta);
  const Mat2& A = sys.A;
  const auto& B = sys.B;

  Mat2 pa{};  // P A
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      pa[i][j] = P[i][0] * A[0][j] + P[i][1] * A[1][j];
  Mat3 phi{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      phi[i][j] = A[0][i] * pa[0][j] + A[1][i] * pa[1][j] - rho * rho * P[i][j];
  // A'PB and B'PB
  const double pb0 = P[0][0] * B[0] + P[0][1] * B[1];
  const double pb1 = P[1][0] * B[0] + P[1][1] * B[1];
  for (int i = 0; i < 2; ++i) {
    phi[i][2] = A[0][i] * pb0 + A[1][i] * pb1;
    phi[2][i] = phi[i][2];
  }
  phi[2][2] = B[0] * pb0 + B[1] * pb1;

  const Mat3 x0 = {{{2.0 * mu * L, 0.0, -(mu + L)},
                    {0.0, 0.0, 0.0},
                    {-(mu + L), 0.0, 2.0}}};
  const double lb2 = L * beta * beta;
  const double cross = (1.0 - L * alpha) * beta;
  const Mat3 x1 = {{{-0.5 * lb2, 0.5 * lb2, -0.5 * cross},
                    {0.5 * lb2, -0.5 * lb2, 0.5 * cross},
                    {-0.5 * cross, 0.5 * cross, 0.5 * alpha * (2.0 - L * alpha)}}};
  const Mat3 x2 = {{{0.5 * mu, 0.0, -0.5}, {0.0, 0.0, 0.0}, {-0.5, 0.0, 0.0}}};

  Mat3 m{};
  const double w = 1.0 - rho * rho;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m[i][j] = c0 * x0[i][j] + c * (x1[i][j] + w * x2[i][j]) - phi[i][j];
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) m[i][j] = m[j][i] = 0.5 * (m[i][j] + m[j][i]);
  return m;
}

struct FeasibilityCheck {
  bool feasible = false;
  double slack = 0.0;
};

inline FeasibilityCheck CheckCertificate(const Mat3& m,
                                         double tol = kCertificateTolerance) {
  const double slack = SymmetricEigenvalues3(m)[0];
  return {slack >= -tol, slack};
}

struct CertificateGrid {
  std::vector<double> rho;
  std::vector<double> p11;
  std::vector<double> p12;
  std::vector<double> p22;
  std::vector<double> c0;
  std::vector<double> c;

  // rho in {0.50, 0.51, ..., 0.99, 0.991, ..., 0.999}; P diagonal entries in
  // {0} U logspace(1e-3, 1e3, 19); P12 in {0} U +-logspace(1e-3, 1e3, 19);
  // c0 in {0} U logspace(1e-3, 1e3, 13); c = 1. The inequality and the bound
  // are both invariant under scaling (P, c0, c) jointly, so a single c loses
  // nothing.
  static CertificateGrid Defaults() {
    CertificateGrid g;
    for (int i = 50; i <= 99; ++i) g.rho.push_back(i / 100.0);
    for (int i = 991; i <= 999; ++i) g.rho.push_back(i / 1000.0);
    auto logspace = [](double lo, double hi, int count) {
      std::vector<double> v;
      for (int i = 0; i < count; ++i)
        v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
      return v;
    };
    const auto diag = logspace(1e-3, 1e3, 19);
    g.p11.push_back(0.0);
    g.p11.insert(g.p11.end(), diag.begin(), diag.end());
    g.p22 = g.p11;
    g.p12.push_back(0.0);
    for (double v : diag) {
      g.p12.push_back(v);
      g.p12.push_back(-v);
    }
    g.c0.push_back(0.0);
    const auto c0s = logspace(1e-3, 1e3, 13);
    g.c0.insert(g.c0.end(), c0s.begin(), c0s.end());
    g.c = {1.0};
    return g;
  }
};

// Grid search for the smallest certifiable rho. Within the first rho that
// admits a feasible point, the point with the smallest noise amplification
// wins; remaining ties keep the earliest grid point. Only PSD P are tried.
// Returns nullopt when no grid point is feasible.
inline std::optional<Certificate> SearchCertificate(
    double alpha, double beta, double mu, double L, const CertificateGrid& grid,
    double tol = kCertificateTolerance) {
  if (grid.rho.empty() || grid.p11.empty() || grid.p12.empty() ||
      grid.p22.empty() || grid.c0.empty() || grid.c.empty())
    throw InvalidArgument("SearchCertificate: empty grid");
  std::vector<double> rhos = grid.rho;
  std::stable_sort(rhos.begin(), rhos.end());
  for (double rho : rhos) {
    internal::Require(rho > 0.0 && rho < 1.0,
                      "SearchCertificate: rho must lie in (0, 1)");
    std::optional<Certificate> best;
    double best_amp = 0.0;
    for (double p11 : grid.p11)
      for (double p12 : grid.p12)
        for (double p22 : grid.p22) {
          if (p11 < 0.0 || p22 < 0.0 || p11 * p22 - p12 * p12 < -1e-12)
            continue;
          const Mat2 P = {{{p11, p12}, {p12, p22}}};
          for (double c : grid.c)
            for (double c0 : grid.c0) {
              const Mat3 m = CertificateMatrix(alpha, beta, mu, L, rho, P, c0, c);
              const FeasibilityCheck check = CheckCertificate(m, tol);
              if (!check.feasible) continue;
              Certificate cert{rho, P, c0, c, check.slack};
              const double amp = cert.Amplification(L);
              if (!best || amp < best_amp) {
                best = cert;
                best_amp = amp;
              }
            }
        }
    if (best) return best;
  }
  return std::nullopt;
}

// V_{P,c}(xi_0) = (xi_0 - xi*)'(P kron I)(xi_0 - xi*) + c (F(x_0) - F*).
inline double LyapunovValue(const Certificate& cert,
                            std::span<const double> x0,
                            std::span<const double> x_prev,
                            std::span<const double> x_star, double f_gap) {
  const Vector e0 = Subtract(x0, x_star);
  const Vector e1 = Subtract(x_prev, x_star);
  return cert.P[0][0] * Dot(e0, e0) + 2.0 * cert.P[0][1] * Dot(e0, e1) +
         cert.P[1][1] * Dot(e1, e1) + cert.c * f_gap;
}

// Right-hand side of the heavy-ball performance bound at iteration t.
// `psi0` is V_{P,c}(xi_0).
inline double EvalShbBound(const Certificate& cert, double psi0, std::size_t t,
                           double noise_level, std::size_t d, double alpha,
                           double L) {
  internal::Require(cert.rho > 0.0 && cert.rho < 1.0,
                    "EvalShbBound: rho must lie in (0, 1)");
  double transient = 0.0;
  if (psi0 > 0.0) {
    if (!(cert.c > 0.0))
      throw InvalidArgument("EvalShbBound: c = 0 cannot bound psi0 / c");
    transient = std::pow(cert.rho, 2.0 * static_cast<double>(t)) * psi0 / cert.c;
  }
  const double r2 = cert.rho * cert.rho;
  const double geometric =
      -std::expm1(static_cast<double>(t) * std::log(r2)) / (1.0 - r2);
  return transient + geometric * (L * static_cast<double>(d) * alpha * alpha /
                                  2.0) *
                         noise_level * cert.Amplification(L);
}

struct RootPair {
  std::complex<double> plus;
  std::complex<double> minus;

  double radius() const { return std::max(std::abs(plus), std::abs(minus)); }
};

// Roots of z^2 - (1 + beta - alpha lambda) z + beta.
inline RootPair CompanionRoots(double alpha, double beta, double lambda) {
  const double trace = 1.0 + beta - alpha * lambda;
  const std::complex<double> disc =
      std::sqrt(std::complex<double>(trace * trace - 4.0 * beta, 0.0));
  return {(trace + disc) / 2.0, (trace - disc) / 2.0};
}

struct QuadraticRateReport {
  double alpha = 0.0;
  double beta = 0.0;
  double mu = 0.0;
  double L = 0.0;
  Vector eigenvalues;
  std::vector<RootPair> roots;  // one pair per eigenvalue
  RootPair at_mu;
  RootPair at_L;
  double rho = 0.0;
  bool contractive = false;
  // sum_i alpha (1 + beta) / ((1 - beta) lambda_i (2 + 2 beta - alpha
  // lambda_i)); m(alpha, beta) = sigma_T^2 * noise_gain. Empty when some
  // 2 + 2 beta - alpha lambda_i <= 0.
  std::optional<double> noise_gain;
};

inline QuadraticRateReport QuadraticRate(double alpha, double beta,
                                         std::span<const double> eigenvalues,
                                         double mu, double L) {
  internal::Require(mu > 0.0 && mu <= L, "QuadraticRate: need 0 < mu <= L");
  internal::Require(beta >= 0.0 && beta < 1.0,
                    "QuadraticRate: need 0 <= beta < 1");
  QuadraticRateReport r;
  r.alpha = alpha;
  r.beta = beta;
  r.mu = mu;
  r.L = L;
  r.eigenvalues.assign(eigenvalues.begin(), eigenvalues.end());
  r.at_mu = CompanionRoots(alpha, beta, mu);
  r.at_L = CompanionRoots(alpha, beta, L);
  r.rho = std::max(r.at_mu.radius(), r.at_L.radius());
  r.contractive = r.rho < 1.0;
  double gain = 0.0;
  bool valid = true;
  for (double lambda : eigenvalues) {
    internal::Require(lambda >= mu * (1 - 1e-12) && lambda <= L * (1 + 1e-12),
                      "QuadraticRate: eigenvalue outside [mu, L]");
    r.roots.push_back(CompanionRoots(alpha, beta, lambda));
    const double margin = 2.0 + 2.0 * beta - alpha * lambda;
    if (margin <= 0.0) valid = false;
    gain += alpha * (1.0 + beta) / ((1.0 - beta) * lambda * margin);
  }
  if (valid) r.noise_gain = gain;
  return r;
}

// V(xi_0) C_t^2 rho^(2t) + L m(alpha, beta) with C_t = t_scale * t and
// V(xi_0) = ||xi_0 - xi*||^2 + sigma_T^2 alpha^2 / (1 - rho^2).
inline double QuadraticBound(const QuadraticRateReport& report,
                             double sigma_t2, std::size_t t,
                             double initial_norm2, double t_scale = 1.0) {
  if (!report.contractive)
    throw InvalidArgument("QuadraticBound: rate is not contractive");
  if (!report.noise_gain)
    throw InvalidArgument("QuadraticBound: 2 + 2 beta - alpha lambda <= 0");
  const double rho2 = report.rho * report.rho;
  const double v0 =
      initial_norm2 + sigma_t2 * report.alpha * report.alpha / (1.0 - rho2);
  const double ct = t_scale * static_cast<double>(t);
  return v0 * ct * ct * std::pow(rho2, static_cast<double>(t)) +
         report.L * sigma_t2 * *report.noise_gain;
}

// alpha_HB = 4 / (sqrt(mu) + sqrt(L))^2, beta_HB = ((sqrt(k) - 1)/(sqrt(k) + 1))^2.
inline double HeavyBallStepsize(double mu, double L) {
  const double s = std::sqrt(mu) + std::sqrt(L);
  return 4.0 / (s * s);
}

inline double HeavyBallMomentum(double mu, double L) {
  const double k = std::sqrt(L / mu);
  const double r = (k - 1.0) / (k + 1.0);
  return r * r;
}

}  // namespace dpaccel

#endif  // DPACCEL_CERTIFICATION_HPP_
