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

#include "dpaccel/budget.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dpaccel/rng.hpp"

namespace dpaccel {
namespace {

// Multi-stage coefficients from the defining products, in long double.
std::vector<long double> MasgOracle(double mu, double L, const StageSchedule& s) {
  std::vector<std::size_t> stage{1};
  std::vector<long double> alpha{0};
  for (std::size_t k = 0; k < s.stages(); ++k)
    for (std::size_t j = 0; j < s.lengths[k]; ++j) {
      stage.push_back(k + 1);
      alpha.push_back(s.stepsizes[k]);
    }
  const std::size_t T = stage.size() - 1;
  std::vector<long double> a(T + 1);
  for (std::size_t t = 0; t <= T; ++t) {
    long double prod = std::pow(2.0L, static_cast<long double>(stage[T]) - stage[t]);
    for (std::size_t i = t + 1; i <= T; ++i) prod *= 1 - std::sqrt(mu * alpha[i]);
    a[t] = t == 0 ? prod : prod * alpha[t] * (1 + alpha[t] * L);
  }
  return a;
}

double Leak(const NoiseSchedule& s, double s1, std::size_t n, std::size_t m) {
  return ComposedLeak(s, s1, n, m);
}

TEST(NagCoefficientsTest, Example) {
  const BoundCoefficients c = NagCoefficients(0.25, 1.0, 1.0, 2);
  ASSERT_EQ(c.horizon(), 2u);
  EXPECT_DOUBLE_EQ(c.a[0], 0.25);
  EXPECT_DOUBLE_EQ(c.a[1], 1.0);
  EXPECT_DOUBLE_EQ(c.a[2], 2.0);
  const BoundCoefficients one = NagCoefficients(0.25, 1.0, 1.0, 1);
  EXPECT_DOUBLE_EQ(one.a[0], 0.5);
  EXPECT_DOUBLE_EQ(one.a[1], 2.0);
}

TEST(NagCoefficientsTest, RejectsLongSteps) {
  EXPECT_THROW(NagCoefficients(0.25, 1.0, 1.01, 3), InvalidArgument);
  EXPECT_THROW(NagCoefficients(2.0, 1.0, 0.5, 3), InvalidArgument);
  EXPECT_NO_THROW(NagCoefficients(0.1, 3.0, 1.0 / 3.0, 3));
}

// Unrolling E_t <= q E_{t-1} + g w_t reproduces the coefficients.
TEST(NagCoefficientsTest, MatchesUnrolledRecursion) {
  RngStream rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const double L = rng.Uniform(0.5, 5.0);
    const double mu = L * rng.Uniform(0.01, 1.0);
    const double alpha = rng.Uniform(0.1, 1.0) / L;
    const std::size_t T = 1 + rng.UniformIndex(60);
    const BoundCoefficients c = NagCoefficients(mu, L, alpha, T);
    const double q = 1 - std::sqrt(mu * alpha);
    // Coefficient of w_t after T steps: q^(T-t) g.
    Vector w(T + 1);
    for (double& v : w) v = rng.Uniform(0.0, 1.0);
    double e = w[0];
    for (std::size_t t = 1; t <= T; ++t) e = q * e + alpha * (1 + alpha * L) * w[t];
    double via = 0.0;
    for (std::size_t t = 0; t <= T; ++t) via += c.a[t] * w[t];
    EXPECT_NEAR(via, e, 1e-12 * std::max(1.0, e));
  }
}

TEST(MasgCoefficientsTest, SingleStageEqualsNesterov) {
  StageSchedule s{{25}, {0.4}};
  const BoundCoefficients m = MasgCoefficients(0.1, 2.0, s);
  const BoundCoefficients n = NagCoefficients(0.1, 2.0, 0.4, 25);
  for (std::size_t t = 0; t <= 25; ++t) EXPECT_NEAR(m.a[t], n.a[t], 1e-14 * n.a[t]);
}

TEST(MasgCoefficientsTest, StageChangeDoubles) {
  const double mu = 0.2, L = 1.0, a1 = 1.0, a2 = 1.0 / 16;
  StageSchedule s{{1, 1}, {a1, a2}};
  const BoundCoefficients c = MasgCoefficients(mu, L, s);
  const double q2 = 1 - std::sqrt(mu * a2);
  EXPECT_DOUBLE_EQ(c.a[2], a2 * (1 + a2 * L));
  EXPECT_DOUBLE_EQ(c.a[1], 2 * q2 * a1 * (1 + a1 * L));
  EXPECT_DOUBLE_EQ(c.a[0], 2 * q2 * (1 - std::sqrt(mu * a1)));
}

TEST(MasgCoefficientsTest, MatchesDirectProducts) {
  for (double c : {0.1, 0.5, 1.0}) {
    for (std::size_t T : {5u, 10u, 11u, 57u, 130u, 300u}) {
      const StageSchedule s = MakeMasgStages(1.0, 20.0, c, T);
      const BoundCoefficients got = MasgCoefficients(1.0, 20.0, s);
      const auto want = MasgOracle(1.0, 20.0, s);
      for (std::size_t t = 0; t <= T; ++t)
        EXPECT_NEAR(got.a[t], static_cast<double>(want[t]),
                    1e-12 * static_cast<double>(want[t]))
            << "c=" << c << " T=" << T << " t=" << t;
    }
  }
}

TEST(OptimalScheduleTest, TwoStepExample) {
  BoundCoefficients c;
  c.a = {0.0, 1.0, 2.0};
  const NoiseSchedule s = OptimalSchedule(c, 1.0, 1, 1.0);
  const double r = std::cbrt(2.0);
  EXPECT_NEAR(s[0], 1 + r, 1e-15);
  EXPECT_NEAR(s[1], (1 + r) / r, 1e-15);
  EXPECT_EQ(s.provenance, ScheduleProvenance::kOptimized);
}

TEST(OptimalScheduleTest, EqualCoefficientsGiveUniform) {
  BoundCoefficients c;
  c.a.assign(51, 0.3);
  const NoiseSchedule s = OptimalSchedule(c, 40.0, 1000, 0.5);
  const NoiseSchedule u = UniformScale(40.0, 0.5, 50, 1000, 1000);
  for (std::size_t t = 0; t < 50; ++t) EXPECT_NEAR(s[t], u[t], 1e-14 * u[t]);
}

TEST(OptimalScheduleTest, LeakSplitsByCubeRoots) {
  const BoundCoefficients c = NagCoefficients(0.05, 1.0, 0.8, 40);
  const NoiseSchedule s = OptimalSchedule(c, 7.0, 500, 1.3);
  double sum = 0.0;
  for (std::size_t t = 1; t <= 40; ++t) sum += std::cbrt(c.a[t]);
  for (std::size_t t = 1; t <= 40; ++t)
    EXPECT_NEAR(EpsilonOf(7.0, s[t - 1], 500, 500), 1.3 * std::cbrt(c.a[t]) / sum,
                1e-14);
  EXPECT_NEAR(Leak(s, 7.0, 500, 500), 1.3, 1e-12);
}

// Later iterations carry larger weight, so they get less noise.
TEST(OptimalScheduleTest, NesterovScalesDecrease) {
  const NoiseSchedule s = OptimalSchedule(NagCoefficients(0.1, 1.0, 1.0, 30),
                                          1.0, 100, 1.0);
  for (std::size_t t = 1; t < s.size(); ++t) EXPECT_LT(s[t], s[t - 1]);
}

// No feasible schedule beats the closed form.
TEST(OptimalScheduleTest, DominatesRandomFeasibleSchedules) {
  RngStream rng(2);
  const double s1 = 40.0, eps = 1.0;
  const std::size_t n = 10000, d = 20;
  for (std::size_t T : {2u, 5u, 50u, 500u}) {
    const BoundCoefficients c = NagCoefficients(0.01, 1.0, 1.0, T);
    const NoiseSchedule best = OptimalSchedule(c, s1, n, eps);
    const double opt = ScheduleBound(c, best, 10.0, d);
    EXPECT_NEAR(opt, OptimizedBound(c, 10.0, s1, n, eps, d), 1e-12 * opt);
    for (int trial = 0; trial < 200; ++trial) {
      Vector share(T);
      double total = 0.0;
      for (double& v : share) total += v = -std::log(rng.Uniform01());
      NoiseSchedule other;
      other.scales.resize(T);
      for (std::size_t t = 0; t < T; ++t)
        other.scales[t] = s1 / (n * eps * share[t] / total);
      EXPECT_GE(ScheduleBound(c, other, 10.0, d), opt * (1 - 1e-12));
    }
  }
}

TEST(OptimalScheduleTest, RejectsBadInputs) {
  BoundCoefficients empty;
  empty.a = {1.0};
  EXPECT_THROW(OptimalSchedule(empty, 1.0, 10, 1.0), InvalidArgument);
  BoundCoefficients zero;
  zero.a = {1.0, 0.0};
  EXPECT_THROW(OptimalSchedule(zero, 1.0, 10, 1.0), InvalidArgument);
}

TEST(RescaleForSubsamplingTest, FullBatchUnchanged) {
  const NoiseSchedule s = OptimalSchedule(NagCoefficients(0.1, 1.0, 1.0, 20),
                                          3.0, 100, 1.0);
  const NoiseSchedule r = RescaleForSubsampling(s, 3.0, 100, 100, 1.0);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_NEAR(r[t], s[t], 1e-15 * s[t]);
}

TEST(RescaleForSubsamplingTest, UniformInputMatchesUniformScale) {
  const NoiseSchedule full = UniformScale(40.0, 1.0, 100, 100000, 100000);
  const NoiseSchedule r = RescaleForSubsampling(full, 40.0, 100000, 1000, 1.0);
  for (std::size_t t = 0; t < 100; ++t) EXPECT_NEAR(r[t], 0.057499981800278840, 1e-13);
  EXPECT_EQ(r.provenance, ScheduleProvenance::kOptimizedRescaled);
}

TEST(RescaleForSubsamplingTest, ComposesToBudgetAndKeepsShape) {
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 1 + rng.UniformIndex(300);
    const std::size_t n = 10 + rng.UniformIndex(100000);
    const std::size_t m = 1 + rng.UniformIndex(n - 1);
    const double eps = rng.Uniform(0.05, 5.0), s1 = rng.Uniform(0.5, 50.0);
    const NoiseSchedule base = OptimalSchedule(
        NagCoefficients(rng.Uniform(0.001, 0.5), 1.0, 1.0, T), s1, n, eps);
    const NoiseSchedule r = RescaleForSubsampling(base, s1, n, m, eps);
    const double leak = Leak(r, s1, n, m);
    EXPECT_NEAR(leak, eps, 1e-9);
    EXPECT_LE(leak, eps + 1e-12);
    for (std::size_t t = 1; t < T; ++t)
      EXPECT_NEAR(r[t] / base[t], r[0] / base[0], 1e-12 * r[0] / base[0]);
  }
}

TEST(ScheduleBoundTest, IncludesSamplingVariance) {
  BoundCoefficients c;
  c.a = {0.5, 1.0, 2.0};
  NoiseSchedule s;
  s.scales = {1.0, 0.5};
  EXPECT_DOUBLE_EQ(ScheduleBound(c, s, 4.0, 3), 2.0 + 3.0 + 2.0 * 0.75);
  EXPECT_DOUBLE_EQ(ScheduleBound(c, s, 4.0, 3, 0.4), 6.5 + 0.2 * 3.0);
  s.scales.pop_back();
  EXPECT_THROW(ScheduleBound(c, s, 4.0, 3), InvalidArgument);
}

TEST(SelectHorizonTest, MatchesBruteForceScan) {
  const double mu = 0.01, L = 1.0, s1 = 40.0, eps = 1.0;
  const std::size_t n = 10000, d = 20;
  auto build = [&](std::size_t T) { return NagCoefficients(mu, L, 1.0, T); };
  const HorizonChoice got = SelectHorizon(build, 10.0, s1, n, eps, d, 400);
  const double q = 1 - std::sqrt(mu);
  double best = INFINITY;
  std::size_t arg = 0;
  for (std::size_t T = 1; T <= 400; ++T) {
    // sum_t (q^(T-t) g)^(1/3) = g^(1/3) (1 - r^T) / (1 - r), r = q^(1/3).
    const double r = std::cbrt(q);
    const double sum = std::cbrt(2.0) * (1 - std::pow(r, T)) / (1 - r);
    const double v = std::pow(q, T) * 10.0 +
                     d * std::pow(s1 / (n * eps), 2) * sum * sum * sum;
    if (v < best) best = v, arg = T;
  }
  EXPECT_EQ(got.horizon, arg);
  EXPECT_NEAR(got.bound, best, 1e-10 * best);
  EXPECT_GT(got.horizon, 1u);
  EXPECT_LT(got.horizon, 400u);
}

TEST(SelectHorizonTest, LimitingCases) {
  auto build = [](std::size_t T) { return NagCoefficients(0.1, 1.0, 1.0, T); };
  EXPECT_EQ(SelectHorizon(build, 0.0, 1.0, 100, 1.0, 5, 50).horizon, 1u);
  EXPECT_EQ(SelectHorizon(build, 1.0, 1.0, 1000000000000000ULL, 1.0, 5, 50).horizon,
            50u);
  EXPECT_THROW(SelectHorizon(build, 1.0, 1.0, 100, 1.0, 5, 0), InvalidArgument);
}

TEST(WriteScheduleCsvTest, RecomputesLeaks) {
  const NoiseSchedule s = UniformScale(40.0, 1.0, 4, 100000, 1000);
  const auto path = std::filesystem::temp_directory_path() / "dpaccel_schedule.csv";
  WriteScheduleCsv(s, 40.0, 100000, 1000, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,b_t,eps_t");
  double total = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.rfind(',');
    EXPECT_EQ(std::stoi(line.substr(0, c1)), ++rows);
    EXPECT_EQ(std::stod(line.substr(c1 + 1, c2 - c1 - 1)), s[rows - 1]);
    total += std::stod(line.substr(c2 + 1));
  }
  EXPECT_EQ(rows, 4);
  EXPECT_NEAR(total, 1.0, 1e-12);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace dpaccel
