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

#include "dpaccel/optimizers.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "dpaccel/objectives.hpp"
#include "dpaccel/privacy.hpp"
#include "dpaccel/rng.hpp"

namespace dpaccel {
namespace {

QuadraticObjective Scalar(double q) {
  return QuadraticObjective(Matrix::Diagonal(Vector{q}), Vector{0.0});
}

// Runs `steps` noise-free iterations of `step` from x0 and returns x_1..x_k.
template <typename Step>
std::vector<double> Trajectory1d(const Objective& f, double x0, int steps,
                                 Step step) {
  RngStream rng(0);
  NoisyGradient oracle(f, 1, rng);
  OptimizerState s = OptimizerState::Start(Vector{x0});
  std::vector<double> xs;
  for (int k = 0; k < steps; ++k) {
    step(s, oracle);
    xs.push_back(s.x[0]);
  }
  return xs;
}

LogisticObjective SmallLogistic() {
  return LogisticObjective(GenerateSynthetic(5, 200, 4.0, 3), 0.05);
}

TEST(AlgorithmTest, NamesRoundTrip) {
  for (Algorithm a : kAllAlgorithms) EXPECT_EQ(ParseAlgorithm(AlgorithmName(a)), a);
  EXPECT_EQ(ParseAlgorithm("DP-SHB"), Algorithm::kHeavyBall);
  EXPECT_THROW(ParseAlgorithm("DP-ADAM"), InvalidArgument);
  EXPECT_TRUE(UsesOptimizedSchedule(Algorithm::kMultiStageOpt));
  EXPECT_FALSE(UsesOptimizedSchedule(Algorithm::kNesterov));
  EXPECT_TRUE(IsMultiStage(Algorithm::kMultiStage));
}

TEST(NagMomentumTest, Formula) {
  EXPECT_DOUBLE_EQ(NagMomentum(1.0, 0.25), 1.0 / 3.0);
}

TEST(DpGdStepTest, HandRecursion) {
  const auto f = Scalar(1.0);
  const auto xs = Trajectory1d(f, 1.0, 2, [](auto& s, auto& o) {
    DpGdStep(s, o, 0.5, 0.0);
  });
  EXPECT_DOUBLE_EQ(xs[0], 0.5);
  EXPECT_DOUBLE_EQ(xs[1], 0.25);
}

TEST(DpGdStepTest, ContractsAtClassicalRate) {
  const QuadraticObjective f(Matrix::Diagonal(Vector{0.2, 0.7, 1.0}),
                             Vector{0.3, -0.1, 0.5});
  const Vector star = f.Minimizer();
  RngStream rng(0);
  NoisyGradient oracle(f, 1, rng);
  OptimizerState s = OptimizerState::Start(Vector{3.0, -2.0, 1.0});
  for (int k = 0; k < 30; ++k) {
    const double before = Norm2(Subtract(s.x, star));
    DpGdStep(s, oracle, 1.0 / f.L(), 0.0);
    EXPECT_LE(Norm2(Subtract(s.x, star)), (1 - f.mu() / f.L()) * before + 1e-15);
  }
}

TEST(DpShbStepTest, HandRecursion) {
  const auto f = Scalar(1.0);
  const auto xs = Trajectory1d(f, 1.0, 3, [](auto& s, auto& o) {
    DpShbStep(s, o, 1.0, 0.5, 0.0);
  });
  EXPECT_DOUBLE_EQ(xs[0], 0.0);
  EXPECT_DOUBLE_EQ(xs[1], -0.5);
  EXPECT_DOUBLE_EQ(xs[2], -0.25);
}

TEST(DpShbStepTest, RejectsMomentumOutsideUnitInterval) {
  const auto f = Scalar(1.0);
  RngStream rng(0);
  NoisyGradient oracle(f, 1, rng);
  OptimizerState s = OptimizerState::Start(Vector{1.0});
  EXPECT_THROW(DpShbStep(s, oracle, 0.1, 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(DpShbStep(s, oracle, 0.1, -0.1, 0.0), InvalidArgument);
}

TEST(DpNagStepTest, HandRecursion) {
  const auto unit = Scalar(1.0);
  const auto xs = Trajectory1d(unit, 1.0, 3, [](auto& s, auto& o) {
    DpNagStep(s, o, 1.0, 1.0 / 3.0, 0.0);
  });
  for (double x : xs) EXPECT_DOUBLE_EQ(x, 0.0);

  // lambda = 1/2: z0 = 1, x1 = 1/2; z1 = 1/3, x2 = 1/6; z2 = 1/18, x3 = 1/36.
  const auto half = Scalar(0.5);
  const auto ys = Trajectory1d(half, 1.0, 3, [](auto& s, auto& o) {
    DpNagStep(s, o, 1.0, 1.0 / 3.0, 0.0);
  });
  EXPECT_NEAR(ys[0], 0.5, 1e-15);
  EXPECT_NEAR(ys[1], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(ys[2], 1.0 / 36.0, 1e-15);
}

// beta = 0 collapses heavy ball and Nesterov onto gradient descent under a
// shared noise stream.
TEST(ReductionTest, ZeroMomentumIsGradientDescent) {
  const LogisticObjective f = SmallLogistic();
  RngStream r0(9), r1(9), r2(9);
  NoisyGradient o0(f, 20, r0), o1(f, 20, r1), o2(f, 20, r2);
  OptimizerState gd = OptimizerState::Start(Vector(5, 0.1));
  OptimizerState hb = gd, nag = gd;
  for (int k = 0; k < 50; ++k) {
    DpGdStep(gd, o0, 0.3, 0.2);
    DpShbStep(hb, o1, 0.3, 0.0, 0.2);
    DpNagStep(nag, o2, 0.3, 0.0, 0.2);
    for (int j = 0; j < 5; ++j) {
      EXPECT_NEAR(hb.x[j], gd.x[j], 1e-12);
      EXPECT_NEAR(nag.x[j], gd.x[j], 1e-12);
    }
  }
}

TEST(NoisyGradientTest, DrawsSubsampleThenNoise) {
  const LogisticObjective f = SmallLogistic();
  const Vector x(5, 0.2);
  RngStream a(21), b(21);
  NoisyGradient first(f, 10, a);
  const auto g = first(x, 0.7);
  const Vector first_value(g.begin(), g.end());
  BatchSampler sampler(f.size(), 10);
  Vector want = MinibatchGradient(f, x, sampler.Draw(b));
  const Vector noise = LaplaceSample(b, LaplaceScale(0.7), 5);
  Axpy(1.0, noise, want);
  EXPECT_EQ(first_value, want);
  EXPECT_EQ(a.counter(), b.counter());
}

TEST(NoisyGradientTest, ZeroScaleIsExactAndDrawsNothing) {
  const LogisticObjective f = SmallLogistic();
  RngStream rng(1);
  NoisyGradient oracle(f, f.size(), rng);
  const Vector x(5, -0.4);
  const auto g = oracle(x, 0.0);
  EXPECT_EQ(Vector(g.begin(), g.end()), FullGradient(f, x));
  EXPECT_EQ(rng.counter(), 0u);
  EXPECT_THROW(oracle(x, -1.0), InvalidArgument);
}

TEST(SmoothedHeavyBallTest, MatchesHeavyBallIterates) {
  const LogisticObjective f = SmallLogistic();
  RngStream pick(4);
  for (int trial = 0; trial < 10; ++trial) {
    const double alpha = pick.Uniform(0.05, 1.0) / f.L();
    const double beta = pick.Uniform(0.0, 0.9);
    RngStream ra(100 + trial), rb(100 + trial);
    NoisyGradient oa(f, 15, ra), ob(f, 15, rb);
    OptimizerState sa = OptimizerState::Start(Vector(5, 1.0)), sb = sa;
    SmoothedHeavyBall smoothed;
    for (int k = 0; k < 100; ++k) {
      DpShbStep(sa, oa, alpha, beta, 0.1);
      smoothed.Step(sb, ob, alpha, beta, 0.1);
      for (int j = 0; j < 5; ++j) ASSERT_NEAR(sa.x[j], sb.x[j], 1e-10);
    }
  }
}

TEST(StageScheduleTest, MultiStageArithmetic) {
  EXPECT_EQ(MasgStageUnit(20.0, 1), 10u);
  const StageSchedule s = MakeMasgStages(1.0, 20.0, 1.0, 130);
  ASSERT_EQ(s.stages(), 3u);
  EXPECT_EQ(s.lengths, (std::vector<std::size_t>{10, 40, 80}));
  EXPECT_DOUBLE_EQ(s.stepsizes[0], 1.0 / 20.0);
  EXPECT_DOUBLE_EQ(s.stepsizes[1], 1.0 / (16.0 * 20.0));
  EXPECT_DOUBLE_EQ(s.stepsizes[2], 1.0 / (64.0 * 20.0));
  EXPECT_EQ(s.StageOf(10), 1u);
  EXPECT_EQ(s.StageOf(11), 2u);
  EXPECT_EQ(s.StageOf(50), 2u);
  EXPECT_EQ(s.StageOf(51), 3u);
  EXPECT_THROW(s.StageOf(131), InvalidArgument);
}

TEST(StageScheduleTest, TruncatesToHorizon) {
  const StageSchedule s = MakeMasgStages(1.0, 20.0, 0.5, 25);
  EXPECT_EQ(s.lengths, (std::vector<std::size_t>{10, 15}));
  EXPECT_EQ(s.total(), 25u);
  EXPECT_EQ(MakeMasgStages(1.0, 20.0, 0.5, 7).lengths,
            (std::vector<std::size_t>{7}));
  EXPECT_EQ(MakeMasgStages(1.0, 20.0, 0.5, 12, 1, 4).lengths,
            (std::vector<std::size_t>{4, 8}));
  EXPECT_THROW(MakeMasgStages(1.0, 20.0, 1.5, 10), InvalidArgument);
}

Trace RunWith(const RunSpec& spec, const Objective& f, std::uint64_t seed,
              double epsilon = 1.0) {
  const NoiseSchedule schedule = UniformScale(
      f.sensitivity(), epsilon, spec.params.horizon, f.size(), spec.params.m);
  PrivacyAccount acct(epsilon, std::max<std::size_t>(1, spec.params.horizon),
                      f.size(), spec.params.m);
  RngStream rng(seed);
  return dpaccel::Run(spec, f, schedule, acct, rng, Vector(f.dim(), 0.0), 0.0);
}

// Multi-stage run against a hand-written loop that switches (alpha, beta)
// at the stage boundaries and carries (x, x_prev) across them.
TEST(RunTest, MultiStageMatchesDirectLoop) {
  const LogisticObjective f = SmallLogistic();
  const double c = 1.0;
  RunSpec spec;
  spec.algorithm = Algorithm::kMultiStage;
  spec.params = {c / f.L(), 0.0, 20, 0};
  const std::size_t unit = MasgStageUnit(f.L() / f.mu(), 1);
  spec.params.horizon = unit + 4 * unit + 5;
  spec.stages = MakeMasgStages(f.mu(), f.L(), c, spec.params.horizon);
  spec.keep_iterates = true;
  ASSERT_EQ(spec.stages->stages(), 3u);
  const Trace trace = RunWith(spec, f, 31);

  const NoiseSchedule schedule = UniformScale(f.sensitivity(), 1.0,
                                              spec.params.horizon, f.size(), 20);
  RngStream rng(31);
  NoisyGradient oracle(f, 20, rng);
  OptimizerState s = OptimizerState::Start(Vector(f.dim(), 0.0));
  std::size_t t = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double alpha = k == 0 ? c / f.L() : c / (std::pow(4.0, k + 1) * f.L());
    const double beta = (1 - std::sqrt(alpha * f.mu())) / (1 + std::sqrt(alpha * f.mu()));
    for (std::size_t j = 0; j < spec.stages->lengths[k]; ++j, ++t) {
      DpNagStep(s, oracle, alpha, beta, schedule[t]);
      ASSERT_EQ(trace.iterates[t + 1], s.x) << "iteration " << t + 1;
    }
  }
}

TEST(RunTest, SingleStageEqualsNesterov) {
  const LogisticObjective f = SmallLogistic();
  const double alpha = 0.8 / f.L();
  RunSpec nag;
  nag.algorithm = Algorithm::kNesterov;
  nag.params = {alpha, NagMomentum(alpha, f.mu()), 25, 6};
  nag.keep_iterates = true;
  RunSpec masg = nag;
  masg.algorithm = Algorithm::kMultiStage;
  masg.stages = MakeMasgStages(f.mu(), f.L(), 0.8, 6);
  ASSERT_EQ(masg.stages->stages(), 1u);
  const Trace a = RunWith(nag, f, 5), b = RunWith(masg, f, 5);
  EXPECT_EQ(a.iterates, b.iterates);
}

TEST(RunTest, RecordsAndAccounting) {
  const LogisticObjective f = SmallLogistic();
  for (Algorithm algo : kAllAlgorithms) {
    RunSpec spec;
    spec.algorithm = algo;
    spec.params = {0.5 / f.L(), NagMomentum(0.5 / f.L(), f.mu()), 40, 30};
    if (IsMultiStage(algo)) spec.stages = MakeMasgStages(f.mu(), f.L(), 0.5, 30);
    const Trace trace = RunWith(spec, f, 8, 0.7);
    ASSERT_EQ(trace.records.size(), 31u);
    EXPECT_EQ(trace.records.front().eps_cum, 0.0);
    for (std::size_t t = 1; t < trace.records.size(); ++t) {
      EXPECT_EQ(trace.records[t].t, t);
      EXPECT_GE(trace.records[t].eps_cum, trace.records[t - 1].eps_cum);
    }
    EXPECT_NEAR(trace.final_eps(), 0.7, 1e-9);
    EXPECT_EQ(trace.seed, 8u);
    EXPECT_EQ(trace.provenance, ScheduleProvenance::kUniform);
  }
}

TEST(RunTest, ZeroHorizonKeepsOnlyInitialRecord) {
  const LogisticObjective f = SmallLogistic();
  RunSpec spec;
  spec.algorithm = Algorithm::kNesterov;
  spec.params = {0.5 / f.L(), 0.5, 10, 0};
  PrivacyAccount acct(1.0, 1, f.size(), 10);
  RngStream rng(1);
  const Trace trace = dpaccel::Run(spec, f, NoiseSchedule{}, acct, rng,
                          Vector(f.dim(), 0.0), 0.0);
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.records[0].t, 0u);
}

TEST(RunTest, DeterministicPerSeed) {
  const LogisticObjective f = SmallLogistic();
  RunSpec spec;
  spec.algorithm = Algorithm::kHeavyBall;
  spec.params = {0.5 / f.L(), 0.6, 15, 40};
  const Trace a = RunWith(spec, f, 77), b = RunWith(spec, f, 77),
              c = RunWith(spec, f, 78);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t)
    EXPECT_EQ(a.records[t].subopt, b.records[t].subopt);
  EXPECT_NE(a.final_subopt(), c.final_subopt());
}

TEST(RunTest, RejectsOverspendingSchedule) {
  const LogisticObjective f = SmallLogistic();
  RunSpec spec;
  spec.algorithm = Algorithm::kGradientDescent;
  spec.params = {0.5 / f.L(), 0.0, f.size(), 10};
  const NoiseSchedule loud = UniformScale(f.sensitivity(), 2.0, 10, f.size(), f.size());
  PrivacyAccount acct(1.0, 10, f.size(), f.size());
  RngStream rng(1);
  EXPECT_THROW(dpaccel::Run(spec, f, loud, acct, rng, Vector(f.dim(), 0.0), 0.0),
               BudgetExceeded);
}

TEST(RunTest, RejectsMismatchedInputs) {
  const LogisticObjective f = SmallLogistic();
  RunSpec spec;
  spec.algorithm = Algorithm::kMultiStage;
  spec.params = {0.5 / f.L(), 0.0, f.size(), 10};
  const NoiseSchedule s = UniformScale(f.sensitivity(), 1.0, 10, f.size(), f.size());
  PrivacyAccount acct(1.0, 10, f.size(), f.size());
  RngStream rng(1);
  EXPECT_THROW(dpaccel::Run(spec, f, s, acct, rng, Vector(f.dim(), 0.0), 0.0),
               InvalidArgument);  // no stages
  spec.algorithm = Algorithm::kGradientDescent;
  EXPECT_THROW(dpaccel::Run(spec, f, s, acct, rng, Vector(2, 0.0), 0.0), InvalidArgument);
  PrivacyAccount wrong_m(1.0, 10, f.size(), 3);
  EXPECT_THROW(dpaccel::Run(spec, f, s, wrong_m, rng, Vector(f.dim(), 0.0), 0.0),
               InvalidArgument);
}

// With noise on, the 200-seed mean suboptimality of Nesterov on a quadratic
// stays below the accumulated bound
//   E_T <= q^T E_0 + sum_t q^(T-t) alpha (1 + alpha L) d b_t^2,
// with E_0 = F(x_0) - F* + mu/2 |x_0 - x*|^2.
TEST(RunTest, NesterovMeanBelowAccumulatedBound) {
  const QuadraticObjective f(Matrix::Diagonal(Vector{0.1, 1.0}),
                             Vector{0.5, -0.5}, 0.0, 1.0);
  const Vector star = f.Minimizer();
  const double alpha = 1.0 / f.L();
  const double beta = NagMomentum(alpha, f.mu());
  const double q = 1 - std::sqrt(f.mu() * alpha);
  const double b = 0.05;
  const Vector x0 = {2.0, 2.0};
  const Vector e = Subtract(x0, star);
  const double e0 = f.Suboptimality(x0) + f.mu() / 2 * Dot(e, e);
  const int T = 60, seeds = 200;
  std::vector<double> mean(T + 1, 0.0);
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(1000 + s);
    NoisyGradient oracle(f, 1, rng);
    OptimizerState st = OptimizerState::Start(x0);
    for (int t = 1; t <= T; ++t) {
      DpNagStep(st, oracle, alpha, beta, b);
      mean[t] += f.Suboptimality(st.x) / seeds;
    }
  }
  double bound = e0;
  for (int t = 1; t <= T; ++t) {
    bound = q * bound + alpha * (1 + alpha * f.L()) * 2 * b * b;
    EXPECT_LE(mean[t], bound) << "t = " << t;
  }
}

TEST(TraceIoTest, NamingAndRoundTrip) {
  EXPECT_EQ(FormatGridValue(0.1), "0.1");
  EXPECT_EQ(FormatGridValue(1.0), "1");
  EXPECT_EQ(TraceFileStem(Algorithm::kNesterovOpt, 100, 500, 0.1, 7),
            "DP-NAG-opt_100_500_0.1_7");

  const LogisticObjective f = SmallLogistic();
  RunSpec spec;
  spec.algorithm = Algorithm::kNesterov;
  spec.params = {0.5 / f.L(), 0.4, 20, 12};
  Trace trace = RunWith(spec, f, 3);
  trace.c = 0.5;
  trace.objective_tag = "unit";
  const auto dir = std::filesystem::temp_directory_path() / "dpaccel_trace_io";
  std::filesystem::create_directories(dir);
  const std::string csv = (dir / "t.csv").string(), meta = (dir / "t.json").string();
  WriteTraceCsv(trace, csv);
  WriteTraceMetadata(trace, meta);
  const Trace back = ReadTrace(csv, meta);
  EXPECT_EQ(back.algorithm, trace.algorithm);
  EXPECT_EQ(back.params.m, 20u);
  EXPECT_EQ(back.params.horizon, 12u);
  EXPECT_EQ(back.params.alpha, trace.params.alpha);
  EXPECT_EQ(back.c, 0.5);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.objective_tag, "unit");
  ASSERT_EQ(back.records.size(), trace.records.size());
  for (std::size_t t = 0; t < back.records.size(); ++t) {
    EXPECT_EQ(back.records[t].subopt, trace.records[t].subopt);
    EXPECT_EQ(back.records[t].eps_cum, trace.records[t].eps_cum);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dpaccel
