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

// Differentially private first-order methods: gradient descent, heavy ball,
// Nesterov's accelerated gradient and its multi-stage variant. Every method
// consumes one noisy (optionally subsampled) gradient per iteration; the
// noise scale of iteration t is b_t of a NoiseSchedule.

#ifndef DPACCEL_OPTIMIZERS_HPP_
#define DPACCEL_OPTIMIZERS_HPP_

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"
#include "dpaccel/objectives.hpp"
#include "dpaccel/privacy.hpp"
#include "dpaccel/rng.hpp"

namespace dpaccel {

enum class Algorithm {
  kGradientDescent,
  kHeavyBall,
  kNesterov,
  kNesterovOpt,
  kMultiStage,
  kMultiStageOpt,
};

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::kGradientDescent, Algorithm::kHeavyBall,
    Algorithm::kNesterov,        Algorithm::kNesterovOpt,
    Algorithm::kMultiStage,      Algorithm::kMultiStageOpt,
};

inline std::string_view AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kGradientDescent:
      return "DP-GD";
    case Algorithm::kHeavyBall:
      return "DP-HB";
    case Algorithm::kNesterov:
      return "DP-NAG";
    case Algorithm::kNesterovOpt:
      return "DP-NAG-opt";
    case Algorithm::kMultiStage:
      return "DP-MASG";
    case Algorithm::kMultiStageOpt:
      return "DP-MASG-opt";
  }
  return "unknown";
}

inline Algorithm ParseAlgorithm(std::string_view name) {
  if (name == "DP-SHB") return Algorithm::kHeavyBall;
  for (Algorithm a : kAllAlgorithms)
    if (AlgorithmName(a) == name) return a;
  throw InvalidArgument("unknown algorithm: " + std::string(name));
}

inline bool UsesOptimizedSchedule(Algorithm a) {
  return a == Algorithm::kNesterovOpt || a == Algorithm::kMultiStageOpt;
}

inline bool IsMultiStage(Algorithm a) {
  return a == Algorithm::kMultiStage || a == Algorithm::kMultiStageOpt;
}

// Iterate pair (x_t, x_{t-1}). Starting with x_{-1} = x_0 makes the first
// momentum term vanish.
struct OptimizerState {
  Vector x;
  Vector x_prev;
  std::size_t t = 0;

  static OptimizerState Start(Vector x0) {
    OptimizerState s;
    s.x_prev = x0;
    s.x = std::move(x0);
    return s;
  }
};

struct HyperParams {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t m = 1;
  std::size_t horizon = 0;
};

// Momentum that pairs with stepsize alpha in accelerated methods:
// (1 - sqrt(alpha mu)) / (1 + sqrt(alpha mu)).
inline double NagMomentum(double alpha, double mu) {
  const double r = std::sqrt(alpha * mu);
  return (1.0 - r) / (1.0 + r);
}

// Noisy gradient oracle: mini-batch gradient over a fresh m-of-n subsample
// plus i.i.d. Laplace(b) noise per coordinate. Randomness is drawn in a fixed
// order (subsample, then noise) from the caller's stream. A scale of zero
// switches noise off and draws nothing for it.
class NoisyGradient {
 public:
  NoisyGradient(const Objective& objective, std::size_t m, RngStream& rng)
      : objective_(objective),
        sampler_(objective.size(), m),
        rng_(rng),
        gradient_(objective.dim()),
        noise_(objective.dim()) {}

  const Objective& objective() const { return objective_; }
  std::size_t m() const { return sampler_.m(); }

  std::span<const double> operator()(std::span<const double> point, double b) {
    internal::Require(b >= 0.0, "NoisyGradient: scale must be >= 0");
    if (sampler_.full()) {
      objective_.Gradient(point, gradient_);
    } else {
      objective_.BatchGradient(point, sampler_.Draw(rng_), gradient_);
    }
    if (b > 0.0) {
      LaplaceFill(rng_, LaplaceScale(b), noise_);
      Axpy(1.0, noise_, gradient_);
    }
    return gradient_;
  }

 private:
  const Objective& objective_;
  BatchSampler sampler_;
  RngStream& rng_;
  Vector gradient_;
  Vector noise_;
};

// x_{t+1} = x_t - alpha g_t
inline void DpGdStep(OptimizerState& state, NoisyGradient& oracle,
                     double alpha, double b) {
  const auto g = oracle(state.x, b);
  state.x_prev = state.x;
  Axpy(-alpha, g, state.x);
  ++state.t;
}

// x_{t+1} = x_t - alpha g_t + beta (x_t - x_{t-1})
inline void DpShbStep(OptimizerState& state, NoisyGradient& oracle,
                      double alpha, double beta, double b) {
  internal::Require(beta >= 0.0 && beta < 1.0, "DpShbStep: need 0 <= beta < 1");
  const auto g = oracle(state.x, b);
  Vector next(state.x.size());
  for (std::size_t i = 0; i < next.size(); ++i)
    next[i] = state.x[i] - alpha * g[i] + beta * (state.x[i] - state.x_prev[i]);
  state.x_prev = std::move(state.x);
  state.x = std::move(next);
  ++state.t;
}

// z_t = (1 + beta) x_t - beta x_{t-1};  x_{t+1} = z_t - alpha g(z_t)
inline void DpNagStep(OptimizerState& state, NoisyGradient& oracle,
                      double alpha, double beta, double b) {
  Vector z(state.x.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = (1.0 + beta) * state.x[i] - beta * state.x_prev[i];
  const auto g = oracle(z, b);
  Axpy(-alpha, g, z);
  state.x_prev = std::move(state.x);
  state.x = std::move(z);
  ++state.t;
}

// Heavy ball written as a step along a geometrically weighted average of all
// noisy gradients so far:
//   u_t = beta u_{t-1} + (1 - beta) g_t,  u_0 = (1 - beta) g_0,
//   x_{t+1} = x_t - alpha / (1 - beta) u_t.
// Same iterates as DpShbStep from x_{-1} = x_0 (up to rounding).
class SmoothedHeavyBall {
 public:
  void Step(OptimizerState& state, NoisyGradient& oracle, double alpha,
            double beta, double b) {
    internal::Require(beta >= 0.0 && beta < 1.0,
                      "SmoothedHeavyBall: need 0 <= beta < 1");
    const auto g = oracle(state.x, b);
    if (average_.empty()) average_.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      average_[i] = beta * average_[i] + (1.0 - beta) * g[i];
    state.x_prev = state.x;
    Axpy(-alpha / (1.0 - beta), average_, state.x);
    ++state.t;
  }

  const Vector& average() const { return average_; }

 private:
  Vector average_;
};

// Stage lengths n_k and stepsizes alpha^(k) of the multi-stage method.
// Iterations and stages are 1-based.
struct StageSchedule {
  std::vector<std::size_t> lengths;
  std::vector<double> stepsizes;

  std::size_t stages() const { return lengths.size(); }

  std::size_t total() const {
    std::size_t sum = 0;
    for (std::size_t n : lengths) sum += n;
    return sum;
  }

  // Stage containing iteration i; iteration 0 belongs to stage 1.
  std::size_t StageOf(std::size_t iteration) const {
    std::size_t end = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      end += lengths[k];
      if (iteration <= end) return k + 1;
    }
    throw InvalidArgument("StageSchedule: iteration past the last stage");
  }

  // Prefix of the schedule covering exactly `horizon` iterations.
  StageSchedule Truncated(std::size_t horizon) const {
    internal::Require(horizon <= total(), "StageSchedule: horizon too long");
    StageSchedule out;
    std::size_t left = horizon;
    for (std::size_t k = 0; k < lengths.size() && left > 0; ++k) {
      const std::size_t take = std::min(left, lengths[k]);
      out.lengths.push_back(take);
      out.stepsizes.push_back(stepsizes[k]);
      left -= take;
    }
    return out;
  }
};

// ceil(sqrt(kappa) ln(2^(p+2))): n_k = 2^k times this for k >= 2.
inline std::size_t MasgStageUnit(double kappa, int p) {
  internal::Require(kappa >= 1.0 && p >= 1, "MasgStageUnit: need kappa>=1, p>=1");
  return static_cast<std::size_t>(
      std::ceil(std::sqrt(kappa) * static_cast<double>(p + 2) * std::log(2.0)));
}

// Stages n_1 = first_stage (the stage unit when zero), n_k = 2^k unit for
// k >= 2, with stepsizes c/L and c/(2^(2k) L), truncated to `horizon`.
inline StageSchedule MakeMasgStages(double mu, double L, double c,
                                    std::size_t horizon, int p = 1,
                                    std::size_t first_stage = 0) {
  internal::Require(mu > 0.0 && L >= mu, "MakeMasgStages: need 0 < mu <= L");
  internal::Require(c > 0.0 && c <= 1.0, "MakeMasgStages: need 0 < c <= 1");
  const std::size_t unit = MasgStageUnit(L / mu, p);
  StageSchedule full;
  full.lengths.push_back(first_stage == 0 ? unit : first_stage);
  full.stepsizes.push_back(c / L);
  for (int k = 2; full.total() < horizon; ++k) {
    full.lengths.push_back((std::size_t{1} << k) * unit);
    full.stepsizes.push_back(c / (std::ldexp(1.0, 2 * k) * L));
  }
  return full.Truncated(horizon);
}

struct TraceRecord {
  std::size_t t = 0;
  double subopt = 0.0;
  double eps_cum = 0.0;
};

struct Trace {
  Algorithm algorithm = Algorithm::kGradientDescent;
  HyperParams params;
  double c = 1.0;
  std::size_t requested_horizon = 0;
  std::uint64_t seed = 0;
  ScheduleProvenance provenance = ScheduleProvenance::kUniform;
  double f_star = 0.0;
  double epsilon = 0.0;
  std::size_t n = 0;
  std::string objective_tag;
  double wall_seconds = 0.0;
  std::vector<TraceRecord> records;
  std::vector<Vector> iterates;

  double final_subopt() const { return records.back().subopt; }
  double final_eps() const { return records.back().eps_cum; }
};

struct RunSpec {
  Algorithm algorithm = Algorithm::kGradientDescent;
  HyperParams params;
  // Required for the multi-stage methods; stage stepsizes override alpha.
  std::optional<StageSchedule> stages;
  bool keep_iterates = false;
};

// Runs params.horizon iterations, charging EpsilonOf(S1, b_t, n, m) to
// `account` after every release. Records (t, F(x_t) - f_star, cumulative
// leak) for t = 0..horizon.
inline Trace Run(const RunSpec& spec, const Objective& objective,
                 const NoiseSchedule& schedule, PrivacyAccount& account,
                 RngStream& rng, Vector x0, double f_star) {
  const HyperParams& hp = spec.params;
  internal::Require(x0.size() == objective.dim(), "Run: dimension mismatch");
  internal::Require(schedule.size() == hp.horizon,
                    "Run: schedule length must equal the horizon");
  internal::Require(account.n() == objective.size() && account.m() == hp.m,
                    "Run: account sizes disagree with the run");
  const double s1 = objective.sensitivity();
  const std::size_t n = objective.size();
  if (hp.horizon > 0 &&
      ComposedLeak(schedule, s1, n, hp.m) >
          account.remaining() + kBudgetTolerance)
    throw BudgetExceeded("Run: schedule leaks more than the remaining budget");
  if (IsMultiStage(spec.algorithm)) {
    internal::Require(spec.stages.has_value() &&
                          spec.stages->total() == hp.horizon,
                      "Run: multi-stage methods need stages covering horizon");
  }

  const auto started = std::chrono::steady_clock::now();
  Trace trace;
  trace.algorithm = spec.algorithm;
  trace.params = hp;
  trace.requested_horizon = hp.horizon;
  trace.seed = rng.seed();
  trace.provenance = schedule.provenance;
  trace.f_star = f_star;
  trace.epsilon = account.epsilon_total();
  trace.n = n;
  trace.records.reserve(hp.horizon + 1);

  OptimizerState state = OptimizerState::Start(std::move(x0));
  NoisyGradient oracle(objective, hp.m, rng);
  auto record = [&] {
    trace.records.push_back(
        {state.t, objective.Value(state.x) - f_star, account.total_spent()});
    if (spec.keep_iterates) trace.iterates.push_back(state.x);
  };
  record();

  for (std::size_t k = 0; k < hp.horizon; ++k) {
    const double b = schedule[k];
    internal::Require(b > 0.0, "Run: noise scales must be > 0");
    switch (spec.algorithm) {
      case Algorithm::kGradientDescent:
        DpGdStep(state, oracle, hp.alpha, b);
        break;
      case Algorithm::kHeavyBall:
        DpShbStep(state, oracle, hp.alpha, hp.beta, b);
        break;
      case Algorithm::kNesterov:
      case Algorithm::kNesterovOpt:
        DpNagStep(state, oracle, hp.alpha, hp.beta, b);
        break;
      case Algorithm::kMultiStage:
      case Algorithm::kMultiStageOpt: {
        const double alpha =
            spec.stages->stepsizes[spec.stages->StageOf(k + 1) - 1];
        DpNagStep(state, oracle, alpha, NagMomentum(alpha, objective.mu()), b);
        break;
      }
    }
    account.Spend(EpsilonOf(s1, b, n, hp.m));
    record();
  }
  trace.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  return trace;
}

// Shortest decimal form of a grid value, e.g. 0.1 or 1.
inline std::string FormatGridValue(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// <algo>_<m>_<T>_<c>_<seed>
inline std::string TraceFileStem(Algorithm a, std::size_t m, std::size_t horizon,
                                 double c, std::uint64_t seed) {
  std::ostringstream os;
  os << AlgorithmName(a) << '_' << m << '_' << horizon << '_'
     << FormatGridValue(c) << '_' << seed;
  return os.str();
}

inline void WriteTraceCsv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << "t,subopt,eps_cum\n" << std::setprecision(17);
  for (const TraceRecord& r : trace.records)
    out << r.t << ',' << r.subopt << ',' << r.eps_cum << '\n';
}

inline nlohmann::json TraceMetadata(const Trace& trace) {
  return {{"algorithm", AlgorithmName(trace.algorithm)},
          {"alpha", trace.params.alpha},
          {"beta", trace.params.beta},
          {"m", trace.params.m},
          {"T", trace.requested_horizon},
          {"T_effective", trace.params.horizon},
          {"c", trace.c},
          {"seed", trace.seed},
          {"schedule", ToString(trace.provenance)},
          {"f_star", trace.f_star},
          {"epsilon", trace.epsilon},
          {"n", trace.n},
          {"objective", trace.objective_tag},
          {"wall_seconds", trace.wall_seconds}};
}

inline void WriteTraceMetadata(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << TraceMetadata(trace).dump(2) << '\n';
}

// Inverse of WriteTraceCsv + WriteTraceMetadata.
inline Trace ReadTrace(const std::string& csv_path,
                       const std::string& metadata_path) {
  std::ifstream meta_in(metadata_path);
  if (!meta_in) throw InvalidArgument("cannot open " + metadata_path);
  const nlohmann::json meta = nlohmann::json::parse(meta_in);
  Trace trace;
  trace.algorithm = ParseAlgorithm(meta.at("algorithm").get<std::string>());
  trace.params.alpha = meta.at("alpha").get<double>();
  trace.params.beta = meta.at("beta").get<double>();
  trace.params.m = meta.at("m").get<std::size_t>();
  trace.requested_horizon = meta.at("T").get<std::size_t>();
  trace.params.horizon = meta.at("T_effective").get<std::size_t>();
  trace.c = meta.at("c").get<double>();
  trace.seed = meta.at("seed").get<std::uint64_t>();
  const std::string provenance = meta.at("schedule").get<std::string>();
  for (auto p : {ScheduleProvenance::kUniform, ScheduleProvenance::kOptimized,
                 ScheduleProvenance::kOptimizedRescaled})
    if (ToString(p) == provenance) trace.provenance = p;
  trace.f_star = meta.at("f_star").get<double>();
  trace.epsilon = meta.at("epsilon").get<double>();
  trace.n = meta.at("n").get<std::size_t>();
  trace.objective_tag = meta.at("objective").get<std::string>();
  trace.wall_seconds = meta.value("wall_seconds", 0.0);

  std::ifstream in(csv_path);
  if (!in) throw InvalidArgument("cannot open " + csv_path);
  std::string line;
  std::getline(in, line);
  internal::Require(line == "t,subopt,eps_cum", "trace csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, s, e;
    std::getline(ss, t, ',');
    std::getline(ss, s, ',');
    std::getline(ss, e, ',');
    trace.records.push_back({std::stoul(t), std::stod(s), std::stod(e)});
  }
  internal::Require(!trace.records.empty(), "trace csv: no records");
  return trace;
}

}  // namespace dpaccel

#endif  // DPACCEL_OPTIMIZERS_HPP_
