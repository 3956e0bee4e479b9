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

// Experiment orchestration: configuration, the (algorithm, m, T, c) grid
// over replicate seeds, seed-averaged summaries and CSV/JSON/SVG output.

#ifndef DPACCEL_HARNESS_HPP_
#define DPACCEL_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "dpaccel/budget.hpp"
#include "dpaccel/errors.hpp"
#include "dpaccel/linalg.hpp"
#include "dpaccel/objectives.hpp"
#include "dpaccel/optimizers.hpp"
#include "dpaccel/privacy.hpp"
#include "dpaccel/rng.hpp"

namespace dpaccel {

struct ObjectiveSpec {
  std::string type = "logistic";
  // logistic
  std::size_t d = 20;
  std::size_t n = 10000;
  double u_max = 20.0;
  double lambda = 0.01;
  std::uint64_t data_seed = 1;
  std::string dataset_path;
  std::string metadata_path;
  // quadratic: F(x) = 1/2 x'Qx + a'x + b, one term per entry of a_terms
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> a_terms;
  double b = 0.0;
  double sensitivity = 1.0;
};

struct ExperimentConfig {
  ObjectiveSpec objective;
  double epsilon = 1.0;
  std::vector<std::size_t> m;  // empty: {n / 100, n}
  std::vector<std::size_t> horizons = {100, 200, 500, 1000};
  std::vector<double> c = {0.1, 1.0};
  std::size_t replicates = 20;
  std::vector<std::uint64_t> seeds;  // overrides seed_base + replicates
  std::uint64_t seed_base = 1000;
  std::vector<Algorithm> algorithms = {std::begin(kAllAlgorithms),
                                       std::end(kAllAlgorithms)};
  double e0_guess = 10.0;
  int masg_p = 1;
  std::size_t masg_first_stage = 0;  // 0: the stage unit
  Vector x0;                         // empty: zero vector
  std::size_t reference_iterations = 1000;
  std::size_t workers = 1;
  std::string output_dir = "out";
  bool write_traces = true;
  bool write_svg = false;

  std::vector<std::uint64_t> SeedList() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (std::size_t r = 0; r < replicates; ++r) out.push_back(seed_base + r);
    return out;
  }

  std::vector<std::size_t> SubsampleSizes(std::size_t n) const {
    if (!m.empty()) return m;
    return {std::max<std::size_t>(1, n / 100), n};
  }

  void Validate(std::size_t n) const {
    internal::Require(epsilon > 0.0, "config: epsilon must be > 0");
    internal::Require(!horizons.empty() && !c.empty() && !algorithms.empty(),
                      "config: grid dimensions must be non-empty");
    internal::Require(!SeedList().empty(), "config: need at least one seed");
    for (std::size_t mm : SubsampleSizes(n))
      internal::Require(mm >= 1 && mm <= n, "config: need 1 <= m <= n");
    for (double cc : c)
      internal::Require(cc > 0.0 && cc <= 1.0, "config: need 0 < c <= 1");
    for (std::size_t t : horizons)
      internal::Require(t >= 1, "config: horizons must be >= 1");
    internal::Require(e0_guess > 0.0, "config: E0 guess must be > 0");
  }

  // Every field is optional; missing fields keep the defaults above.
  static ExperimentConfig FromJson(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("objective")) {
      const auto& o = j.at("objective");
      ObjectiveSpec& s = cfg.objective;
      s.type = o.value("type", s.type);
      s.d = o.value("d", s.d);
      s.n = o.value("n", s.n);
      s.u_max = o.value("u_max", s.u_max);
      s.lambda = o.value("lambda", s.lambda);
      s.data_seed = o.value("data_seed", s.data_seed);
      s.dataset_path = o.value("dataset_path", s.dataset_path);
      s.metadata_path = o.value("metadata_path", s.metadata_path);
      s.q = o.value("Q", s.q);
      if (o.contains("a")) s.a_terms = {o.at("a").get<std::vector<double>>()};
      s.a_terms = o.value("a_terms", s.a_terms);
      s.b = o.value("b", s.b);
      s.sensitivity = o.value("S1", s.sensitivity);
      internal::Require(s.type == "logistic" || s.type == "quadratic",
                        "config: objective.type must be logistic|quadratic");
    }
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.m = j.value("m", cfg.m);
    cfg.horizons = j.value("T", cfg.horizons);
    cfg.c = j.value("c", cfg.c);
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.seed_base = j.value("seed_base", cfg.seed_base);
    if (j.contains("algorithms")) {
      cfg.algorithms.clear();
      for (const auto& name : j.at("algorithms"))
        cfg.algorithms.push_back(ParseAlgorithm(name.get<std::string>()));
    }
    cfg.e0_guess = j.value("E0_guess", cfg.e0_guess);
    cfg.masg_p = j.value("masg_p", cfg.masg_p);
    cfg.masg_first_stage = j.value("masg_first_stage", cfg.masg_first_stage);
    cfg.x0 = j.value("x0", cfg.x0);
    cfg.reference_iterations =
        j.value("reference_iterations", cfg.reference_iterations);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.write_traces = j.value("write_traces", cfg.write_traces);
    cfg.write_svg = j.value("write_svg", cfg.write_svg);
    return cfg;
  }

  static ExperimentConfig FromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path);
    return FromJson(nlohmann::json::parse(in));
  }
};

inline std::unique_ptr<Objective> BuildObjective(const ObjectiveSpec& spec) {
  if (spec.type == "quadratic") {
    internal::Require(!spec.q.empty() && !spec.a_terms.empty(),
                      "quadratic objective needs Q and a or a_terms");
    return std::make_unique<QuadraticObjective>(
        Matrix::FromRows(spec.q), spec.a_terms, spec.b, spec.sensitivity);
  }
  Dataset data = spec.dataset_path.empty()
                     ? GenerateSynthetic(spec.d, spec.n, spec.u_max,
                                         spec.data_seed)
                     : ReadDatasetCsv(spec.dataset_path, spec.metadata_path);
  return std::make_unique<LogisticObjective>(std::move(data), spec.lambda);
}

inline std::string ObjectiveTag(const ObjectiveSpec& spec) {
  std::ostringstream os;
  if (spec.type == "quadratic") {
    os << "quadratic:d=" << spec.q.size() << ",n=" << spec.a_terms.size();
  } else if (!spec.dataset_path.empty()) {
    os << "logistic:path=" << spec.dataset_path << ",lambda=" << spec.lambda;
  } else {
    os << "logistic:d=" << spec.d << ",n=" << spec.n << ",u_max=" << spec.u_max
       << ",lambda=" << spec.lambda << ",seed=" << spec.data_seed;
  }
  return os.str();
}

struct ReferenceOptimum {
  Vector x_star;
  double f_star = 0.0;
  double gradient_norm = 0.0;
};

// Noise-free full-gradient Nesterov run with alpha = 1/L from the origin.
inline ReferenceOptimum ComputeReferenceOptimum(const Objective& objective,
                                                std::size_t iterations = 1000) {
  const double alpha = 1.0 / objective.L();
  const double beta = NagMomentum(alpha, objective.mu());
  RngStream unused(0);
  NoisyGradient oracle(objective, objective.size(), unused);
  OptimizerState state = OptimizerState::Start(Vector(objective.dim(), 0.0));
  for (std::size_t k = 0; k < iterations; ++k)
    DpNagStep(state, oracle, alpha, beta, 0.0);
  ReferenceOptimum out;
  out.x_star = state.x;
  out.f_star = objective.Value(state.x);
  out.gradient_norm = Norm2(FullGradient(objective, state.x));
  return out;
}

// Hyperparameters, stages and noise schedule for one grid cell.
struct PlannedRun {
  RunSpec spec;
  NoiseSchedule schedule;
  std::size_t requested_horizon = 0;
  double c = 1.0;
};

// alpha = c/L for every method. Heavy ball and Nesterov use the momentum
// (1 - sqrt(alpha mu)) / (1 + sqrt(alpha mu)); gradient descent uses none.
// Uniform methods spend epsilon/T per step; the -opt methods first pick
// T_eff <= T by minimizing the optimized bound with the E0 guess, then use
// the closed-form allocation, rescaled when m < n.
inline PlannedRun PlanRun(Algorithm algorithm, const Objective& objective,
                          std::size_t m, std::size_t horizon, double c,
                          const ExperimentConfig& cfg) {
  const double mu = objective.mu(), L = objective.L();
  const double s1 = objective.sensitivity();
  const std::size_t n = objective.size();
  PlannedRun plan;
  plan.requested_horizon = horizon;
  plan.c = c;
  plan.spec.algorithm = algorithm;
  HyperParams& hp = plan.spec.params;
  hp.alpha = c / L;
  hp.m = m;
  hp.beta = algorithm == Algorithm::kGradientDescent
                ? 0.0
                : NagMomentum(hp.alpha, mu);
  hp.horizon = horizon;

  auto stages_for = [&](std::size_t t) {
    return MakeMasgStages(mu, L, c, t, cfg.masg_p, cfg.masg_first_stage);
  };
  if (UsesOptimizedSchedule(algorithm)) {
    CoefficientBuilder build;
    if (IsMultiStage(algorithm))
      build = [&](std::size_t t) { return MasgCoefficients(mu, L, stages_for(t)); };
    else
      build = [&](std::size_t t) { return NagCoefficients(mu, L, hp.alpha, t); };
    const HorizonChoice choice = SelectHorizon(
        build, cfg.e0_guess, s1, n, cfg.epsilon, objective.dim(), horizon);
    hp.horizon = choice.horizon;
    plan.schedule = OptimalSchedule(build(hp.horizon), s1, n, cfg.epsilon);
    if (m < n)
      plan.schedule =
          RescaleForSubsampling(plan.schedule, s1, n, m, cfg.epsilon);
  } else {
    plan.schedule = UniformScale(s1, cfg.epsilon, horizon, n, m);
  }
  if (IsMultiStage(algorithm)) plan.spec.stages = stages_for(hp.horizon);
  return plan;
}

struct SummaryRecord {
  Algorithm algorithm = Algorithm::kGradientDescent;
  std::size_t m = 0;
  std::size_t horizon = 0;
  std::size_t effective_horizon = 0;
  double c = 0.0;
  std::size_t replicates = 0;
  std::vector<double> mean_log10;    // per iteration
  std::vector<double> stderr_log10;  // per iteration
  double final_mean_error = 0.0;     // mean of F(x_T) - F*
  double final_mean_log10 = 0.0;
  double mean_wall_seconds = 0.0;
};

struct BestOverHorizon {
  Algorithm algorithm = Algorithm::kGradientDescent;
  std::size_t m = 0;
  double c = 0.0;
  std::size_t best_horizon = 0;
  double best_final_error = 0.0;
};

struct SummaryReport {
  std::vector<SummaryRecord> records;
  std::vector<BestOverHorizon> best;

  const SummaryRecord* Find(Algorithm a, std::size_t m, std::size_t horizon,
                            double c) const {
    for (const SummaryRecord& r : records)
      if (r.algorithm == a && r.m == m && r.horizon == horizon && r.c == c)
        return &r;
    return nullptr;
  }

  const BestOverHorizon* FindBest(Algorithm a, std::size_t m, double c) const {
    for (const BestOverHorizon& b : best)
      if (b.algorithm == a && b.m == m && b.c == c) return &b;
    return nullptr;
  }
};

// Suboptimality floor used before taking logs.
inline constexpr double kLogFloor = 1e-300;

// Seed-averaged curves per (algorithm, m, T, c). Traces are grouped and
// ordered by seed before averaging, so the result does not depend on the
// order of `traces`.
inline SummaryReport Summarize(std::vector<const Trace*> traces) {
  SummaryReport report;
  if (traces.empty()) return report;
  for (const Trace* t : traces) {
    if (t->objective_tag != traces.front()->objective_tag ||
        t->f_star != traces.front()->f_star ||
        t->epsilon != traces.front()->epsilon)
      throw InvalidArgument("Summarize: traces come from different objectives");
  }
  using Key = std::tuple<int, std::size_t, std::size_t, double>;
  std::map<Key, std::vector<const Trace*>> groups;
  for (const Trace* t : traces)
    groups[{static_cast<int>(t->algorithm), t->params.m, t->requested_horizon,
            t->c}]
        .push_back(t);

  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const Trace* a, const Trace* b) { return a->seed < b->seed; });
    SummaryRecord rec;
    rec.algorithm = members.front()->algorithm;
    rec.m = std::get<1>(key);
    rec.horizon = std::get<2>(key);
    rec.c = std::get<3>(key);
    rec.effective_horizon = members.front()->params.horizon;
    rec.replicates = members.size();
    const std::size_t len = members.front()->records.size();
    for (const Trace* t : members)
      internal::Require(t->records.size() == len,
                        "Summarize: traces in a group differ in length");
    const double k = static_cast<double>(members.size());
    rec.mean_log10.assign(len, 0.0);
    rec.stderr_log10.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      double sum = 0.0, sum_sq = 0.0;
      for (const Trace* t : members) {
        const double v = std::log10(std::max(t->records[i].subopt, kLogFloor));
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / k;
      rec.mean_log10[i] = mean;
      if (members.size() > 1) {
        const double var = std::max(0.0, (sum_sq - k * mean * mean) / (k - 1.0));
        rec.stderr_log10[i] = std::sqrt(var / k);
      }
    }
    double final_sum = 0.0, wall = 0.0;
    for (const Trace* t : members) {
      final_sum += t->final_subopt();
      wall += t->wall_seconds;
    }
    rec.final_mean_error = final_sum / k;
    rec.final_mean_log10 = rec.mean_log10.back();
    rec.mean_wall_seconds = wall / k;
    report.records.push_back(std::move(rec));
  }

  std::map<std::tuple<int, std::size_t, double>, BestOverHorizon> best;
  for (const SummaryRecord& r : report.records) {
    auto key = std::make_tuple(static_cast<int>(r.algorithm), r.m, r.c);
    auto it = best.find(key);
    if (it == best.end() || r.final_mean_error < it->second.best_final_error)
      best[key] = {r.algorithm, r.m, r.c, r.horizon, r.final_mean_error};
  }
  for (auto& [key, b] : best) report.best.push_back(b);
  return report;
}

inline SummaryReport Summarize(const std::vector<Trace>& traces) {
  std::vector<const Trace*> ptrs;
  for (const Trace& t : traces) ptrs.push_back(&t);
  return Summarize(std::move(ptrs));
}

inline nlohmann::json SummaryToJson(const SummaryReport& report) {
  nlohmann::json records = nlohmann::json::array();
  for (const SummaryRecord& r : report.records) {
    records.push_back({{"algorithm", AlgorithmName(r.algorithm)},
                       {"m", r.m},
                       {"T", r.horizon},
                       {"T_effective", r.effective_horizon},
                       {"c", r.c},
                       {"replicates", r.replicates},
                       {"final_mean_error", r.final_mean_error},
                       {"final_mean_log10", r.final_mean_log10},
                       {"mean_wall_seconds", r.mean_wall_seconds},
                       {"mean_log10", r.mean_log10},
                       {"stderr_log10", r.stderr_log10}});
  }
  nlohmann::json best = nlohmann::json::array();
  for (const BestOverHorizon& b : report.best) {
    best.push_back({{"algorithm", AlgorithmName(b.algorithm)},
                    {"m", b.m},
                    {"c", b.c},
                    {"best_T", b.best_horizon},
                    {"best_final_error", b.best_final_error}});
  }
  return {{"records", records}, {"best_over_T", best}};
}

// Plain-text table of final mean errors, one row per (m, c, algorithm).
inline std::string ComparisonTable(const SummaryReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(13) << "algorithm" << std::setw(8) << "m"
     << std::setw(6) << "c" << std::setw(7) << "T" << std::setw(7) << "T_eff"
     << "final_error\n";
  std::vector<const SummaryRecord*> rows;
  for (const SummaryRecord& r : report.records) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
    return std::tie(a->m, a->c, a->algorithm, a->horizon) <
           std::tie(b->m, b->c, b->algorithm, b->horizon);
  });
  os << std::setprecision(4);
  for (const SummaryRecord* r : rows) {
    os << std::left << std::setw(13) << AlgorithmName(r->algorithm)
       << std::setw(8) << r->m << std::setw(6) << r->c << std::setw(7)
       << r->horizon << std::setw(7) << r->effective_horizon
       << std::scientific << r->final_mean_error << std::defaultfloat << '\n';
  }
  return os.str();
}

// Minimal SVG line chart, meant for eyeballing curves.
inline void WriteSvgPlot(
    const std::string& path, const std::string& title,
    const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  constexpr double kWidth = 640, kHeight = 400, kPad = 50;
  double ymin = 1e300, ymax = -1e300;
  std::size_t xmax = 1;
  for (const auto& [name, ys] : series) {
    xmax = std::max(xmax, ys.size() > 0 ? ys.size() - 1 : 0);
    for (double y : ys)
      if (std::isfinite(y)) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
  }
  if (ymin > ymax) ymin = 0, ymax = 1;
  if (ymax == ymin) ymax = ymin + 1;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                  "#d62728", "#9467bd", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n"
      << "<text x=\"" << kPad << "\" y=\"20\">" << title << "</text>\n"
      << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\""
      << kWidth - 2 * kPad << "\" height=\"" << kHeight - 2 * kPad
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"5\" y=\"" << kPad << "\">" << ymax << "</text>\n"
      << "<text x=\"5\" y=\"" << kHeight - kPad << "\">" << ymin << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, ys] = series[s];
    const char* color = kColors[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!std::isfinite(ys[i])) continue;
      const double px = kPad + (kWidth - 2 * kPad) * static_cast<double>(i) /
                                   static_cast<double>(xmax);
      const double py =
          kHeight - kPad - (kHeight - 2 * kPad) * (ys[i] - ymin) / (ymax - ymin);
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n<text x=\"" << kWidth - kPad + 2 << "\" y=\""
        << kPad + 14 * (s + 1) << "\" fill=\"" << color
        << "\" font-size=\"10\">" << name << "</text>\n";
  }
  out << "</svg>\n";
}

struct GridResult {
  ReferenceOptimum reference;
  std::vector<Trace> traces;
  SummaryReport summary;
  std::vector<std::string> failures;
};

// Runs every (algorithm, m, T, c, seed) cell. Each run owns its RngStream
// (seeded with the replicate seed, shared across algorithms) and its
// PrivacyAccount. Runs are spread over cfg.workers threads; results are
// stored by cell index, so output does not depend on scheduling. A cell
// whose planning or run throws is recorded in `failures` and skipped.
inline GridResult RunGrid(const ExperimentConfig& cfg, const Objective& objective,
                          const std::string& objective_tag) {
  const std::size_t n = objective.size();
  cfg.Validate(n);
  GridResult result;
  result.reference =
      ComputeReferenceOptimum(objective, cfg.reference_iterations);
  const Vector x0 = cfg.x0.empty() ? Vector(objective.dim(), 0.0) : cfg.x0;
  internal::Require(x0.size() == objective.dim(), "config: x0 dimension");

  std::vector<PlannedRun> plans;
  for (Algorithm a : cfg.algorithms)
    for (std::size_t m : cfg.SubsampleSizes(n))
      for (std::size_t t : cfg.horizons)
        for (double c : cfg.c) {
          try {
            plans.push_back(PlanRun(a, objective, m, t, c, cfg));
          } catch (const std::exception& e) {
            std::ostringstream os;
            os << AlgorithmName(a) << " m=" << m << " T=" << t << " c=" << c
               << ": " << e.what();
            result.failures.push_back(os.str());
          }
        }

  namespace fs = std::filesystem;
  if (cfg.write_traces) {
    fs::create_directories(cfg.output_dir);
    for (const PlannedRun& p : plans) {
      std::ostringstream stem;
      stem << "schedule_" << AlgorithmName(p.spec.algorithm) << '_'
           << p.spec.params.m << '_' << p.requested_horizon << '_'
           << FormatGridValue(p.c) << ".csv";
      WriteScheduleCsv(p.schedule, objective.sensitivity(), n, p.spec.params.m,
                       (fs::path(cfg.output_dir) / stem.str()).string());
    }
  }

  const std::vector<std::uint64_t> seeds = cfg.SeedList();
  const std::size_t jobs = plans.size() * seeds.size();
  std::vector<std::optional<Trace>> slots(jobs);
  std::vector<std::string> job_errors(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const PlannedRun& plan = plans[j / seeds.size()];
      const std::uint64_t seed = seeds[j % seeds.size()];
      try {
        RngStream rng(seed);
        PrivacyAccount account(cfg.epsilon,
                               std::max<std::size_t>(1, plan.spec.params.horizon),
                               n, plan.spec.params.m);
        Trace trace = Run(plan.spec, objective, plan.schedule, account, rng, x0,
                          result.reference.f_star);
        trace.c = plan.c;
        trace.requested_horizon = plan.requested_horizon;
        trace.objective_tag = objective_tag;
        if (cfg.write_traces) {
          const std::string stem =
              TraceFileStem(plan.spec.algorithm, plan.spec.params.m,
                            plan.requested_horizon, plan.c, seed);
          std::lock_guard<std::mutex> lock(io_mutex);
          WriteTraceCsv(trace, (fs::path(cfg.output_dir) / (stem + ".csv")).string());
          WriteTraceMetadata(trace,
                             (fs::path(cfg.output_dir) / (stem + ".json")).string());
        }
        slots[j] = std::move(trace);
      } catch (const std::exception& e) {
        job_errors[j] = e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, cfg.workers);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t j = 0; j < jobs; ++j) {
    if (slots[j]) {
      result.traces.push_back(std::move(*slots[j]));
    } else {
      const PlannedRun& plan = plans[j / seeds.size()];
      std::ostringstream os;
      os << AlgorithmName(plan.spec.algorithm) << " m=" << plan.spec.params.m
         << " T=" << plan.requested_horizon << " c=" << plan.c
         << " seed=" << seeds[j % seeds.size()] << ": " << job_errors[j];
      result.failures.push_back(os.str());
    }
  }
  result.summary = Summarize(result.traces);

  if (cfg.write_traces) {
    std::ofstream out(fs::path(cfg.output_dir) / "summary.json");
    nlohmann::json j = SummaryToJson(result.summary);
    j["f_star"] = result.reference.f_star;
    j["reference_gradient_norm"] = result.reference.gradient_norm;
    j["failures"] = result.failures;
    out << j.dump(2) << '\n';
  }
  if (cfg.write_svg) {
    for (std::size_t m : cfg.SubsampleSizes(n))
      for (std::size_t t : cfg.horizons)
        for (double c : cfg.c) {
          std::vector<std::pair<std::string, std::vector<double>>> series;
          for (Algorithm a : cfg.algorithms)
            if (const SummaryRecord* r = result.summary.Find(a, m, t, c))
              series.emplace_back(std::string(AlgorithmName(a)), r->mean_log10);
          std::ostringstream name;
          name << "plot_" << m << '_' << t << '_' << FormatGridValue(c) << ".svg";
          WriteSvgPlot((fs::path(cfg.output_dir) / name.str()).string(),
                       "mean log10 suboptimality, m=" + std::to_string(m) +
                           " T=" + std::to_string(t) + " c=" + FormatGridValue(c),
                       series);
        }
  }
  return result;
}

// Loads every <stem>.csv with a matching <stem>.json sidecar in `dir`.
inline std::vector<Trace> LoadTraces(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path p = entry.path();
    if (p.extension() != ".csv") continue;
    fs::path meta = p;
    meta.replace_extension(".json");
    if (fs::exists(meta)) csvs.push_back(p);
  }
  std::sort(csvs.begin(), csvs.end());
  std::vector<Trace> traces;
  for (const fs::path& p : csvs) {
    fs::path meta = p;
    meta.replace_extension(".json");
    traces.push_back(ReadTrace(p.string(), meta.string()));
  }
  return traces;
}

}  // namespace dpaccel

#endif  // DPACCEL_HARNESS_HPP_
