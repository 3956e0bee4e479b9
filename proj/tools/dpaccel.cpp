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

// dpaccel command-line tool.
//
//   dpaccel gen-data          synthetic logistic dataset (CSV + JSON sidecar)
//   dpaccel run               comparison grid from a JSON config
//   dpaccel allocate          optimized noise schedule for one horizon
//   dpaccel certify           heavy-ball certificate and bound curve
//   dpaccel analyze-quadratic exact quadratic rate and bound curves
//   dpaccel summarize         seed-averaged summary of a trace directory

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpaccel/budget.hpp"
#include "dpaccel/certification.hpp"
#include "dpaccel/harness.hpp"
#include "dpaccel/objectives.hpp"
#include "dpaccel/optimizers.hpp"
#include "dpaccel/privacy.hpp"

namespace fs = std::filesystem;
using namespace dpaccel;

namespace {

std::string InDir(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

void WriteJson(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path);
  out << j.dump(2) << '\n';
}

struct GenDataArgs {
  std::size_t d = 20, n = 10000;
  double u_max = 20.0;
  std::uint64_t seed = 1;
  std::string out = "data";
};

int GenData(const GenDataArgs& a) {
  const Dataset data = GenerateSynthetic(a.d, a.n, a.u_max, a.seed);
  WriteDatasetCsv(data, InDir(a.out, "data.csv"));
  WriteDatasetMetadata(data, InDir(a.out, "data.json"));
  std::cout << "wrote " << a.n << " records (d = " << a.d << ") to " << a.out
            << '\n';
  return 0;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::uint64_t seed_base = 0;
  bool seed_base_set = false;
  std::size_t workers = 0;
  bool svg = false;
};

int RunCommand(const RunArgs& a) {
  ExperimentConfig cfg =
      a.config.empty() ? ExperimentConfig{} : ExperimentConfig::FromFile(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.seed_base_set) {
    cfg.seed_base = a.seed_base;
    cfg.seeds.clear();
  }
  if (a.workers > 0) cfg.workers = a.workers;
  if (a.svg) cfg.write_svg = true;
  const auto objective = BuildObjective(cfg.objective);
  std::cout << "objective " << ObjectiveTag(cfg.objective) << ": mu = "
            << objective->mu() << ", L = " << objective->L()
            << ", S1 = " << objective->sensitivity() << '\n';
  const GridResult result =
      RunGrid(cfg, *objective, ObjectiveTag(cfg.objective));
  std::cout << "F* = " << std::setprecision(12) << result.reference.f_star
            << " (|grad| = " << result.reference.gradient_norm << ")\n"
            << std::setprecision(6) << result.traces.size() << " traces in "
            << cfg.output_dir << "\n\n"
            << ComparisonTable(result.summary);
  for (const std::string& f : result.failures)
    std::cerr << "failed: " << f << '\n';
  return 0;
}

struct AllocateArgs {
  double mu = 0.02, L = 1.0, c = 1.0, epsilon = 1.0, s1 = 40.0, e0 = 10.0;
  std::size_t horizon = 100, n = 10000, m = 0, d = 20;
  std::string kind = "nag";
  bool select_horizon = false;
  int masg_p = 1;
  std::string out = "allocation";
};

int Allocate(const AllocateArgs& a) {
  const std::size_t m = a.m == 0 ? a.n : a.m;
  internal::Require(a.kind == "nag" || a.kind == "masg",
                    "--kind must be nag or masg");
  CoefficientBuilder build = [&](std::size_t t) {
    return a.kind == "nag"
               ? NagCoefficients(a.mu, a.L, a.c / a.L, t)
               : MasgCoefficients(a.mu, a.L,
                                  MakeMasgStages(a.mu, a.L, a.c, t, a.masg_p));
  };
  std::size_t horizon = a.horizon;
  if (a.select_horizon)
    horizon = SelectHorizon(build, a.e0, a.s1, a.n, a.epsilon, a.d, a.horizon)
                  .horizon;
  const BoundCoefficients coeffs = build(horizon);
  NoiseSchedule schedule = OptimalSchedule(coeffs, a.s1, a.n, a.epsilon);
  const double bound = OptimizedBound(coeffs, a.e0, a.s1, a.n, a.epsilon, a.d);
  const double uniform_bound = ScheduleBound(
      coeffs, UniformScale(a.s1, a.epsilon, horizon, a.n, a.n), a.e0, a.d);
  if (m < a.n)
    schedule = RescaleForSubsampling(schedule, a.s1, a.n, m, a.epsilon);
  WriteScheduleCsv(schedule, a.s1, a.n, m, InDir(a.out, "schedule.csv"));
  WriteJson(InDir(a.out, "schedule.json"),
            {{"kind", a.kind},
             {"T", horizon},
             {"T_requested", a.horizon},
             {"n", a.n},
             {"m", m},
             {"epsilon", a.epsilon},
             {"S1", a.s1},
             {"provenance", ToString(schedule.provenance)},
             {"composed_leak", ComposedLeak(schedule, a.s1, a.n, m)},
             {"bound_optimized", bound},
             {"bound_uniform", uniform_bound}});
  std::cout << "T = " << horizon << ", composed leak = "
            << ComposedLeak(schedule, a.s1, a.n, m)
            << ", bound optimized = " << bound
            << ", uniform = " << uniform_bound << '\n';
  return 0;
}

struct CertifyArgs {
  double alpha = 1.0, beta = 0.0, mu = 0.5, L = 1.0;
  double s1 = 40.0, epsilon = 1.0, psi0 = 1.0;
  std::size_t d = 20, n = 10000, m = 0, horizon = 100;
  std::string out = "certificate";
};

int Certify(const CertifyArgs& a) {
  const std::size_t m = a.m == 0 ? a.n : a.m;
  const auto cert =
      SearchCertificate(a.alpha, a.beta, a.mu, a.L, CertificateGrid::Defaults());
  if (!cert) {
    std::cerr << "no certificate on the default grid\n";
    WriteJson(InDir(a.out, "certificate.json"), {{"feasible", false}});
    return 2;
  }
  const double eps0 = PerIterationEpsilon(a.epsilon, a.horizon, a.n, m);
  const NoiseBound noise = NoiseBoundFor(a.s1, a.d, m, a.n, eps0);
  std::ofstream csv(InDir(a.out, "bound.csv"));
  csv << "t,bound\n" << std::setprecision(17);
  for (std::size_t t = 0; t <= a.horizon; ++t)
    csv << t << ','
        << EvalShbBound(*cert, a.psi0, t, noise.total, a.d, a.alpha, a.L)
        << '\n';
  WriteJson(InDir(a.out, "certificate.json"),
            {{"feasible", true},
             {"rho", cert->rho},
             {"P", {{cert->P[0][0], cert->P[0][1]}, {cert->P[1][0], cert->P[1][1]}}},
             {"c0", cert->c0},
             {"c", cert->c},
             {"slack", cert->slack},
             {"amplification", cert->Amplification(a.L)},
             {"eps0", eps0},
             {"E_T", noise.total},
             {"sigma_s2", noise.subsampling},
             {"privacy_term", noise.privacy}});
  std::cout << "rho = " << cert->rho << ", slack = " << cert->slack
            << ", amplification = " << cert->Amplification(a.L) << '\n';
  return 0;
}

struct QuadraticArgs {
  double mu = 0.5, L = 1.0, cw = 1e-2, alpha = 0.0, beta = -1.0;
  std::size_t horizon = 100;
  std::size_t beta_points = 50;
  std::string out = "quadratic";
};

// Rate report at one (alpha, beta) plus a sweep of the bound at t = T over
// beta for the same alpha, on Q = diag(mu, L).
int AnalyzeQuadratic(const QuadraticArgs& a) {
  const double alpha = a.alpha > 0 ? a.alpha : HeavyBallStepsize(a.mu, a.L);
  const double beta = a.beta >= 0 ? a.beta : HeavyBallMomentum(a.mu, a.L);
  const Vector eigs = {a.mu, a.L};
  const double sigma2 = std::pow(static_cast<double>(a.horizon) * a.cw, 2);
  const QuadraticRateReport r = QuadraticRate(alpha, beta, eigs, a.mu, a.L);
  nlohmann::json j = {{"alpha", alpha},
                      {"beta", beta},
                      {"rho", r.rho},
                      {"contractive", r.contractive},
                      {"sigma_T2", sigma2}};
  if (r.noise_gain) j["m_ab"] = sigma2 * *r.noise_gain;
  WriteJson(InDir(a.out, "rate.json"), j);

  if (r.contractive && r.noise_gain) {
    std::ofstream curve(InDir(a.out, "bound.csv"));
    curve << "t,bound\n" << std::setprecision(17);
    for (std::size_t t = 0; t <= a.horizon; ++t)
      curve << t << ',' << QuadraticBound(r, sigma2, t, 2.0) << '\n';
  }
  std::ofstream sweep(InDir(a.out, "beta_sweep.csv"));
  sweep << "beta,rho,bound_T\n" << std::setprecision(17);
  for (std::size_t k = 0; k < a.beta_points; ++k) {
    const double b = 0.99 * static_cast<double>(k) /
                     static_cast<double>(std::max<std::size_t>(1, a.beta_points - 1));
    const QuadraticRateReport rb = QuadraticRate(alpha, b, eigs, a.mu, a.L);
    sweep << b << ',' << rb.rho << ',';
    if (rb.contractive && rb.noise_gain)
      sweep << QuadraticBound(rb, sigma2, a.horizon, 2.0);
    else
      sweep << "nan";
    sweep << '\n';
  }
  std::cout << "rho = " << r.rho << (r.contractive ? "" : " (not contractive)")
            << '\n';
  return 0;
}

int SummarizeCommand(const std::string& dir, const std::string& out) {
  const std::vector<Trace> traces = LoadTraces(dir);
  if (traces.empty()) {
    std::cerr << "no traces in " << dir << '\n';
    return 2;
  }
  const SummaryReport report = Summarize(traces);
  const std::string target = out.empty() ? dir : out;
  WriteJson(InDir(target, "summary.json"), SummaryToJson(report));
  std::cout << traces.size() << " traces\n\n" << ComparisonTable(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private accelerated optimization toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--d", gen.d, "Dimension");
  gen_cmd->add_option("--n", gen.n, "Number of records");
  gen_cmd->add_option("--u-max", gen.u_max, "L1 bound on covariates");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Output directory");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the comparison grid");
  run_cmd->add_option("--config", run.config, "JSON config path");
  run_cmd->add_option("--out", run.out, "Output directory");
  auto* seed_opt =
      run_cmd->add_option("--seed-base", run.seed_base, "First replicate seed");
  run_cmd->add_option("--workers", run.workers, "Worker threads");
  run_cmd->add_flag("--svg", run.svg, "Also write SVG plots");

  AllocateArgs alloc;
  auto* alloc_cmd = app.add_subcommand("allocate", "Optimized noise schedule");
  alloc_cmd->add_option("--mu", alloc.mu);
  alloc_cmd->add_option("--L", alloc.L);
  alloc_cmd->add_option("--c", alloc.c, "Stepsize factor, alpha = c/L");
  alloc_cmd->add_option("--T", alloc.horizon, "Horizon (maximum with --select-horizon)");
  alloc_cmd->add_option("--n", alloc.n);
  alloc_cmd->add_option("--m", alloc.m, "Subsample size (default n)");
  alloc_cmd->add_option("--d", alloc.d);
  alloc_cmd->add_option("--epsilon", alloc.epsilon);
  alloc_cmd->add_option("--S1", alloc.s1, "Gradient sensitivity");
  alloc_cmd->add_option("--E0", alloc.e0, "Initial error guess");
  alloc_cmd->add_option("--kind", alloc.kind, "nag or masg");
  alloc_cmd->add_option("--masg-p", alloc.masg_p);
  alloc_cmd->add_flag("--select-horizon", alloc.select_horizon,
                      "Pick T' <= T minimizing the bound");
  alloc_cmd->add_option("--out", alloc.out, "Output directory");

  CertifyArgs cert;
  auto* cert_cmd = app.add_subcommand("certify", "Heavy-ball certificate");
  cert_cmd->add_option("--alpha", cert.alpha);
  cert_cmd->add_option("--beta", cert.beta);
  cert_cmd->add_option("--mu", cert.mu);
  cert_cmd->add_option("--L", cert.L);
  cert_cmd->add_option("--T", cert.horizon);
  cert_cmd->add_option("--S1", cert.s1);
  cert_cmd->add_option("--d", cert.d);
  cert_cmd->add_option("--n", cert.n);
  cert_cmd->add_option("--m", cert.m, "Subsample size (default n)");
  cert_cmd->add_option("--epsilon", cert.epsilon);
  cert_cmd->add_option("--psi0", cert.psi0, "Initial Lyapunov value");
  cert_cmd->add_option("--out", cert.out, "Output directory");

  QuadraticArgs quad;
  auto* quad_cmd =
      app.add_subcommand("analyze-quadratic", "Exact quadratic rate and bound");
  quad_cmd->add_option("--mu", quad.mu);
  quad_cmd->add_option("--L", quad.L);
  quad_cmd->add_option("--alpha", quad.alpha, "Default: heavy-ball stepsize");
  quad_cmd->add_option("--beta", quad.beta, "Default: heavy-ball momentum");
  quad_cmd->add_option("--T", quad.horizon);
  quad_cmd->add_option("--cw", quad.cw, "Noise level, sigma_T^2 = (T cw)^2");
  quad_cmd->add_option("--beta-points", quad.beta_points);
  quad_cmd->add_option("--out", quad.out, "Output directory");

  std::string summarize_dir, summarize_out;
  auto* sum_cmd = app.add_subcommand("summarize", "Summarize trace files");
  sum_cmd->add_option("--out", summarize_dir, "Trace directory")->required();
  sum_cmd->add_option("--to", summarize_out, "Summary directory (default --out)");

  CLI11_PARSE(app, argc, argv);
  run.seed_base_set = seed_opt->count() > 0;

  try {
    if (*gen_cmd) return GenData(gen);
    if (*run_cmd) return RunCommand(run);
    if (*alloc_cmd) return Allocate(alloc);
    if (*cert_cmd) return Certify(cert);
    if (*quad_cmd) return AnalyzeQuadratic(quad);
    if (*sum_cmd) return SummarizeCommand(summarize_dir, summarize_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
