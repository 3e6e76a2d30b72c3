// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   acceptance [scratch-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "levelflow/commands.hpp"
#include "levelflow/dynamics.hpp"
#include "levelflow/ensemble.hpp"
#include "levelflow/simulation.hpp"
#include "levelflow/statistics.hpp"
#include "levelflow/unfolding.hpp"
#include "oracles.hpp"

namespace {

using namespace levelflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RotatingPair goe_pair(int n, RandomStream& rng) { return {sample_goe(n, 0.5, rng), sample_goe(n, 0.5, rng)}; }

// 1. Analytic velocities/curvatures against central differences.
Outcome oracle_equivalence() {
  const auto start = Clock::now();
  RandomStream rng(101);
  double worst_v = 0.0, worst_c = 0.0;
  int compared = 0;
  for (int p = 0; p < 50; ++p) {
    const auto pair = goe_pair(20, rng);
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto frame = spectral_frame(pair, t, 1e-12);
    const auto fd = curvature_fd_oracle(pair, t, 1e-4);
    double dv = 0.0, dc = 0.0, sv = 0.0, sc = 0.0;
    for (int k = 0; k < frame.size(); ++k) {
      double gap = std::numeric_limits<double>::infinity();
      if (k > 0) gap = std::min(gap, frame.energies(k) - frame.energies(k - 1));
      if (k + 1 < frame.size()) gap = std::min(gap, frame.energies(k + 1) - frame.energies(k));
      if (gap <= 1e-3) continue;
      ++compared;
      dv = std::max(dv, std::abs(frame.velocities(k) - fd.velocities(k)));
      dc = std::max(dc, std::abs(frame.curvatures(k) - fd.curvatures(k)));
      sv = std::max(sv, std::abs(fd.velocities(k)));
      sc = std::max(sc, std::abs(fd.curvatures(k)));
    }
    worst_v = std::max(worst_v, dv / sv);
    worst_c = std::max(worst_c, dc / sc);
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.require(worst_v <= 1e-8, "velocity rel err " + fmt("%.2e", worst_v) + " <= 1e-8");
  o.require(worst_c <= 1e-6, "curvature rel err " + fmt("%.2e", worst_c) + " <= 1e-6");
  o.require(compared > 900, std::to_string(compared) + " levels compared");
  o.require(elapsed < 10.0, "runtime " + fmt("%.2f", elapsed) + " s < 10 s");
  return o;
}

// 2. Two-level closed form.
Outcome two_level_closed_form() {
  SymMatrix h1(2, 2), h2(2, 2);
  h1 << 2, 0, 0, -2;
  h2 << 0, 1, 1, 0;
  const auto frame = spectral_frame({h1, h2}, 0.0, 1e-12);
  const double exact = oracle::two_level_upper(2.0, 1.0, 0.0).curvature;
  Outcome o;
  o.require(std::abs(exact + 1.5) < 1e-15, "closed form gives " + fmt("%.17g", exact));
  o.require(std::abs(frame.curvatures(1) + 1.5) <= 1e-10,
            "upper curvature " + fmt("%.17g", frame.curvatures(1)) + " = -1.5 +- 1e-10");
  return o;
}

// 3. Explicit rotation-frame solution.
Outcome explicit_solution() {
  RandomStream rng(303);
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    const auto pair = goe_pair(50, rng);
    for (double t : {0.35, 1.3, 2.2, 3.9, 5.5})
      worst = std::max(worst, rotation_frame_check(pair, t) / hamiltonian_at(pair, t).norm());
  }
  Outcome o;
  o.require(worst < 1e-9, "max deviation / ||H|| " + fmt("%.2e", worst) + " < 1e-9");
  return o;
}

// 4. Equations of motion integrated with RK4.
Outcome ode_cross_check() {
  RandomStream rng(404);
  double worst = 0.0;
  for (int p = 0; p < 5; ++p) {
    const auto pair = goe_pair(10, rng);
    const auto integrated = integrate_motion(pair, 0.0, 0.1, 1000);
    const Vector direct = detail::eigenvalues(hamiltonian_at(pair, 0.1));
    worst = std::max(worst, (integrated.energies - direct).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.require(worst <= 1e-8, "max |E_ode - E_direct| " + fmt("%.2e", worst) + " <= 1e-8");
  return o;
}

RunConfig base_config() {
  RunConfig c;
  c.n = 100;
  c.m = 50;
  c.alpha = 0.5;
  c.realizations = 200;
  c.t_samples = 4;
  c.window_fraction = 0.5;
  c.seed = 20240601;
  c.jobs = 0;
  return c;
}

// 5. Eigenvalue density against the semicircle.
Outcome density_semicircle() {
  const auto start = Clock::now();
  RunConfig c = base_config();
  c.realizations = 500;
  c.bins.count = 40;
  const auto run = simulate_density(c, 0.32, c.seed);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.require(run.max_abs_z <= 4.0, "max per-bin |z| " + fmt("%.2f", run.max_abs_z) + " <= 4");
  o.require(run.outside_fraction < 1e-3, "outside support " + fmt("%.3e", run.outside_fraction) + " < 1e-3");
  o.require(elapsed < 120.0, "runtime " + fmt("%.1f", elapsed) + " s < 120 s");
  return o;
}

struct CurvatureRuns {
  CurvatureRun goe, decoupled, intermediate;
  double goe_seconds = 0.0;
};

CurvatureRuns& curvature_runs() {
  static CurvatureRuns runs = [] {
    CurvatureRuns r;
    const RunConfig c = base_config();
    const auto start = Clock::now();
    r.goe = simulate_curvatures(c, 10.0, sweep_seed(c.seed, 0));
    r.goe_seconds = seconds_since(start);
    r.decoupled = simulate_curvatures(c, 0.0, sweep_seed(c.seed, 1));
    r.intermediate = simulate_curvatures(c, 1.0, sweep_seed(c.seed, 2));
    return r;
  }();
  return runs;
}

// 6. GOE limit follows the universal law.
Outcome goe_limit() {
  const auto& runs = curvature_runs();
  const auto& s = runs.goe.summary;
  const auto k = runs.goe.normalized();
  double mean_abs = 0.0;
  for (double x : k) mean_abs += std::abs(x);
  mean_abs /= static_cast<double>(k.size());
  Outcome o;
  o.require(s.lambda == 1.0, "lambda = 1");
  o.require(s.ks_universal < 0.03, "KS " + fmt("%.4f", s.ks_universal) + " < 0.03");
  o.require(std::abs(s.tail_exponent + 3.0) <= 0.3, "tail exponent " + fmt("%.3f", s.tail_exponent) + " = -3 +- 0.3");
  o.require(std::abs(mean_abs - 1.0) <= 1e-12, "mean |k| - 1 = " + fmt("%.1e", mean_abs - 1.0));
  o.require(runs.goe_seconds < 300.0, "runtime " + fmt("%.1f", runs.goe_seconds) + " s < 300 s");
  return o;
}

// 7. Decoupled blocks also follow the universal law.
Outcome decoupled_limit() {
  const auto& s = curvature_runs().decoupled.summary;
  Outcome o;
  o.require(s.per_block, "per-block mode engaged");
  o.require(s.ks_universal < 0.05, "KS " + fmt("%.4f", s.ks_universal) + " < 0.05");
  return o;
}

// 8. Narrower distribution at intermediate coupling.
Outcome intermediate_narrowing() {
  const auto& runs = curvature_runs();
  const double n1 = static_cast<double>(runs.intermediate.summary.samples);
  const double n2 = static_cast<double>(runs.goe.summary.samples);
  const double p1 = runs.intermediate.summary.fraction_above_3;
  const double p2 = runs.goe.summary.fraction_above_3;
  const double pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
  const double z = (p2 - p1) / std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  Outcome o;
  o.require(n1 == n2, "equal sample sizes (" + std::to_string(static_cast<long>(n1)) + ")");
  o.require(p1 < p2, "P(|k|>3): eps=1 " + fmt("%.5f", p1) + " vs GOE " + fmt("%.5f", p2));
  o.require(z > 3.0, "binomial z " + fmt("%.2f", z) + " > 3");
  return o;
}

// 9. Recovery of gamma by the histogram fit.
Outcome gamma_fit_recovery() {
  const auto edges = curvature_edges({});
  RandomStream rng(909);
  const auto fit127 = fit_gamma(build_histogram(sample_gamma_dist(1.27, 100000, rng), edges));
  const auto fit1 = fit_gamma(build_histogram(sample_gamma_dist(1.0, 100000, rng), edges));
  std::vector<FitBin> table;
  const auto model = universal_bin_density(edges);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) table.push_back({edges[i], edges[i + 1], model[i]});
  const auto exact = fit_gamma(table, FitModel::bin_average);
  Outcome o;
  o.require(std::abs(fit127.gamma - 1.27) <= 0.03, "gamma(1.27) = " + fmt("%.4f", fit127.gamma) + " +- " +
                                                       fmt("%.4f", fit127.gamma_uncertainty));
  o.require(std::abs(fit1.gamma - 1.0) <= 0.02, "gamma(1) = " + fmt("%.4f", fit1.gamma));
  o.require(std::abs(exact.gamma - 1.0) <= 1e-3, "exact table gamma = " + fmt("%.6f", exact.gamma));
  return o;
}

// 10. Unfolding.
Outcome unfolding() {
  const int n = 100;
  const DensityModel model(n, 0.5, 1.0);
  RandomStream rng(1010);
  double sum = 0.0;
  long count = 0;
  for (int r = 0; r < 100; ++r) {
    const Vector e = detail::eigenvalues(sample_coupled({n, n / 2, 1.0, 0.5, 0}, rng));
    for (int k = 25; k < 74; ++k) {
      sum += unfold(model, e(k + 1)) - unfold(model, e(k));
      ++count;
    }
  }
  const double spacing = sum / static_cast<double>(count);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double e = -model.radius() + 2.0 * model.radius() * (i + 0.5) / 100.0;
    const double q = oracle::integrated_density([&](double x) { return model.density(x); }, model.radius(), e);
    worst = std::max(worst, std::abs(unfold(model, e) - q) / std::max(q, 1.0));
  }
  Outcome o;
  o.require(std::abs(spacing - 1.0) <= 0.02, "mean unfolded spacing " + fmt("%.4f", spacing) + " = 1 +- 0.02");
  o.require(worst <= 1e-9, "closed form vs quadrature " + fmt("%.2e", worst) + " <= 1e-9");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 11. Bitwise determinism of simulate across runs and worker counts.
Outcome determinism(const fs::path& scratch) {
  RunConfig c = base_config();
  c.realizations = 40;
  c.epsilons = {10.0};
  std::vector<std::vector<std::string>> contents;
  for (int jobs : {1, 1, 4}) {
    c.jobs = jobs;
    c.out = (scratch / ("run" + std::to_string(contents.size()))).string();
    const auto out = cmd_simulate(c);
    std::vector<std::string> files;
    for (const auto& f : out.files) files.push_back(slurp(f));
    contents.push_back(std::move(files));
  }
  Outcome o;
  o.require(!contents[0][0].empty(), "samples file written (" + std::to_string(contents[0][0].size()) + " bytes)");
  o.require(contents[0] == contents[1], "identical across repeated runs");
  o.require(contents[0] == contents[2], "identical for --jobs 1 and --jobs 4");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "levelflow_acceptance";
  fs::remove_all(scratch);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"C1 oracle equivalence (velocities, curvatures)", oracle_equivalence},
      {"C2 two-level closed form", two_level_closed_form},
      {"C3 explicit rotation-frame solution", explicit_solution},
      {"C4 ODE cross-check", ode_cross_check},
      {"C5 eigenvalue density vs semicircle", density_semicircle},
      {"C6 GOE limit vs universal law", goe_limit},
      {"C7 decoupled limit vs universal law", decoupled_limit},
      {"C8 intermediate narrowing", intermediate_narrowing},
      {"C9 gamma fit recovery", gamma_fit_recovery},
      {"C10 unfolding", unfolding},
      {"C11 determinism", [&] { return determinism(scratch); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
