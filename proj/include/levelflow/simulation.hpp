#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "levelflow/dynamics.hpp"
#include "levelflow/ensemble.hpp"
#include "levelflow/error.hpp"
#include "levelflow/random.hpp"
#include "levelflow/statistics.hpp"
#include "levelflow/unfolding.hpp"

namespace levelflow {

enum class OutputFormat { csv, json };

/// Binning of an output histogram. Without an explicit range each command
/// picks its own (the semicircle support for densities, [-5, 5] for k).
struct BinSpec {
  std::size_t count = 41;
  std::optional<double> lo;
  std::optional<double> hi;
};

/// Fully resolved parameters of one CLI run.
struct RunConfig {
  int n = 100;
  int m = 50;
  double alpha = 0.5;
  std::vector<double> epsilons{0.0, 0.32, 1.0, 3.2, 10.0};
  int realizations = 200;
  int t_samples = 4;
  std::uint64_t seed = 1;
  double window_fraction = 0.5;
  BinSpec bins;
  std::string out = "levelflow-out";
  OutputFormat format = OutputFormat::csv;
  int jobs = 0;  // 0: hardware concurrency
  double degeneracy_scale = 1e-8;  // tolerance in units of the semicircle radius
  double edge_margin = default_edge_margin;

  int worker_count() const {
    if (jobs > 0) return jobs;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }

  void validate() const {
    EnsembleSpec{n, m, 1.0, alpha, seed}.validate();
    if (realizations < 1) throw Error(Errc::invalid_argument, "realizations must be >= 1");
    if (t_samples < 1) throw Error(Errc::invalid_argument, "t-samples must be >= 1");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
      throw Error(Errc::invalid_argument, "window must lie in (0, 1]");
    if (epsilons.empty()) throw Error(Errc::invalid_argument, "at least one epsilon is required");
    for (double e : epsilons) epsilon_lambda(n, e, CouplingDirection::to_lambda);
    if (bins.count < 1) throw Error(Errc::invalid_edges, "bins must be >= 1");
    if (bins.lo && bins.hi && !(*bins.lo < *bins.hi)) throw Error(Errc::invalid_edges, "bin range must be ascending");
    if (jobs < 0) throw Error(Errc::invalid_argument, "jobs must be >= 0");
    if (!(degeneracy_scale > 0.0)) throw Error(Errc::invalid_argument, "degeneracy scale must be > 0");
  }
};

/// Below this coupling the blocks are treated as decoupled and each block
/// is diagonalized on its own.
inline constexpr double per_block_threshold = 1e-6;

/// Runs fn(r) for r in [0, count) on up to `jobs` threads. Results must be
/// written to per-index slots so the outcome is independent of scheduling.
template <typename Fn>
void for_each_realization(int count, int jobs, Fn&& fn) {
  const int workers = std::clamp(jobs, 1, std::max(count, 1));
  if (workers == 1) {
    for (int r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next++; r < count; r = next++) {
        try {
          fn(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct CurvatureSummary {
  double epsilon = 0.0;
  double lambda = 0.0;
  bool per_block = false;
  std::size_t samples = 0;
  std::size_t masked = 0;        // window levels skipped for near-degeneracy
  std::size_t edge_dropped = 0;  // window levels too close to the support edge
  double mean_velocity_sq = 0.0;
  double mean_velocity_curvature = 0.0;
  double mean_abs_rescaled = 0.0;  // <|K|> before normalization
  double ks_universal = 0.0;       // KS distance of k against P(k)
  double tail_exponent = std::numeric_limits<double>::quiet_NaN();
  double tail_exponent_error = std::numeric_limits<double>::quiet_NaN();
  double fraction_above_3 = 0.0;   // fraction of |k| > 3
};

struct CurvatureRun {
  std::vector<CurvatureSample> samples;
  CurvatureSummary summary;

  std::vector<double> normalized() const {
    std::vector<double> k;
    k.reserve(samples.size());
    for (const auto& s : samples) k.push_back(*s.normalized);
    return k;
  }
};

struct RealizationPair {
  RotatingPair pair;
  std::vector<double> t_values;
};

/// Draws (H1, H2) and the t samples of realization r from its own stream.
inline RealizationPair draw_realization(const EnsembleSpec& spec, int t_samples, std::uint64_t run_seed,
                                        std::uint64_t r) {
  RandomStream rng(child_seed(run_seed, r));
  RealizationPair out;
  out.pair.h1 = sample_coupled(spec, rng);
  out.pair.h2 = sample_coupled(spec, rng);
  out.t_values.resize(static_cast<std::size_t>(t_samples));
  for (auto& t : out.t_values) t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return out;
}

/// Diagonal blocks (offset, size) the curvature sums run over.
inline std::vector<std::pair<int, int>> level_blocks(int n, int m, bool per_block) {
  if (per_block) return {{0, m}, {m, n - m}};
  return {{0, n}};
}

/// Full curvature pipeline for one epsilon: sample pairs, compute frames at
/// random t, keep the central window, unfold, rescale and normalize over the
/// pooled batch.
inline CurvatureRun simulate_curvatures(const RunConfig& config, double epsilon, std::uint64_t run_seed) {
  config.validate();
  const double lambda = epsilon_lambda(config.n, epsilon, CouplingDirection::to_lambda);
  const EnsembleSpec spec{config.n, config.m, lambda, config.alpha, run_seed};
  const DensityModel model(config.n, config.alpha, lambda);
  const bool per_block = lambda < per_block_threshold;
  const auto blocks = level_blocks(config.n, config.m, per_block);
  const double tol = config.degeneracy_scale * model.radius();

  struct Slot {
    std::vector<CurvatureSample> samples;
    std::size_t masked = 0;
    std::size_t edge_dropped = 0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(config.realizations));

  for_each_realization(config.realizations, config.worker_count(), [&](int r) {
    const auto real = draw_realization(spec, config.t_samples, run_seed, static_cast<std::uint64_t>(r));
    Slot& slot = slots[static_cast<std::size_t>(r)];
    for (double t : real.t_values) {
      for (auto [offset, size] : blocks) {
        const auto frame = spectral_frame(per_block ? real.pair.block(offset, size) : real.pair, t, tol);
        const auto levels = select_levels(frame, config.window_fraction);
        const auto window = static_cast<std::size_t>(std::lround(config.window_fraction * frame.size()));
        slot.masked += window - levels.size();
        for (int k : levels) {
          const double e = frame.energies(k);
          if (std::abs(e) > model.radius() * (1.0 - config.edge_margin)) {
            ++slot.edge_dropped;
            continue;
          }
          const auto rates = unfold_rates(model, e, frame.velocities(k), frame.curvatures(k), config.edge_margin);
          CurvatureSample s;
          s.realization = static_cast<std::uint64_t>(r);
          s.level = offset + k;
          s.t = t;
          s.energy = e;
          s.raw_velocity = frame.velocities(k);
          s.raw_curvature = frame.curvatures(k);
          s.unfolded_velocity = rates.velocity;
          s.unfolded_curvature = rates.curvature;
          slot.samples.push_back(s);
        }
      }
    }
  });

  CurvatureRun run;
  auto& sum = run.summary;
  sum.epsilon = epsilon;
  sum.lambda = lambda;
  sum.per_block = per_block;
  for (auto& slot : slots) {
    sum.masked += slot.masked;
    sum.edge_dropped += slot.edge_dropped;
    run.samples.insert(run.samples.end(), slot.samples.begin(), slot.samples.end());
  }
  const auto moments = rescale_batch(run.samples);
  sum.mean_velocity_sq = moments.mean_velocity_sq;
  sum.mean_velocity_curvature = moments.mean_velocity_curv;
  sum.mean_abs_rescaled = normalize_batch(run.samples);
  sum.samples = run.samples.size();

  const auto k = run.normalized();
  sum.ks_universal = ks_statistic(k, 1.0);
  std::size_t above = 0;
  for (double x : k) above += std::abs(x) > 3.0 ? 1 : 0;
  sum.fraction_above_3 = static_cast<double>(above) / static_cast<double>(k.size());
  try {
    const auto tail = tail_exponent(k, 3.0, 30.0);
    sum.tail_exponent = tail.exponent;
    sum.tail_exponent_error = tail.standard_error;
  } catch (const Error& e) {
    if (e.code() != Errc::insufficient_tail_data) throw;
  }
  return run;
}

struct DensityRun {
  DensityModel model;
  std::vector<double> eigenvalues;
  Histogram histogram;
  std::vector<double> model_density;  // bin average of rho(E) / n
  double chi_square_per_bin = 0.0;
  double max_abs_z = 0.0;
  double outside_fraction = 0.0;
  double symmetry_max_z = 0.0;
};

/// Pools the spectra of `realizations` independent draws of the coupled
/// ensemble and compares their histogram with the semicircle.
inline DensityRun simulate_density(const RunConfig& config, double epsilon, std::uint64_t run_seed) {
  config.validate();
  const double lambda = epsilon_lambda(config.n, epsilon, CouplingDirection::to_lambda);
  const EnsembleSpec spec{config.n, config.m, lambda, config.alpha, run_seed};
  DensityRun run{DensityModel(config.n, config.alpha, lambda), {}, {}, {}};
  const double radius = run.model.radius();

  std::vector<Vector> spectra(static_cast<std::size_t>(config.realizations));
  for_each_realization(config.realizations, config.worker_count(), [&](int r) {
    RandomStream rng(child_seed(run_seed, static_cast<std::uint64_t>(r)));
    spectra[static_cast<std::size_t>(r)] = detail::eigenvalues(sample_coupled(spec, rng));
  });
  for (const auto& s : spectra) run.eigenvalues.insert(run.eigenvalues.end(), s.begin(), s.end());

  const double lo = config.bins.lo.value_or(-radius);
  const double hi = config.bins.hi.value_or(radius);
  run.histogram = build_histogram(run.eigenvalues, uniform_edges(config.bins.count, lo, hi), Normalization::full);

  const auto& h = run.histogram;
  const double total = static_cast<double>(run.eigenvalues.size());
  const double n = static_cast<double>(config.n);
  std::size_t outside = 0;
  for (double e : run.eigenvalues) outside += std::abs(e) > radius ? 1 : 0;
  run.outside_fraction = static_cast<double>(outside) / total;

  const bool symmetric_range = lo == -hi;
  if (!symmetric_range) run.symmetry_max_z = std::numeric_limits<double>::quiet_NaN();
  run.model_density.resize(h.bins());
  double chi2 = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double p = (run.model.unfold(h.edges[i + 1]) - run.model.unfold(h.edges[i])) / n;
    run.model_density[i] = p / h.width(i);
    const double expected = p * total;
    const double observed = static_cast<double>(h.counts[i]);
    if (expected > 0.0) {
      const double z = (observed - expected) / std::sqrt(expected);
      chi2 += z * z;
      run.max_abs_z = std::max(run.max_abs_z, std::abs(z));
    } else if (observed > 0.0) {
      run.max_abs_z = std::numeric_limits<double>::infinity();
    }
    const double mirror = static_cast<double>(h.counts[h.bins() - 1 - i]);
    if (symmetric_range && observed + mirror > 0.0)
      run.symmetry_max_z = std::max(run.symmetry_max_z, std::abs(observed - mirror) / std::sqrt(observed + mirror));
  }
  run.chi_square_per_bin = chi2 / static_cast<double>(h.bins());
  return run;
}

/// Seed of the i-th entry of an epsilon sweep.
inline std::uint64_t sweep_seed(std::uint64_t seed, std::size_t index) {
  return child_seed(seed, 0x5357454550000000ULL + index);
}

/// Edges for normalized-curvature histograms.
inline std::vector<double> curvature_edges(const BinSpec& bins) {
  return uniform_edges(bins.count, bins.lo.value_or(-5.0), bins.hi.value_or(5.0));
}

/// Bin averages of P(k) over the given edges.
inline std::vector<double> universal_bin_density(std::span<const double> edges) {
  std::vector<double> d(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    d[i] = (gamma_cdf(edges[i + 1], 1.0) - gamma_cdf(edges[i], 1.0)) / (edges[i + 1] - edges[i]);
  return d;
}

}  // namespace levelflow
