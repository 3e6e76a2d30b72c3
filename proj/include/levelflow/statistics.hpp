#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levelflow/error.hpp"
#include "levelflow/random.hpp"

namespace levelflow {

// ---------------------------------------------------------------------------
// Curvature distributions
// ---------------------------------------------------------------------------

/// P(k) = 1 / (2 (1 + k^2)^{3/2}); normalized with <|k|> = 1.
inline double universal_pdf(double k) {
  const double q = 1.0 + k * k;
  return 0.5 / (q * std::sqrt(q));
}

inline void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error(Errc::invalid_gamma, "gamma must be finite and > 0, got " + std::to_string(gamma));
}

/// P(K; gamma) = 1 / (2 gamma (1 + (K/gamma)^2)^{3/2}); <|K|> = gamma.
inline double gamma_pdf(double k, double gamma) {
  check_gamma(gamma);
  return universal_pdf(k / gamma) / gamma;
}

/// F(K; gamma) = (1 + z / sqrt(1 + z^2)) / 2 with z = K / gamma.
inline double gamma_cdf(double k, double gamma) {
  check_gamma(gamma);
  if (std::isinf(k)) return k > 0 ? 1.0 : 0.0;
  const double z = k / gamma;
  return 0.5 * (1.0 + z / std::sqrt(1.0 + z * z));
}

/// Inverse of gamma_cdf; p in (0, 1).
inline double gamma_quantile(double p, double gamma) {
  check_gamma(gamma);
  const double u = 2.0 * p - 1.0;
  return gamma * u / std::sqrt((1.0 - u) * (1.0 + u));
}

/// Inverse-CDF sampling: K = gamma u / sqrt(1 - u^2), u uniform on (-1, 1).
inline std::vector<double> sample_gamma_dist(double gamma, std::size_t n, RandomStream& rng) {
  check_gamma(gamma);
  if (n < 1) throw Error(Errc::invalid_argument, "sample count must be >= 1");
  std::vector<double> out(n);
  for (auto& x : out) x = gamma_quantile(rng.uniform(), gamma);
  return out;
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

enum class Normalization {
  truncated,  // density mass = in-range samples only, so sum(density * width) = 1
  full,       // mass includes underflow and overflow
};

struct Histogram {
  std::vector<double> edges;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;  // in-range samples, equal to sum(counts)
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;
  Normalization normalization = Normalization::truncated;

  std::size_t bins() const { return counts.size(); }
  double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }

  /// Samples the density is normalized against.
  std::uint64_t mass() const {
    return normalization == Normalization::truncated ? total : total + underflow + overflow;
  }

  std::vector<double> density() const {
    if (mass() == 0) throw Error(Errc::empty_input, "histogram density undefined without samples");
    std::vector<double> d(bins());
    const double m = static_cast<double>(mass());
    for (std::size_t i = 0; i < bins(); ++i) d[i] = static_cast<double>(counts[i]) / (m * width(i));
    return d;
  }

  /// Bin-wise merge; both histograms must share edges.
  Histogram& operator+=(const Histogram& other) {
    if (other.edges != edges) throw Error(Errc::invalid_edges, "cannot merge histograms with different edges");
    for (std::size_t i = 0; i < bins(); ++i) counts[i] += other.counts[i];
    total += other.total;
    underflow += other.underflow;
    overflow += other.overflow;
    return *this;
  }
};

inline void check_edges(std::span<const double> edges) {
  if (edges.size() < 2) throw Error(Errc::invalid_edges, "need at least two bin edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1]) || !std::isfinite(edges[i]) || !std::isfinite(edges[i + 1]))
      throw Error(Errc::invalid_edges, "bin edges must be finite and strictly ascending");
}

inline std::vector<double> uniform_edges(std::size_t bins, double lo, double hi) {
  if (bins < 1 || !(lo < hi)) throw Error(Errc::invalid_edges, "need >= 1 bin over a non-empty range");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

inline std::vector<double> log_edges(std::size_t bins, double lo, double hi) {
  if (bins < 1 || !(lo > 0.0 && lo < hi)) throw Error(Errc::invalid_edges, "log bins need 0 < lo < hi");
  std::vector<double> e(bins + 1);
  const double step = std::log(hi / lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo * std::exp(step * static_cast<double>(i));
  e.front() = lo;
  e.back() = hi;
  return e;
}

/// Half-open bins [e_i, e_{i+1}); samples off the range go to underflow/overflow.
inline Histogram build_histogram(std::span<const double> samples, std::span<const double> edges,
                                 Normalization normalization = Normalization::truncated) {
  check_edges(edges);
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.counts.assign(edges.size() - 1, 0);
  h.normalization = normalization;
  for (double x : samples) {
    if (x < edges.front()) {
      ++h.underflow;
    } else if (x >= edges.back()) {
      ++h.overflow;
    } else {
      const auto it = std::upper_bound(edges.begin(), edges.end(), x);
      ++h.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
      ++h.total;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// One-parameter fit of P(K; gamma)
// ---------------------------------------------------------------------------

/// One data point of a density fit.
struct FitBin {
  double lo = 0.0;
  double hi = 0.0;
  double density = 0.0;
  double variance = std::numeric_limits<double>::quiet_NaN();  // Poisson variance if known
};

enum class FitModel {
  bin_average,            // (F(hi) - F(lo)) / width
  bin_average_truncated,  // the same, conditioned on the histogram range
  point,                  // P(K) at the bin centre; for tabulated (K, density) input
};

struct FitOptions {
  double gamma_lo = 0.1;
  double gamma_hi = 10.0;
  double rel_tol = 1e-6;
  int scan_points = 64;
};

struct DistributionFit {
  double gamma = 0.0;
  double objective = 0.0;  // mean squared density residual
  double gamma_uncertainty = 0.0;
  double reduced_chi_square = std::numeric_limits<double>::quiet_NaN();
  std::size_t bins_used = 0;
};

namespace detail {

inline std::vector<double> model_densities(std::span<const FitBin> bins, FitModel model, double gamma) {
  std::vector<double> m(bins.size());
  double range_mass = 1.0;
  if (model == FitModel::bin_average_truncated && !bins.empty())
    range_mass = gamma_cdf(bins.back().hi, gamma) - gamma_cdf(bins.front().lo, gamma);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    if (model == FitModel::point) {
      m[i] = gamma_pdf(0.5 * (b.lo + b.hi), gamma);
    } else {
      m[i] = (gamma_cdf(b.hi, gamma) - gamma_cdf(b.lo, gamma)) / ((b.hi - b.lo) * range_mass);
    }
  }
  return m;
}

inline double fit_objective(std::span<const FitBin> bins, FitModel model, double gamma) {
  const auto m = model_densities(bins, model, gamma);
  double acc = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double r = bins[i].density - m[i];
    acc += r * r;
  }
  return acc / static_cast<double>(bins.size());
}

}  // namespace detail

/// Least-squares fit of gamma: a log-spaced scan over [gamma_lo, gamma_hi]
/// brackets the minimum, then golden-section search refines it in log gamma.
/// The uncertainty comes from the objective's curvature at the minimum.
inline DistributionFit fit_gamma(std::span<const FitBin> bins, FitModel model, const FitOptions& options = {}) {
  std::size_t nonempty = 0;
  for (const auto& b : bins) nonempty += b.density > 0.0 ? 1 : 0;
  if (nonempty < 5)
    throw Error(Errc::insufficient_bins, "need >= 5 non-empty bins, got " + std::to_string(nonempty));
  if (!(options.gamma_lo > 0.0 && options.gamma_lo < options.gamma_hi))
    throw Error(Errc::invalid_argument, "fit bracket must satisfy 0 < lo < hi");

  auto objective = [&](double log_gamma) { return detail::fit_objective(bins, model, std::exp(log_gamma)); };

  const double a0 = std::log(options.gamma_lo);
  const double b0 = std::log(options.gamma_hi);
  const int scan = std::max(options.scan_points, 3);
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan; ++i) {
    const double v = objective(a0 + (b0 - a0) * i / (scan - 1));
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  if (best == 0 || best == scan - 1)
    throw Error(Errc::no_minimum_in_bracket, "objective is smallest at the bracket end gamma=" +
                                                 std::to_string(best == 0 ? options.gamma_lo : options.gamma_hi));

  const double step = (b0 - a0) / (scan - 1);
  double a = a0 + step * (best - 1);
  double b = a0 + step * (best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  // Width in log gamma approximates the relative width in gamma.
  while (b - a > options.rel_tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }

  DistributionFit fit;
  fit.gamma = std::exp(0.5 * (a + b));
  fit.objective = detail::fit_objective(bins, model, fit.gamma);
  fit.bins_used = bins.size();

  const double h = 1e-3 * fit.gamma;
  const double second = (detail::fit_objective(bins, model, fit.gamma + h) - 2.0 * fit.objective +
                         detail::fit_objective(bins, model, fit.gamma - h)) / (h * h);
  const double dof = static_cast<double>(bins.size()) - 1.0;
  fit.gamma_uncertainty = second > 0.0 ? std::sqrt(2.0 * fit.objective / (dof * second)) : 0.0;

  const auto m = detail::model_densities(bins, model, fit.gamma);
  double chi2 = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(bins[i].variance > 0.0)) continue;
    const double r = bins[i].density - m[i];
    chi2 += r * r / bins[i].variance;
    ++used;
  }
  if (used > 1) fit.reduced_chi_square = chi2 / static_cast<double>(used - 1);
  return fit;
}

/// Fits a sample histogram against the bin-averaged model. Poisson variances
/// use the expected count under a unit-gamma density scaled to the bin.
inline DistributionFit fit_gamma(const Histogram& hist, const FitOptions& options = {}) {
  const auto density = hist.density();
  const double mass = static_cast<double>(hist.mass());
  std::vector<FitBin> bins(hist.bins());
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    const double w = hist.width(i);
    // Observed-count variance; empty bins are left without a weight.
    const double var = hist.counts[i] > 0 ? static_cast<double>(hist.counts[i]) / (mass * mass * w * w)
                                          : std::numeric_limits<double>::quiet_NaN();
    bins[i] = {hist.edges[i], hist.edges[i + 1], density[i], var};
  }
  const FitModel model = hist.normalization == Normalization::truncated ? FitModel::bin_average_truncated
                                                                        : FitModel::bin_average;
  return fit_gamma(bins, model, options);
}

/// Fits tabulated (K, density) points against the point-evaluated model.
inline DistributionFit fit_gamma_points(std::span<const double> k, std::span<const double> density,
                                        const FitOptions& options = {}) {
  if (k.size() != density.size()) throw Error(Errc::invalid_argument, "K and density tables differ in length");
  std::vector<FitBin> bins(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) bins[i] = {k[i], k[i], density[i]};
  return fit_gamma(bins, FitModel::point, options);
}

// ---------------------------------------------------------------------------
// Goodness of fit and tails
// ---------------------------------------------------------------------------

/// Kolmogorov-Smirnov distance between the samples and P(K; gamma).
inline double ks_statistic(std::span<const double> samples, double gamma) {
  check_gamma(gamma);
  if (samples.empty()) throw Error(Errc::empty_input, "KS statistic of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = gamma_cdf(sorted[i], gamma);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct TailFit {
  double exponent = 0.0;
  double standard_error = 0.0;
  std::size_t points = 0;
};

/// Weighted least-squares slope of log(y) against log(x).
inline TailFit log_log_slope(std::span<const double> x, std::span<const double> y,
                             std::span<const double> weights = {}) {
  if (x.size() != y.size() || (!weights.empty() && weights.size() != x.size()))
    throw Error(Errc::invalid_argument, "log-log fit inputs differ in length");
  double sw = 0.0, sx = 0.0, sy = 0.0;
  std::vector<double> lx, ly, w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double wi = weights.empty() ? 1.0 : weights[i];
    if (!(wi > 0.0)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    w.push_back(wi);
    sw += wi;
    sx += wi * lx.back();
    sy += wi * ly.back();
  }
  if (lx.size() < 3) throw Error(Errc::insufficient_tail_data, "need >= 3 positive points for a log-log slope");
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += w[i] * (lx[i] - mx) * (lx[i] - mx);
    sxy += w[i] * (lx[i] - mx) * (ly[i] - my);
  }
  TailFit fit;
  fit.exponent = sxy / sxx;
  fit.points = lx.size();
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - my - fit.exponent * (lx[i] - mx);
    rss += w[i] * r * r;
  }
  fit.standard_error = std::sqrt(rss / (static_cast<double>(lx.size()) - 2.0) / sxx);
  return fit;
}

/// Tail exponent of the |k| density over [k_min, k_max]: log-spaced bins,
/// each weighted by its count (the inverse variance of its log density).
inline TailFit tail_exponent(std::span<const double> samples, double k_min, double k_max, std::size_t bins = 10) {
  if (!(k_min > 0.0) || !(k_max >= 5.0 * k_min))
    throw Error(Errc::invalid_argument, "tail window needs k_min > 0 and k_max / k_min >= 5");
  std::vector<double> magnitudes;
  magnitudes.reserve(samples.size());
  for (double s : samples) magnitudes.push_back(std::abs(s));
  const auto edges = log_edges(bins, k_min, k_max);
  const auto hist = build_histogram(magnitudes, edges);
  if (hist.total < 100)
    throw Error(Errc::insufficient_tail_data,
                "only " + std::to_string(hist.total) + " samples in the tail window (need >= 100)");
  std::vector<double> centers(hist.bins()), density(hist.bins()), weights(hist.bins());
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    centers[i] = std::sqrt(edges[i] * edges[i + 1]);
    density[i] = static_cast<double>(hist.counts[i]) / hist.width(i);
    weights[i] = static_cast<double>(hist.counts[i]);
  }
  return log_log_slope(centers, density, weights);
}

}  // namespace levelflow
