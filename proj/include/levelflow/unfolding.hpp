#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levelflow/dynamics.hpp"
#include "levelflow/error.hpp"

namespace levelflow {

/// Mean level density of the two-block ensemble: a semicircle of radius
/// R = sqrt(n (1 + lambda^2) / (2 alpha)) holding n levels.
class DensityModel {
 public:
  DensityModel(int n, double alpha, double lambda) : n_(n), alpha_(alpha), lambda_(lambda) {
    if (n < 1) throw Error(Errc::invalid_dimension, "n must be >= 1");
    if (!(alpha > 0.0)) throw Error(Errc::invalid_scale, "alpha must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::out_of_range, "lambda must lie in [0, 1]");
    radius_ = std::sqrt(n * (1.0 + lambda * lambda) / (2.0 * alpha));
    prefactor_ = 4.0 * alpha / (std::numbers::pi * (1.0 + lambda * lambda));
  }

  int n() const { return n_; }
  double alpha() const { return alpha_; }
  double lambda() const { return lambda_; }
  double radius() const { return radius_; }

  /// rho(E) = 4 alpha / (pi (1 + lambda^2)) sqrt(R^2 - E^2) on the support, 0 off it.
  double density(double e) const {
    const double r2 = radius_ * radius_ - e * e;
    return r2 > 0.0 ? prefactor_ * std::sqrt(r2) : 0.0;
  }

  /// d rho / dE inside the open support.
  double density_slope(double e) const {
    const double r2 = radius_ * radius_ - e * e;
    if (!(r2 > 0.0)) return 0.0;
    return -prefactor_ * e / std::sqrt(r2);
  }

  /// Integrated density x(E) = int_{-inf}^{E} rho, clamped to [0, n].
  double unfold(double e) const {
    if (e <= -radius_) return 0.0;
    if (e >= radius_) return static_cast<double>(n_);
    const double u = e / radius_;
    return n_ * (0.5 + (u * std::sqrt(1.0 - u * u) + std::asin(u)) / std::numbers::pi);
  }

 private:
  int n_;
  double alpha_;
  double lambda_;
  double radius_ = 0.0;
  double prefactor_ = 0.0;
};

inline double mean_density(const DensityModel& model, double e) { return model.density(e); }
inline double unfold(const DensityModel& model, double e) { return model.unfold(e); }

/// One level observation carried through the curvature pipeline. The
/// rescaled and normalized values stay empty until their batch pass runs.
struct CurvatureSample {
  std::uint64_t realization = 0;
  int level = 0;
  double t = 0.0;
  double energy = 0.0;
  double raw_velocity = 0.0;
  double raw_curvature = 0.0;
  double unfolded_velocity = 0.0;
  double unfolded_curvature = 0.0;
  std::optional<double> rescaled;    // K
  std::optional<double> normalized;  // k
};

struct UnfoldedRates {
  double velocity;   // x' = rho(E) E'
  double curvature;  // x'' = rho(E) E'' + rho'(E) E'^2
};

inline constexpr double default_edge_margin = 1e-3;

/// Chain rule through the unfolding map for a single level.
inline UnfoldedRates unfold_rates(const DensityModel& model, double energy, double velocity,
                                  double curvature, double edge_margin = default_edge_margin) {
  if (std::abs(energy) > model.radius() * (1.0 - edge_margin))
    throw Error(Errc::edge_proximity, "level at E=" + std::to_string(energy) +
                                          " is within the edge margin of R=" +
                                          std::to_string(model.radius()));
  const double rho = model.density(energy);
  return {rho * velocity, rho * curvature + model.density_slope(energy) * velocity * velocity};
}

/// Unfolded velocities and curvatures of the given levels of a frame.
inline std::vector<UnfoldedRates> unfold_dynamics(const DensityModel& model, const SpectralFrame& frame,
                                                  std::span<const int> levels,
                                                  double edge_margin = default_edge_margin) {
  std::vector<UnfoldedRates> out;
  out.reserve(levels.size());
  for (int k : levels)
    out.push_back(unfold_rates(model, frame.energies(k), frame.velocities(k), frame.curvatures(k),
                               edge_margin));
  return out;
}

/// Central window of a frame's levels by index, skipping degenerate ones.
/// The window holds round(window_fraction * size) levels centred in the
/// spectrum, e.g. indices 25..74 for 100 levels at fraction 0.5.
inline std::vector<int> select_levels(const SpectralFrame& frame, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw Error(Errc::invalid_argument, "window fraction must lie in (0, 1]");
  const int n = frame.size();
  const int count = std::clamp(static_cast<int>(std::lround(window_fraction * n)), 0, n);
  const int first = (n - count) / 2;
  std::vector<int> levels;
  levels.reserve(static_cast<std::size_t>(count));
  for (int k = first; k < first + count; ++k)
    if (frame.degenerate.empty() || !frame.degenerate[static_cast<std::size_t>(k)]) levels.push_back(k);
  return levels;
}

namespace detail {

// Neumaier-compensated sum in the given order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

struct BatchMoments {
  double mean_velocity_sq = 0.0;       // <x'^2>
  double mean_velocity_curv = 0.0;     // <x' x''>
};

/// Fills K = (x'' - (<x'x''> / <x'^2>) x') / (pi <x'^2>) for every sample, with
/// both averages taken over the whole batch first.
inline BatchMoments rescale_batch(std::span<CurvatureSample> samples) {
  if (samples.empty()) throw Error(Errc::empty_batch, "cannot rescale an empty batch");
  detail::CompensatedSum vv, vc;
  for (const auto& s : samples) {
    vv.add(s.unfolded_velocity * s.unfolded_velocity);
    vc.add(s.unfolded_velocity * s.unfolded_curvature);
  }
  const double count = static_cast<double>(samples.size());
  BatchMoments m{vv.value() / count, vc.value() / count};
  if (!(m.mean_velocity_sq > 0.0))
    throw Error(Errc::zero_velocity_variance, "batch has <x'^2> = 0");
  const double slope = m.mean_velocity_curv / m.mean_velocity_sq;
  const double scale = 1.0 / (std::numbers::pi * m.mean_velocity_sq);
  for (auto& s : samples)
    s.rescaled = scale * (s.unfolded_curvature - slope * s.unfolded_velocity);
  return m;
}

/// Fills k = K / <|K|>; returns <|K|>.
inline double normalize_batch(std::span<CurvatureSample> samples) {
  if (samples.empty()) throw Error(Errc::empty_batch, "cannot normalize an empty batch");
  detail::CompensatedSum abs_sum;
  for (const auto& s : samples) {
    if (!s.rescaled) throw Error(Errc::invalid_argument, "normalize_batch needs rescaled samples");
    abs_sum.add(std::abs(*s.rescaled));
  }
  const double mean_abs = abs_sum.value() / static_cast<double>(samples.size());
  if (!(mean_abs > 0.0)) throw Error(Errc::degenerate_batch, "all rescaled curvatures are zero");
  for (auto& s : samples) s.normalized = *s.rescaled / mean_abs;
  return mean_abs;
}

}  // namespace levelflow
