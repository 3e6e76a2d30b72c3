#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "levelflow/error.hpp"
#include "levelflow/random.hpp"

namespace levelflow {

/// Dense real symmetric matrix. Samplers only draw the upper triangle and
/// mirror it, so mirrored entries are bitwise equal.
using SymMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Parameters of the two-block ensemble
///   H = P H0 P + Q H0 Q + lambda (P H0 Q + Q H0 P),  p(H0) ~ exp(-alpha tr H0^2),
/// where P projects on the first m basis states and Q = 1 - P.
struct EnsembleSpec {
  int n = 100;
  int m = 50;
  double lambda = 1.0;
  double alpha = 0.5;
  std::uint64_t seed = 1;

  /// Dimension-independent coupling, epsilon = sqrt(n) * lambda.
  double epsilon() const { return std::sqrt(static_cast<double>(n)) * lambda; }

  void validate() const {
    if (n < 2) throw Error(Errc::invalid_dimension, "n must be >= 2, got " + std::to_string(n));
    if (m < 1 || m >= n)
      throw Error(Errc::invalid_dimension,
                  "block size m must satisfy 1 <= m < n, got m=" + std::to_string(m) +
                      " n=" + std::to_string(n));
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw Error(Errc::invalid_scale, "alpha must be > 0, got " + std::to_string(alpha));
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw Error(Errc::out_of_range, "lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
};

/// One GOE matrix with density proportional to exp(-alpha tr H^2):
/// diagonal variance 1/(2 alpha), off-diagonal variance 1/(4 alpha).
/// Entries are drawn row by row over the upper triangle (i <= j).
inline SymMatrix sample_goe(int n, double alpha, RandomStream& rng) {
  if (n < 1) throw Error(Errc::invalid_dimension, "n must be >= 1, got " + std::to_string(n));
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(Errc::invalid_scale, "alpha must be > 0, got " + std::to_string(alpha));

  const double diag_sd = std::sqrt(1.0 / (2.0 * alpha));
  const double off_sd = std::sqrt(1.0 / (4.0 * alpha));
  SymMatrix h(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = diag_sd * rng.normal();
    for (int j = i + 1; j < n; ++j) {
      const double x = off_sd * rng.normal();
      h(i, j) = x;
      h(j, i) = x;
    }
  }
  return h;
}

/// One draw of the coupled two-block ensemble. A single GOE draw is taken and
/// every entry linking the first m indices to the remaining n - m is scaled by
/// lambda; the three projected terms touch disjoint entries, so this has the
/// same distribution as three independent draws.
inline SymMatrix sample_coupled(const EnsembleSpec& spec, RandomStream& rng) {
  spec.validate();
  SymMatrix h = sample_goe(spec.n, spec.alpha, rng);
  if (spec.lambda != 1.0) {
    const int rest = spec.n - spec.m;
    h.block(0, spec.m, spec.m, rest) *= spec.lambda;
    h.block(spec.m, 0, rest, spec.m) *= spec.lambda;
  }
  return h;
}

enum class CouplingDirection { to_lambda, to_epsilon };

/// Converts between lambda and epsilon = sqrt(n) lambda.
inline double epsilon_lambda(int n, double value, CouplingDirection direction) {
  if (n < 1) throw Error(Errc::invalid_dimension, "n must be >= 1, got " + std::to_string(n));
  if (!(value >= 0.0) || !std::isfinite(value))
    throw Error(Errc::out_of_range, "coupling must be finite and >= 0, got " + std::to_string(value));
  const double root_n = std::sqrt(static_cast<double>(n));
  if (direction == CouplingDirection::to_epsilon) {
    if (value > 1.0)
      throw Error(Errc::out_of_range, "lambda must lie in [0, 1], got " + std::to_string(value));
    return root_n * value;
  }
  const double lambda = value / root_n;
  if (lambda > 1.0)
    throw Error(Errc::out_of_range, "epsilon=" + std::to_string(value) + " gives lambda=" +
                                        std::to_string(lambda) + " > 1 for n=" + std::to_string(n));
  return lambda;
}

}  // namespace levelflow
