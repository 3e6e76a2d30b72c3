#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "levelflow/ensemble.hpp"
#include "levelflow/error.hpp"

namespace levelflow {

/// Fixed matrices of the path H(t) = h1 cos t + h2 sin t.
struct RotatingPair {
  SymMatrix h1;
  SymMatrix h2;

  int dim() const { return static_cast<int>(h1.rows()); }

  void validate() const {
    if (h1.rows() != h1.cols() || h2.rows() != h2.cols() || h1.rows() != h2.rows())
      throw Error(Errc::invalid_dimension, "rotating pair needs two square matrices of equal size");
    if (h1.rows() < 1) throw Error(Errc::invalid_dimension, "rotating pair is empty");
  }

  /// Principal sub-pair on indices [offset, offset + size).
  RotatingPair block(int offset, int size) const {
    return {h1.block(offset, offset, size, size), h2.block(offset, offset, size, size)};
  }
};

/// Spectrum and its parametric derivatives at one t.
struct SpectralFrame {
  double t = 0.0;
  Vector energies;     // ascending
  Vector velocities;   // dE_k/dt = P_kk
  Vector curvatures;   // d^2E_k/dt^2
  SymMatrix p_matrix;  // U^T (dH/dt) U
  std::vector<bool> degenerate;  // nearest-neighbour gap below tolerance

  int size() const { return static_cast<int>(energies.size()); }

  double min_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    for (int k = 1; k < size(); ++k) gap = std::min(gap, energies(k) - energies(k - 1));
    return gap;
  }
};

inline SymMatrix hamiltonian_at(const RotatingPair& pair, double t) {
  return pair.h1 * std::cos(t) + pair.h2 * std::sin(t);
}

/// First (order 1) or second (order 2) derivative of H(t) in t.
inline SymMatrix hamiltonian_rate(const RotatingPair& pair, double t, int order) {
  switch (order) {
    case 1: return pair.h2 * std::cos(t) - pair.h1 * std::sin(t);
    case 2: return -hamiltonian_at(pair, t);
    default:
      throw Error(Errc::invalid_order, "derivative order must be 1 or 2, got " + std::to_string(order));
  }
}

namespace detail {

struct Eigensystem {
  Vector values;
  Eigen::MatrixXd vectors;
};

inline std::string matrix_diagnostics(const SymMatrix& h) {
  std::ostringstream os;
  os << "dim=" << h.rows() << " frobenius=" << h.norm() << " max|h|=" << h.cwiseAbs().maxCoeff()
     << " finite=" << (h.allFinite() ? "yes" : "no");
  return os.str();
}

// Eigenvectors are fixed up to sign by making each column's largest-magnitude
// entry positive.
inline Eigensystem eigensystem(const SymMatrix& h, bool with_vectors = true) {
  Eigen::SelfAdjointEigenSolver<SymMatrix> solver(
      h, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::eigensolver_failure, "symmetric eigensolver did not converge (" +
                                               matrix_diagnostics(h) + ")");
  Eigensystem es{solver.eigenvalues(), {}};
  if (with_vectors) {
    es.vectors = solver.eigenvectors();
    for (Eigen::Index c = 0; c < es.vectors.cols(); ++c) {
      Eigen::Index imax = 0;
      es.vectors.col(c).cwiseAbs().maxCoeff(&imax);
      if (es.vectors(imax, c) < 0.0) es.vectors.col(c) *= -1.0;
    }
  }
  return es;
}

inline Vector eigenvalues(const SymMatrix& h) { return eigensystem(h, false).values; }

// Ë_k = -E_k + sum_{m != k} 2 P_km^2 / (E_k - E_m), valid because d²H/dt² = -H.
inline Vector curvature_sum(const Vector& energies, const SymMatrix& p) {
  const Eigen::Index n = energies.size();
  Vector curv(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == k) continue;
      acc += 2.0 * p(k, m) * p(k, m) / (energies(k) - energies(m));
    }
    curv(k) = -energies(k) + acc;
  }
  return curv;
}

inline std::vector<bool> degeneracy_mask(const Vector& energies, double tol) {
  const Eigen::Index n = energies.size();
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (energies(k + 1) - energies(k) < tol) {
      mask[static_cast<std::size_t>(k)] = true;
      mask[static_cast<std::size_t>(k + 1)] = true;
    }
  }
  return mask;
}

inline SpectralFrame frame_from(double t, Vector energies, SymMatrix p, double degeneracy_tol) {
  SpectralFrame f;
  f.t = t;
  f.velocities = p.diagonal();
  f.curvatures = curvature_sum(energies, p);
  f.degenerate = degeneracy_mask(energies, degeneracy_tol);
  f.energies = std::move(energies);
  f.p_matrix = std::move(p);
  return f;
}

}  // namespace detail

/// Diagonalizes H(t) and returns energies, velocities P_kk, curvatures from
/// the equations of motion, and P = U^T H'(t) U. Levels whose nearest
/// neighbour lies closer than degeneracy_tol are flagged; their curvature is
/// still stored.
inline SpectralFrame spectral_frame(const RotatingPair& pair, double t, double degeneracy_tol) {
  pair.validate();
  if (!(degeneracy_tol > 0.0))
    throw Error(Errc::invalid_argument, "degeneracy tolerance must be > 0");
  const auto es = detail::eigensystem(hamiltonian_at(pair, t));
  SymMatrix p = es.vectors.transpose() * hamiltonian_rate(pair, t, 1) * es.vectors;
  // Symmetrize round-off; velocities are read from this same diagonal.
  p = 0.5 * (p + p.transpose()).eval();
  return detail::frame_from(t, es.values, std::move(p), degeneracy_tol);
}

struct FiniteDifferenceRates {
  Vector velocities;
  Vector curvatures;
};

/// Central-difference velocities and curvatures from three independent
/// diagonalizations at t - delta, t, t + delta.
inline FiniteDifferenceRates curvature_fd_oracle(const RotatingPair& pair, double t, double delta) {
  pair.validate();
  if (!(delta > 0.0)) throw Error(Errc::invalid_argument, "stencil width must be > 0");
  const Vector lo = detail::eigenvalues(hamiltonian_at(pair, t - delta));
  const Vector mid = detail::eigenvalues(hamiltonian_at(pair, t));
  const Vector hi = detail::eigenvalues(hamiltonian_at(pair, t + delta));

  // Ascending order must identify the same level at every stencil point: each
  // level may move by less than half its gaps over the stencil.
  const Eigen::Index n = mid.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    double gap = std::numeric_limits<double>::infinity();
    if (k > 0) gap = std::min(gap, mid(k) - mid(k - 1));
    if (k + 1 < n) gap = std::min(gap, mid(k + 1) - mid(k));
    const double move = std::max(std::abs(hi(k) - mid(k)), std::abs(mid(k) - lo(k)));
    if (!(move < 0.5 * gap))
      throw Error(Errc::stencil_crossing,
                  "level " + std::to_string(k) + " moves " + std::to_string(move) +
                      " across the stencil but its gap is " + std::to_string(gap));
  }
  return {(hi - lo) / (2.0 * delta), (hi - 2.0 * mid + lo) / (delta * delta)};
}

struct MotionOptions {
  double gap_floor = 1e-10;
  double degeneracy_tol = 1e-12;
};

/// Integrates the coupled equations of motion
///   dE_k/dt = P_kk,   dP/dt = [P, S] - diag(E),   S_kl = P_kl / (E_l - E_k),
/// from t0 to t1 with fixed-step classical RK4, starting from a direct
/// diagonalization at t0. Consistency check only; spectral_frame is the
/// production path.
inline SpectralFrame integrate_motion(const RotatingPair& pair, double t0, double t1, int steps,
                                      const MotionOptions& options = {}) {
  pair.validate();
  if (steps < 1) throw Error(Errc::invalid_argument, "steps must be >= 1");
  SpectralFrame start = spectral_frame(pair, t0, options.degeneracy_tol);
  if (start.min_gap() < options.gap_floor)
    throw Error(Errc::near_degeneracy, "initial frame has gap " + std::to_string(start.min_gap()));
  if (t1 == t0) return start;

  const Eigen::Index n = start.energies.size();
  struct State {
    Vector e;
    SymMatrix p;
  };
  auto rhs = [&](const State& s) {
    SymMatrix rot = SymMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index l = 0; l < n; ++l) {
        if (k == l) continue;
        const double gap = s.e(l) - s.e(k);
        if (std::abs(gap) < options.gap_floor)
          throw Error(Errc::near_degeneracy,
                      "levels " + std::to_string(k) + "," + std::to_string(l) +
                          " closer than gap floor during integration");
        rot(k, l) = s.p(k, l) / gap;
      }
    }
    State d;
    d.e = s.p.diagonal();
    d.p = s.p * rot - rot * s.p;
    d.p.diagonal() -= s.e;
    return d;
  };
  auto axpy = [](const State& s, double h, const State& d) {
    return State{s.e + h * d.e, s.p + h * d.p};
  };

  State s{start.energies, start.p_matrix};
  const double h = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    const State k1 = rhs(s);
    const State k2 = rhs(axpy(s, 0.5 * h, k1));
    const State k3 = rhs(axpy(s, 0.5 * h, k2));
    const State k4 = rhs(axpy(s, h, k3));
    s.e += (h / 6.0) * (k1.e + 2.0 * k2.e + 2.0 * k3.e + k4.e);
    s.p += (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  }
  return detail::frame_from(t1, std::move(s.e), std::move(s.p), options.degeneracy_tol);
}

/// Largest difference between the sorted spectra of H(t) and of
/// H_D(0) cos t + P(0) sin t, which the explicit solution makes unitarily
/// equivalent.
inline double rotation_frame_check(const RotatingPair& pair, double t) {
  pair.validate();
  const auto es0 = detail::eigensystem(pair.h1);
  const SymMatrix p0 = es0.vectors.transpose() * pair.h2 * es0.vectors;
  SymMatrix rotated = p0 * std::sin(t);
  rotated.diagonal() += es0.values * std::cos(t);
  rotated = 0.5 * (rotated + rotated.transpose()).eval();
  const Vector a = detail::eigenvalues(rotated);
  const Vector b = detail::eigenvalues(hamiltonian_at(pair, t));
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace levelflow
