#pragma once

#include <stdexcept>

#include "panelid/theta.hpp"

namespace panelid {

/// B: unit lower-bidiagonal matrix with -alpha on the first subdiagonal,
/// the autoregressive filter in stacked form.
inline Mat build_b(double alpha, int big_t) {
  if (big_t < 1) throw std::invalid_argument("T must be >= 1");
  Mat b = Mat::Identity(big_t, big_t);
  for (int r = 1; r < big_t; ++r) b(r, r - 1) = -alpha;
  return b;
}

/// Gamma = B^{-1}: unit lower-triangular Toeplitz with powers of alpha,
/// Gamma(r,c) = alpha^(r-c) for r >= c.
inline Mat build_gamma(double alpha, int big_t) {
  if (big_t < 1) throw std::invalid_argument("T must be >= 1");
  Mat g = Mat::Zero(big_t, big_t);
  for (int r = 0; r < big_t; ++r) {
    double p = 1.0;
    for (int c = r; c >= 0; --c) {
      g(r, c) = p;
      p *= alpha;
    }
  }
  return g;
}

/// L: strictly lower-triangular Toeplitz with L(c+1,c) = 1 and
/// L(r,c) = alpha^(r-c-1) below that. Satisfies
/// Gamma(a)^{-1} Gamma(alpha) = I + (alpha - a) L(alpha) for any a.
inline Mat build_l(double alpha, int big_t) {
  if (big_t < 1) throw std::invalid_argument("T must be >= 1");
  Mat l = Mat::Zero(big_t, big_t);
  for (int c = 0; c + 1 < big_t; ++c) {
    double p = 1.0;
    for (int r = c + 1; r < big_t; ++r) {
      l(r, c) = p;
      p *= alpha;
    }
  }
  return l;
}

/// Error covariance of the differenced model: tridiagonal with free
/// (sigma1_sq, sigma_c) in the leading block and the differencing pattern
/// (2 sigma^2, -sigma^2) elsewhere.
inline Mat build_d_dot(const DExtra& e, int big_t) {
  if (big_t < 1) throw std::invalid_argument("T must be >= 1");
  Mat d = Mat::Zero(big_t, big_t);
  d(0, 0) = e.sigma1_sq;
  if (big_t > 1) {
    d(0, 1) = d(1, 0) = e.sigma_c;
    for (int t = 1; t < big_t; ++t) {
      d(t, t) = 2.0 * e.sigma2;
      if (t + 1 < big_t) d(t, t + 1) = d(t + 1, t) = -e.sigma2;
    }
  }
  return d;
}

/// Scale-aware positive definiteness check with threshold
/// 1e-10 * (trace / T) on the smallest eigenvalue.
inline bool is_positive_definite(const Mat& m, double rel_tol = 1e-10) {
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) return false;
  const double scale = m.trace() / static_cast<double>(m.rows());
  return es.eigenvalues().minCoeff() > rel_tol * scale;
}

/// The error-covariance part of Omega (diagonal D or the tridiagonal
/// differenced covariance).
inline Mat build_d(const Theta& th) {
  if (th.variant == Variant::Differenced) {
    if (!th.d_extra) throw std::invalid_argument("Differenced theta lacks d_extra");
    return build_d_dot(*th.d_extra, th.big_t);
  }
  return Mat(th.d_diag.asDiagonal());
}

/// Omega = F Psi F' + D, the covariance of the filtered data. Off-diagonal
/// entries coincide exactly with those of F Psi F' (no symmetrization pass,
/// which would perturb that equality).
inline Mat build_omega(const Theta& th) {
  th.require_structural();
  Mat omega = th.factors * th.psi * th.factors.transpose() + build_d(th);
  if (!is_positive_definite(omega))
    throw std::invalid_argument("omega is not positive definite");
  return omega;
}

/// Sigma(theta) = Gamma Omega Gamma', the model covariance of the observed
/// panel rows.
inline Mat build_sigma(const Theta& th) {
  Mat g = build_gamma(th.alpha, th.big_t);
  return g * build_omega(th) * g.transpose();
}

/// Sigma without the positive-definiteness gate, for callers (the likelihood
/// barrier) that handle an indefinite result themselves.
inline Mat build_sigma_unchecked(const Theta& th) {
  th.require_structural();
  Mat omega = th.factors * th.psi * th.factors.transpose() + build_d(th);
  Mat g = build_gamma(th.alpha, th.big_t);
  return g * omega * g.transpose();
}

}  // namespace panelid
