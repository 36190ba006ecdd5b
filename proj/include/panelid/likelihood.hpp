#pragma once

#include <cmath>
#include <stdexcept>

#include "panelid/matrices.hpp"

namespace panelid {

namespace detail {

struct ObjectiveParts {
  double half_logdet = 0.0;
  double half_trace = 0.0;
  bool pd = true;
  double min_eig = 0.0;  // only set when not PD
};

inline ObjectiveParts gaussian_objective_parts(const Mat& sigma, const Mat& s_n) {
  ObjectiveParts out;
  Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(sigma)};
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
    out.half_logdet = logdet;  // sum log L_ii = 0.5 log det
    out.half_trace = 0.5 * llt.solve(Eigen::MatrixXd(s_n)).trace();
    return out;
  }
  out.pd = false;
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  out.min_eig = es.eigenvalues().minCoeff();
  // evaluate on the shifted matrix to keep line searches informative
  const double shift = std::abs(out.min_eig) + 1e-8 * (1.0 + sigma.trace());
  Mat reg = sigma + shift * Mat::Identity(sigma.rows(), sigma.cols());
  Eigen::LLT<Eigen::MatrixXd> llt2{Eigen::MatrixXd(reg)};
  const Eigen::MatrixXd l = llt2.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
  out.half_logdet = logdet;
  out.half_trace = 0.5 * llt2.solve(Eigen::MatrixXd(s_n)).trace();
  return out;
}

}  // namespace detail

/// Negative per-unit concentrated Gaussian quasi log-likelihood,
/// 0.5 log|Sigma(theta)| + 0.5 tr(Sigma(theta)^{-1} S_N). A non-PD
/// Sigma(theta) returns a finite barrier value (objective on the shifted
/// matrix plus a penalty proportional to the most negative eigenvalue) so
/// optimizers can recover.
inline double neg_quasi_loglik(const Theta& th, const Mat& s_n,
                               bool* pd_flag = nullptr) {
  if (s_n.rows() != th.big_t || s_n.cols() != th.big_t)
    throw std::invalid_argument("S_N must be T x T");
  Mat sigma = build_sigma_unchecked(th);
  auto parts = detail::gaussian_objective_parts(sigma, s_n);
  if (pd_flag) *pd_flag = parts.pd;
  double value = parts.half_logdet + parts.half_trace;
  if (!parts.pd) value += 1e4 * (1.0 + std::abs(parts.min_eig));
  if (!std::isfinite(value)) value = 1e30;
  return value;
}

/// Strict variant: throws instead of applying the barrier.
inline double neg_quasi_loglik_strict(const Theta& th, const Mat& s_n) {
  bool pd = true;
  const double value = neg_quasi_loglik(th, s_n, &pd);
  if (!pd) throw std::runtime_error("Sigma(theta) is not positive definite");
  return value;
}

/// Population limit of the scaled quasi log-likelihood,
/// -log|Sigma(theta)| - tr(Sigma(theta0) Sigma(theta)^{-1}); uniquely
/// maximized over Sigma at Sigma(theta) = Sigma(theta0).
inline double limit_objective(const Theta& th, const Theta& theta0) {
  if (th.big_t != theta0.big_t)
    throw std::invalid_argument("limit_objective: dimension mismatch");
  return -2.0 * neg_quasi_loglik_strict(th, build_sigma(theta0));
}

}  // namespace panelid
