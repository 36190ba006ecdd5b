#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "panelid/poly.hpp"

namespace panelid {

/// All real roots of p, sorted ascending, deduplicated. Eigenvalues of the
/// companion matrix of the monic-scaled polynomial, followed by a Newton
/// polish; candidates are kept when the polished residual satisfies
/// |p(x)| <= 1e-10 * scale(x). Throws on the zero polynomial.
inline std::vector<double> real_roots(const AlphaPoly& p) {
  if (p.is_zero())
    throw std::invalid_argument("real_roots: zero polynomial (degenerate input)");
  const int n = p.degree();
  std::vector<double> out;
  if (n == 0) return out;

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  const double lead = p.coeff(n);
  for (int i = 0; i < n; ++i) companion(i, n - 1) = -p.coeff(i) / lead;
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("real_roots: eigen solver failed");

  const AlphaPoly dp = p.derivative();
  for (int i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    // near-real pairs (e.g. perturbed double roots) are kept as candidates
    if (std::abs(lam.imag()) > 1e-6 * (1.0 + std::abs(lam.real()))) continue;
    double x = lam.real();
    for (int it = 0; it < 50; ++it) {
      const double fx = p.eval(x);
      const double gx = dp.eval(x);
      if (gx == 0.0) break;
      const double step = fx / gx;
      x -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
    }
    if (std::abs(p.eval(x)) > std::abs(p.eval(lam.real()))) x = lam.real();
    if (std::abs(p.eval(x)) <= 1e-10 * (p.eval_scale(x) + 1e-300))
      out.push_back(x);
  }

  std::sort(out.begin(), out.end());
  // collapse clusters: companion eigenvalues of a double root land ~1e-8
  // apart, so the merge width matches the checks' root tolerance
  std::vector<double> uniq;
  for (double x : out)
    if (uniq.empty() || std::abs(x - uniq.back()) > 1e-7 * (1.0 + std::abs(x)))
      uniq.push_back(x);
  return uniq;
}

/// Two roots match within the clustering tolerance used by the
/// identification checks.
inline bool roots_match(double a, double b, double rel_tol = 1e-7) {
  return std::abs(a - b) <= rel_tol * (1.0 + std::abs(a));
}

}  // namespace panelid
