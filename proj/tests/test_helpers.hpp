#pragma once

#include <vector>

#include "panelid/jtilde.hpp"
#include "panelid/theta.hpp"

namespace testutil {

using panelid::Mat;
using panelid::Theta;
using panelid::Vec;

/// Naive triple product A*B*C by explicit index loops, independent of the
/// library's linear algebra path.
inline Mat naive_triple_product(const Mat& a, const Mat& b, const Mat& c) {
  const auto n = a.rows();
  Mat ab = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) ab(i, j) += a(i, k) * b(k, j);
  Mat abc = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) abc(i, j) += ab(i, k) * c(k, j);
  return abc;
}

/// Dense numeric determinant of the (rows, cols) submatrix of
/// Q(alpha, x) Omega Q(alpha, x)' with Q = I + (alpha - x) L. This is the
/// master cross-check for the recursive minor polynomials: for exclusion
/// minors the same submatrix of O is unaffected by the subtracted error
/// covariance.
inline double dense_minor_det_oracle(const Theta& th, double x,
                                     const std::vector<int>& rows,
                                     const std::vector<int>& cols) {
  const Mat omega = panelid::build_omega(th);
  const Mat l = panelid::build_l(th.alpha, th.big_t);
  const Mat q = Mat::Identity(th.big_t, th.big_t) + (th.alpha - x) * l;
  const Mat p = q * omega * q.transpose();
  const int k = static_cast<int>(rows.size());
  Eigen::MatrixXd sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      sub(i, j) = p(rows[static_cast<std::size_t>(i)] - 1,
                    cols[static_cast<std::size_t>(j)] - 1);
  return sub.determinant();
}

/// Sign-change bisection on [lo, hi]; a slow but independent root oracle.
inline std::vector<double> bisection_roots(const panelid::AlphaPoly& p,
                                           double lo, double hi,
                                           int grid = 200000) {
  std::vector<double> out;
  double prev_x = lo, prev_f = p.eval(lo);
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * i / grid;
    const double f = p.eval(x);
    if (prev_f == 0.0) out.push_back(prev_x);
    else if (prev_f * f < 0.0) {
      double a = prev_x, b = x, fa = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = p.eval(m);
        if (fa * fm <= 0.0) b = m;
        else { a = m; fa = fm; }
      }
      out.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_f = f;
  }
  return out;
}

}  // namespace testutil
