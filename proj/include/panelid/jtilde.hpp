#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "panelid/matrices.hpp"
#include "panelid/minors.hpp"
#include "panelid/poly.hpp"

namespace panelid {

/// Per-theta workspace for the exclusion-minor determinant calculus. Builds
/// Omega, L and the three constituent products of J once, then evaluates
/// entry polynomials, the recursive minor polynomial and full minor
/// determinants. Pure after construction; one instance per theta.
class MinorCalculus {
 public:
  explicit MinorCalculus(const Theta& th)
      : alpha_(th.alpha),
        r_bar_(th.r_bar),
        band_(th.variant == Variant::Differenced ? 1 : 0),
        omega_(build_omega(th)) {
    Mat l = build_l(th.alpha, th.big_t);
    lo_ = l * omega_;
    ol_ = omega_ * l.transpose();
    lol_ = lo_ * l.transpose();
  }

  const Mat& omega() const { return omega_; }
  double alpha() const { return alpha_; }
  int band() const { return band_; }

  /// Entry of J = L Omega + Omega L' + (alpha - x) L Omega L' as a
  /// polynomial of degree <= 1 in the probe parameter x. 1-based indices.
  AlphaPoly j_entry(int r, int c) const {
    const double lol = lol_(r - 1, c - 1);
    return AlphaPoly({lo_(r - 1, c - 1) + ol_(r - 1, c - 1) + alpha_ * lol,
                      -lol});
  }

  /// Off-band entry of O = Q Omega Q' - D~ as a polynomial of degree <= 2:
  /// Omega(r,c) + (alpha - x) J(r,c). In-band entries depend on the unknown
  /// alternative error covariance and are rejected.
  AlphaPoly o_entry(int r, int c) const {
    if (std::abs(r - c) < band_ + 1)
      throw std::invalid_argument("entry (" + std::to_string(r) + "," +
                                  std::to_string(c) +
                                  ") lies inside the excluded band");
    return AlphaPoly::constant(omega_(r - 1, c - 1)) +
           alpha_minus_x() * j_entry(r, c);
  }

  /// Numeric determinant of the Omega submatrix with rows R and cols C.
  double omega_minor_det(const std::vector<int>& rows,
                         const std::vector<int>& cols) const {
    const int k = static_cast<int>(rows.size());
    if (k == 0) return 1.0;
    Eigen::MatrixXd sub(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        sub(i, j) = omega_(rows[static_cast<std::size_t>(i)] - 1,
                           cols[static_cast<std::size_t>(j)] - 1);
    return Eigen::PartialPivLU<Eigen::MatrixXd>(sub).determinant();
  }

  /// Hadamard-type magnitude bound for the same submatrix, used to scale
  /// near-zero determinant checks.
  double omega_minor_scale(const std::vector<int>& rows,
                           const std::vector<int>& cols) const {
    double scale = 1.0;
    for (int r : rows) {
      double row_norm = 0.0;
      for (int c : cols) {
        double v = omega_(r - 1, c - 1);
        row_norm += v * v;
      }
      scale *= std::sqrt(row_norm);
    }
    return scale;
  }

  /// The recursive minor polynomial: expansion along the last row of R,
  /// with the dimension-(k-1) Omega determinants computed densely and the
  /// lower-dimensional polynomials memoized per call.
  AlphaPoly jtilde(const ExclusionMinor& m) const {
    m.require_valid(static_cast<int>(omega_.rows()));
    if (m.band != band_)
      throw std::invalid_argument("minor band does not match the variant");
    std::map<std::uint64_t, AlphaPoly> memo;
    return jtilde_rec(m.rows, m.cols, memo);
  }

  /// det of the requested exclusion minor of O as a polynomial in x:
  /// det(M^Omega) + (alpha - x) * jtilde. For k > r_bar the constant
  /// det(M^Omega) must vanish (rank of F Psi F'); a violation indicates a
  /// degenerate theta or a bug and is signaled rather than absorbed.
  AlphaPoly det_minor(const ExclusionMinor& m) const {
    AlphaPoly jt = jtilde(m);
    const double det_omega = omega_minor_det(m.rows, m.cols);
    if (m.dim() > r_bar_) {
      const double scale = omega_minor_scale(m.rows, m.cols);
      if (std::abs(det_omega) > 1e-9 * (scale + 1e-300))
        throw std::runtime_error(
            "exclusion minor " + m.label() +
            " of Omega has nonzero determinant " + std::to_string(det_omega) +
            " despite dimension k > r_bar");
    }
    return AlphaPoly::constant(det_omega) + alpha_minus_x() * jt;
  }

 private:
  AlphaPoly alpha_minus_x() const { return AlphaPoly::linear(alpha_, -1.0); }

  static std::uint64_t col_key(const std::vector<int>& cols) {
    std::uint64_t key = 0;
    for (int c : cols) key |= (std::uint64_t{1} << (c - 1));
    return key;
  }

  AlphaPoly jtilde_rec(const std::vector<int>& rows,
                       const std::vector<int>& cols,
                       std::map<std::uint64_t, AlphaPoly>& memo) const {
    const int k = static_cast<int>(rows.size());
    if (k == 1) return j_entry(rows[0], cols[0]);
    const auto it = memo.find(col_key(cols));
    if (it != memo.end()) return it->second;

    const int r_last = rows.back();
    std::vector<int> sub_rows(rows.begin(), rows.end() - 1);
    AlphaPoly acc;
    for (int j = 0; j < k; ++j) {
      std::vector<int> sub_cols;
      sub_cols.reserve(static_cast<std::size_t>(k) - 1);
      for (int i = 0; i < k; ++i)
        if (i != j) sub_cols.push_back(cols[static_cast<std::size_t>(i)]);
      const int c_j = cols[static_cast<std::size_t>(j)];
      const double sign = ((k + j + 1) % 2 == 0) ? 1.0 : -1.0;  // (-1)^{k+j}, j 1-based
      AlphaPoly jt_sub = jtilde_rec(sub_rows, sub_cols, memo);
      AlphaPoly j_rc = j_entry(r_last, c_j);
      AlphaPoly term = omega_minor_det(sub_rows, sub_cols) * j_rc +
                       omega_(r_last - 1, c_j - 1) * jt_sub +
                       alpha_minus_x() * (j_rc * jt_sub);
      acc += sign * term;
    }
    memo.emplace(col_key(cols), acc);
    return acc;
  }

  double alpha_;
  int r_bar_;
  int band_;
  Mat omega_;
  Mat lo_, ol_, lol_;  // L*Omega, Omega*L', L*Omega*L'
};

/// T x T matrix of the degree-<=1 entry polynomials of J.
inline std::vector<std::vector<AlphaPoly>> build_j_poly(const Theta& th) {
  MinorCalculus calc(th);
  std::vector<std::vector<AlphaPoly>> j(
      static_cast<std::size_t>(th.big_t),
      std::vector<AlphaPoly>(static_cast<std::size_t>(th.big_t)));
  for (int r = 1; r <= th.big_t; ++r)
    for (int c = 1; c <= th.big_t; ++c)
      j[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(c - 1)] =
          calc.j_entry(r, c);
  return j;
}

inline AlphaPoly off_diag_o_poly(const Theta& th, int r, int c) {
  return MinorCalculus(th).o_entry(r, c);
}

inline AlphaPoly jtilde_poly(const Theta& th, const ExclusionMinor& m) {
  return MinorCalculus(th).jtilde(m);
}

inline AlphaPoly det_minor_poly(const Theta& th, const ExclusionMinor& m) {
  return MinorCalculus(th).det_minor(m);
}

/// Degree bounds for the recursive minor polynomial on generic draws:
/// max{0, k - r_bar} <= degree <= 2k - 1. A zero polynomial fails.
inline bool check_degree_bounds(const Theta& th, const ExclusionMinor& m) {
  const int deg = jtilde_poly(th, m).degree();
  if (deg == AlphaPoly::kZeroPolyDegree) return false;
  const int k = m.dim();
  return deg >= std::max(0, k - th.r_bar) && deg <= 2 * k - 1;
}

}  // namespace panelid
