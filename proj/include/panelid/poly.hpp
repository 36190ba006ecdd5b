#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace panelid {

/// Dense univariate polynomial with real coefficients, used for expressions
/// in the probe autoregressive parameter. Coefficient i multiplies x^i.
/// The zero polynomial has an empty coefficient vector; its degree is the
/// sentinel kZeroPolyDegree.
class AlphaPoly {
 public:
  static constexpr int kZeroPolyDegree = std::numeric_limits<int>::min();
  static constexpr double kTrimTol = 1e-11;

  AlphaPoly() = default;
  explicit AlphaPoly(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    trim();
  }

  static AlphaPoly constant(double v) { return AlphaPoly({v}); }
  /// The linear polynomial a + b*x.
  static AlphaPoly linear(double a, double b) { return AlphaPoly({a, b}); }

  bool is_zero() const { return coeffs_.empty(); }

  int degree() const {
    return coeffs_.empty() ? kZeroPolyDegree
                           : static_cast<int>(coeffs_.size()) - 1;
  }

  double coeff(int i) const {
    return (i >= 0 && i < static_cast<int>(coeffs_.size()))
               ? coeffs_[static_cast<std::size_t>(i)]
               : 0.0;
  }

  const std::vector<double>& coeffs() const { return coeffs_; }

  double eval(double x) const {
    double acc = 0.0;
    for (std::size_t i = coeffs_.size(); i-- > 0;) acc = acc * x + coeffs_[i];
    return acc;
  }

  /// Natural magnitude of the polynomial at x, sum_i |c_i| |x|^i. Used as
  /// the scale for residual tolerances.
  double eval_scale(double x) const {
    double acc = 0.0;
    const double ax = std::abs(x);
    for (std::size_t i = coeffs_.size(); i-- > 0;)
      acc = acc * ax + std::abs(coeffs_[i]);
    return acc;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  AlphaPoly derivative() const {
    if (coeffs_.size() <= 1) return AlphaPoly();
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t i = 1; i < coeffs_.size(); ++i)
      d[i - 1] = static_cast<double>(i) * coeffs_[i];
    return AlphaPoly(std::move(d));
  }

  friend AlphaPoly operator+(const AlphaPoly& p, const AlphaPoly& q) {
    std::vector<double> c(std::max(p.coeffs_.size(), q.coeffs_.size()), 0.0);
    for (std::size_t i = 0; i < p.coeffs_.size(); ++i) c[i] += p.coeffs_[i];
    for (std::size_t i = 0; i < q.coeffs_.size(); ++i) c[i] += q.coeffs_[i];
    return AlphaPoly(std::move(c));
  }

  friend AlphaPoly operator-(const AlphaPoly& p, const AlphaPoly& q) {
    std::vector<double> c(std::max(p.coeffs_.size(), q.coeffs_.size()), 0.0);
    for (std::size_t i = 0; i < p.coeffs_.size(); ++i) c[i] += p.coeffs_[i];
    for (std::size_t i = 0; i < q.coeffs_.size(); ++i) c[i] -= q.coeffs_[i];
    return AlphaPoly(std::move(c));
  }

  friend AlphaPoly operator*(const AlphaPoly& p, const AlphaPoly& q) {
    if (p.is_zero() || q.is_zero()) return AlphaPoly();
    std::vector<double> c(p.coeffs_.size() + q.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < q.coeffs_.size(); ++j)
        c[i + j] += p.coeffs_[i] * q.coeffs_[j];
    return AlphaPoly(std::move(c));
  }

  friend AlphaPoly operator*(double s, const AlphaPoly& p) {
    std::vector<double> c(p.coeffs_);
    for (double& v : c) v *= s;
    return AlphaPoly(std::move(c));
  }

  AlphaPoly& operator+=(const AlphaPoly& q) { return *this = *this + q; }

 private:
  // Trailing coefficients below kTrimTol * (1 + max |coeff|) do not count
  // toward the degree and are dropped.
  void trim() {
    double m = max_abs_coeff();
    const double tol = kTrimTol * (1.0 + m);
    while (!coeffs_.empty() && std::abs(coeffs_.back()) <= tol)
      coeffs_.pop_back();
  }

  std::vector<double> coeffs_;
};

inline double poly_eval(const AlphaPoly& p, double x) { return p.eval(x); }
inline int poly_degree(const AlphaPoly& p) { return p.degree(); }
inline AlphaPoly poly_add(const AlphaPoly& p, const AlphaPoly& q) {
  return p + q;
}
inline AlphaPoly poly_mul(const AlphaPoly& p, const AlphaPoly& q) {
  return p * q;
}

}  // namespace panelid
