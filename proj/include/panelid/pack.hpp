#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "panelid/theta.hpp"

namespace panelid {

namespace detail {

/// Free factor entries per variant (row, col pairs, 0-based), in packing order.
inline std::vector<std::pair<int, int>> free_factor_entries(const Theta& tmpl) {
  std::vector<std::pair<int, int>> out;
  switch (tmpl.variant) {
    case Variant::Baseline:
    case Variant::Differenced:
      for (int t = tmpl.r_bar; t < tmpl.big_t; ++t)
        for (int j = 0; j < tmpl.r_bar; ++j) out.emplace_back(t, j);
      break;
    case Variant::FixedEffectsLevels:
      out.emplace_back(0, 0);  // f_gamma
      for (int t = 0; t < tmpl.big_t - 2; ++t) out.emplace_back(t, 1);
      break;
    case Variant::ArPanel:
      out.emplace_back(0, 0);  // f_gamma
      break;
  }
  return out;
}

}  // namespace detail

inline int packed_size(const Theta& tmpl) {
  const int n_f = static_cast<int>(detail::free_factor_entries(tmpl).size());
  const int n_psi = tmpl.r_bar * (tmpl.r_bar + 1) / 2;
  const int n_d = tmpl.variant == Variant::Differenced ? 3 : tmpl.big_t;
  return 1 + n_f + n_psi + n_d;
}

/// Bijection between valid parameter points (with the variant's normalized
/// factor entries fixed) and unconstrained vectors: alpha raw, free factor
/// entries raw, psi by log-Cholesky (log diagonal, raw subdiagonal, row by
/// row), variances by log; the differenced cross term sigma_c stays raw.
inline Vec pack(const Theta& th) {
  th.require_valid(false);
  Vec v(packed_size(th));
  int idx = 0;
  v[idx++] = th.alpha;
  for (auto [t, j] : detail::free_factor_entries(th)) v[idx++] = th.factors(t, j);
  Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(th.psi)};
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("pack: psi is not positive definite");
  Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < th.r_bar; ++i)
    for (int j = 0; j <= i; ++j)
      v[idx++] = i == j ? std::log(l(i, i)) : l(i, j);
  if (th.variant == Variant::Differenced) {
    v[idx++] = std::log(th.d_extra->sigma2);
    v[idx++] = std::log(th.d_extra->sigma1_sq);
    v[idx++] = th.d_extra->sigma_c;
  } else {
    for (int t = 0; t < th.big_t; ++t) v[idx++] = std::log(th.d_diag[t]);
  }
  return v;
}

inline Theta unpack(const Vec& v, const Theta& tmpl) {
  if (v.size() != packed_size(tmpl))
    throw std::invalid_argument("unpack: vector length " +
                                std::to_string(v.size()) + " does not match " +
                                std::to_string(packed_size(tmpl)));
  // exp clamped away from an exact zero so extreme optimizer excursions hit
  // the likelihood barrier instead of a validation error
  auto pexp = [](double x) {
    const double e = std::exp(x);
    return e > 0.0 ? e : std::numeric_limits<double>::min();
  };
  Theta th = tmpl;
  int idx = 0;
  th.alpha = v[idx++];
  for (auto [t, j] : detail::free_factor_entries(tmpl))
    th.factors(t, j) = v[idx++];
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(tmpl.r_bar, tmpl.r_bar);
  for (int i = 0; i < tmpl.r_bar; ++i)
    for (int j = 0; j <= i; ++j)
      l(i, j) = i == j ? pexp(v[idx++]) : v[idx++];
  th.psi = l * l.transpose();
  th.psi = 0.5 * (th.psi + th.psi.transpose().eval());
  if (tmpl.variant == Variant::Differenced) {
    DExtra e;
    e.sigma2 = pexp(v[idx++]);
    e.sigma1_sq = pexp(v[idx++]);
    e.sigma_c = v[idx++];
    th.d_extra = e;
  } else {
    th.d_diag = Vec(tmpl.big_t);
    for (int t = 0; t < tmpl.big_t; ++t) th.d_diag[t] = pexp(v[idx++]);
  }
  return th;
}

/// Human-readable names for the packed coordinates, for diagnostics output.
inline std::vector<std::string> packed_names(const Theta& tmpl) {
  std::vector<std::string> names;
  names.push_back("alpha");
  for (auto [t, j] : detail::free_factor_entries(tmpl))
    names.push_back("F[" + std::to_string(t + 1) + "," + std::to_string(j + 1) + "]");
  for (int i = 0; i < tmpl.r_bar; ++i)
    for (int j = 0; j <= i; ++j)
      names.push_back((i == j ? "log_cholPsi[" : "cholPsi[") +
                      std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
  if (tmpl.variant == Variant::Differenced) {
    names.push_back("log_sigma2");
    names.push_back("log_sigma1_sq");
    names.push_back("sigma_c");
  } else {
    for (int t = 0; t < tmpl.big_t; ++t)
      names.push_back("log_d[" + std::to_string(t + 1) + "]");
  }
  return names;
}

}  // namespace panelid
