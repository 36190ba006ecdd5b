#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "panelid/jtilde.hpp"
#include "panelid/roots.hpp"

namespace panelid {

struct PerMinorResult {
  ExclusionMinor minor;
  int jtilde_degree = AlphaPoly::kZeroPolyDegree;
  std::vector<double> roots;  // real roots of (alpha - x) * jtilde
  bool zero_poly = false;
};

/// Outcome of an identification check: the verdict, the root evidence per
/// minor, and a log of the degenerate/candidate cases examined.
struct IdentReport {
  bool identified = false;
  double alpha_true = 0.0;
  std::vector<double> common_roots;
  std::vector<ExclusionMinor> minors_used;
  std::vector<PerMinorResult> per_minor;
  std::vector<std::string> case_log;
};

inline void to_json(nlohmann::json& j, const PerMinorResult& pm) {
  j = nlohmann::json{{"minor", pm.minor},
                     {"degree", pm.zero_poly ? nlohmann::json(nullptr)
                                             : nlohmann::json(pm.jtilde_degree)},
                     {"roots", pm.roots},
                     {"zero_poly", pm.zero_poly}};
}

inline void to_json(nlohmann::json& j, const IdentReport& r) {
  j = nlohmann::json{{"identified", r.identified},
                     {"alpha_true", r.alpha_true},
                     {"common_roots", r.common_roots},
                     {"minors", r.minors_used},
                     {"per_minor", r.per_minor},
                     {"case_log", r.case_log}};
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline double psi_min_eigenvalue(const Theta& th) {
  if (th.r_bar == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(th.psi);
  return es.eigenvalues().minCoeff();
}

inline bool psi_near_singular(const Theta& th) {
  const double scale = th.psi.trace() / std::max(1, th.r_bar);
  return psi_min_eigenvalue(th) <= 1e-9 * (1.0 + std::abs(scale));
}

/// Checker-level validation: structural consistency plus the variant's
/// normalization. Positive definiteness of psi is deliberately not
/// enforced -- degenerate loading covariances must flow into the report
/// (zero-polynomial cases) instead of failing.
inline void require_checkable(const Theta& th) {
  auto v = th.structural_violations();
  auto norm = validate_normalization(th);
  v.insert(v.end(), norm.begin(), norm.end());
  if (!v.empty()) {
    std::string msg = "theta not checkable:";
    for (const auto& s : v) msg += " [" + s + "]";
    throw std::invalid_argument(msg);
  }
}

/// Explains a zero minor polynomial by inspecting the known degenerate
/// configurations of the variant.
inline void label_zero_poly(const Theta& th, const ExclusionMinor& m,
                            std::vector<std::string>& log) {
  if (psi_near_singular(th)) {
    if (th.variant == Variant::FixedEffectsLevels)
      log.push_back("Case 1': Psi singular (Psi12^2 = Psi11*Psi22), zero polynomial for minor " +
                    m.label());
    else if (th.variant == Variant::ArPanel)
      log.push_back("Case 1'': Psi = 0, zero polynomial for minor " + m.label());
    else
      log.push_back("Case 1: Psi=0 (smallest eigenvalue " +
                    fmt(psi_min_eigenvalue(th)) + "), zero polynomial for minor " +
                    m.label());
    return;
  }
  if (th.variant == Variant::Baseline && th.r_bar == 1 && th.big_t >= 4) {
    const double v = th.d_diag[1] - th.alpha * th.d_diag[0] * th.factors(1, 0);
    if (std::abs(v) <= 1e-9 * (std::abs(th.d_diag[1]) +
                               std::abs(th.alpha * th.d_diag[0] * th.factors(1, 0)) + 1e-300)) {
      log.push_back("Case 2: f2 = d2/(alpha*d1), zero polynomial for minor " +
                    m.label());
      return;
    }
  }
  if (th.variant == Variant::FixedEffectsLevels && th.big_t >= 6) {
    const double a = th.alpha;
    const double d1 = th.d_diag[0], d2 = th.d_diag[1], d3 = th.d_diag[2];
    const double fg = th.factors(0, 0);
    const double f1 = th.factors(0, 1), f2 = th.factors(1, 1), f3 = th.factors(2, 1);
    const double v = d3 * f1 - a * d2 * f1 - d3 * f2 * fg + a * a * d1 * f2 -
                     a * a * d1 * f3 + a * d2 * f3 * fg;
    if (std::abs(v) <= 1e-9) {
      log.push_back("Case 2': factor configuration zeroes the minor polynomial for " +
                    m.label());
      return;
    }
  }
  log.push_back("zero polynomial for minor " + m.label() +
                " (degenerate configuration)");
}

inline bool set_contains_root(const std::vector<double>& roots, double x) {
  for (double r : roots)
    if (roots_match(x, r)) return true;
  return false;
}

/// Real roots of (alpha - x) * jtilde for one minor; alpha enters exactly,
/// then clusters are collapsed. The roots of jtilde alone (the candidate
/// alternatives) are reported separately for the case log.
inline PerMinorResult compute_per_minor(const MinorCalculus& calc,
                                        const ExclusionMinor& m, double alpha,
                                        AlphaPoly* jt_out = nullptr,
                                        std::vector<double>* jt_roots_out = nullptr) {
  AlphaPoly jt = calc.jtilde(m);
  PerMinorResult pm;
  pm.minor = m;
  pm.jtilde_degree = jt.degree();
  pm.zero_poly = jt.is_zero();
  if (!pm.zero_poly) {
    std::vector<double> jt_roots = real_roots(jt);
    if (jt_roots_out) *jt_roots_out = jt_roots;
    pm.roots = std::move(jt_roots);
    pm.roots.push_back(alpha);
    std::sort(pm.roots.begin(), pm.roots.end());
    std::vector<double> uniq;
    for (double x : pm.roots)
      if (uniq.empty() || !roots_match(x, uniq.back())) uniq.push_back(x);
    pm.roots = std::move(uniq);
  }
  if (jt_out) *jt_out = std::move(jt);
  return pm;
}

/// Shared intersection machinery: compute the minor polynomials, take real
/// roots of (alpha - x) * jtilde per minor, intersect across minors, and log
/// each candidate root's fate.
inline IdentReport intersect_minor_roots(const Theta& th,
                                         const std::vector<ExclusionMinor>& minors,
                                         std::vector<std::string> pre_log = {}) {
  MinorCalculus calc(th);
  IdentReport rep;
  rep.alpha_true = th.alpha;
  rep.minors_used = minors;
  rep.case_log = std::move(pre_log);

  bool any_zero = false;
  std::vector<AlphaPoly> polys;
  std::vector<std::vector<double>> candidate_roots;  // roots of jtilde alone
  for (const auto& m : minors) {
    AlphaPoly jt;
    std::vector<double> jt_roots;
    PerMinorResult pm = compute_per_minor(calc, m, th.alpha, &jt, &jt_roots);
    if (pm.zero_poly) {
      any_zero = true;
      label_zero_poly(th, m, rep.case_log);
    }
    polys.push_back(std::move(jt));
    candidate_roots.push_back(std::move(jt_roots));
    rep.per_minor.push_back(std::move(pm));
  }

  if (any_zero) {
    rep.identified = false;
    return rep;
  }

  for (double x : rep.per_minor.front().roots) {
    bool in_all = true;
    for (std::size_t i = 1; i < rep.per_minor.size(); ++i)
      if (!set_contains_root(rep.per_minor[i].roots, x)) { in_all = false; break; }
    if (in_all) rep.common_roots.push_back(x);
  }

  // candidate-root log: where each root of the minor polynomial came from
  // and what eliminated it (or failed to)
  for (std::size_t i = 0; i < candidate_roots.size(); ++i) {
    for (double x : candidate_roots[i]) {
      std::string name = "candidate root " + fmt(x);
      if (th.variant == Variant::Baseline && th.r_bar == 1 && i == 0 &&
          th.big_t >= 4) {
        const double f3 = th.factors(2, 0), f4 = th.factors(3, 0);
        if (f3 != 0.0 && roots_match(x, f4 / f3))
          name = "Case 3 candidate root f4/f3 = " + fmt(x);
      }
      if (roots_match(x, th.alpha)) {
        rep.case_log.push_back(name + " from minor " +
                               rep.per_minor[i].minor.label() +
                               " coincides with alpha; identification preserved");
        continue;
      }
      bool eliminated = false;
      for (std::size_t j = 0; j < rep.per_minor.size() && !eliminated; ++j) {
        if (j == i) continue;
        if (!set_contains_root(rep.per_minor[j].roots, x)) {
          rep.case_log.push_back(
              name + " from minor " + rep.per_minor[i].minor.label() +
              ": eliminated by minor " + rep.per_minor[j].minor.label() +
              " (|poly(" + fmt(x) + ")| = " + fmt(std::abs(polys[j].eval(x))) + ")");
          eliminated = true;
        }
      }
      if (!eliminated)
        rep.case_log.push_back(name + " from minor " +
                               rep.per_minor[i].minor.label() +
                               ": shared by all minors, identification fails");
    }
  }

  bool only_alpha = !rep.common_roots.empty();
  for (double x : rep.common_roots)
    if (!roots_match(x, th.alpha)) only_alpha = false;
  rep.identified = only_alpha;
  if (rep.identified)
    rep.case_log.push_back("Case 4: common root equals alpha = " +
                           fmt(th.alpha) + ", globally identified");
  return rep;
}

}  // namespace detail

/// Root-intersection identification check over the first n_minors
/// enumeration-order exclusion minors of dimension r_bar + 1
/// (the two-minor argument, generalized).
inline IdentReport check_alpha_identification(const Theta& th, int n_minors = 2) {
  if (th.variant != Variant::Baseline &&
      th.variant != Variant::FixedEffectsLevels)
    throw std::invalid_argument(
        "check_alpha_identification expects Baseline or FixedEffectsLevels");
  if (n_minors < 2)
    throw std::invalid_argument("at least two exclusion minors are required");
  detail::require_checkable(th);
  std::vector<std::string> pre_log;
  if (th.big_t < min_time_periods(th.variant, th.r_bar))
    pre_log.push_back("below-assumption regime: T = " + std::to_string(th.big_t));
  const int k = th.r_bar + 1;
  auto all = enumerate_minors(th.big_t, k, 0);
  if (static_cast<int>(all.size()) < n_minors)
    throw std::invalid_argument(
        "only " + std::to_string(all.size()) + " exclusion minors of dimension " +
        std::to_string(k) + " exist for T = " + std::to_string(th.big_t));
  all.resize(static_cast<std::size_t>(n_minors));
  return detail::intersect_minor_roots(th, all, std::move(pre_log));
}

/// Fixed-effects-in-levels check: the minor pair (1,2,3),(4,5,6) and
/// (1,5,6),(2,3,4), candidate roots 1 and -1/f4 tested against the second
/// minor, with the two displayed elimination factors evaluated as evidence.
inline IdentReport check_fixed_effects_levels(const Theta& th) {
  if (th.variant != Variant::FixedEffectsLevels)
    throw std::invalid_argument("check_fixed_effects_levels expects FixedEffectsLevels");
  detail::require_checkable(th);
  if (th.big_t < 6)
    throw std::invalid_argument("check_fixed_effects_levels requires T >= 6");

  std::vector<std::string> pre_log;
  const double a = th.alpha;
  if (std::abs(a - 1.0) > 1e-12) {
    bool geometric = true;
    for (int t = 1; t < th.big_t; ++t) {
      const double lhs = th.d_diag[t], rhs = a * th.d_diag[t - 1];
      if (std::abs(lhs - rhs) > 1e-9 * (std::abs(lhs) + std::abs(rhs) + 1e-300)) {
        geometric = false;
        break;
      }
    }
    if (geometric)
      pre_log.push_back(
          "assumption screening failed: d_t = alpha*d_{t-1} for every t with "
          "alpha != 1; the elimination argument is inapplicable");
  }

  ExclusionMinor m1{{1, 2, 3}, {4, 5, 6}, 0};
  ExclusionMinor m2{{1, 5, 6}, {2, 3, 4}, 0};
  IdentReport rep = detail::intersect_minor_roots(th, {m1, m2}, std::move(pre_log));

  // candidate-specific evidence for the alphat = 1 and alphat = -1/f4 roots
  const double fg = th.factors(0, 0);
  const double f4 = th.factors(3, 1);
  const double d1 = th.d_diag[0], d2 = th.d_diag[1], d3 = th.d_diag[2],
               d4 = th.d_diag[3];
  const double p11 = th.psi(0, 0), p12 = th.psi(0, 1), p22 = th.psi(1, 1);
  if (!rep.per_minor.empty() && !rep.per_minor.front().zero_poly) {
    for (double x : rep.per_minor.front().roots) {
      if (roots_match(x, th.alpha)) continue;
      if (roots_match(x, 1.0)) {
        const double plane = (d4 - a * d3) * th.factors(1, 1) -
                             (d4 - a * a * d2) * th.factors(2, 1) -
                             (a * a * d2 - a * d3) * f4;
        const double det_psi = p11 * p22 - p12 * p12;
        const double pa = (a - 1.0) * det_psi;
        const double pb = det_psi;
        const double pc = (a - 1.0) * d1 * p22;
        const double p_fg = pa * fg * fg + pb * fg + pc;
        rep.case_log.push_back(
            "Case 4' candidate alphat=1: elimination factors plane = " +
            detail::fmt(plane) + ", P(f_gamma) = " + detail::fmt(p_fg) +
            " (a = " + detail::fmt(pa) + ", b = " + detail::fmt(pb) +
            ", c = " + detail::fmt(pc) + ")");
      } else if (f4 != 0.0 && roots_match(x, -1.0 / f4)) {
        rep.case_log.push_back("Case 3' candidate alphat=-1/f4 = " +
                               detail::fmt(x));
      }
    }
  }
  return rep;
}

/// Differenced-data check: same intersection logic with tridiagonal
/// exclusion minors and the tridiagonal error covariance inside Omega.
inline IdentReport check_differenced(const Theta& th) {
  if (th.variant != Variant::Differenced)
    throw std::invalid_argument("check_differenced expects Differenced");
  detail::require_checkable(th);
  const int k = th.r_bar + 1;
  auto all = enumerate_minors(th.big_t, k, 1);
  if (all.size() < 2)
    throw std::invalid_argument(
        "only " + std::to_string(all.size()) +
        " tridiagonal exclusion minor(s) exist for differenced T = " +
        std::to_string(th.big_t) + "; at least two are required");
  all.resize(2);
  return detail::intersect_minor_roots(th, all);
}

/// AR panel with individual effects: the minor (1,2),(3,4) pins the
/// candidate set to {alpha, 1}; the unit-root alternative is eliminated by
/// the three-equation moment system, whose residual is the manifold
/// (alpha-1)*((alpha-1)*(d1+psi*f_gamma^2)+psi*f_gamma).
inline IdentReport check_ar_panel(const Theta& th) {
  if (th.variant != Variant::ArPanel)
    throw std::invalid_argument("check_ar_panel expects ArPanel");
  detail::require_checkable(th);
  if (th.big_t < 4)
    throw std::invalid_argument("check_ar_panel requires T >= 4");
  if (th.psi(0, 0) <= 0.0)
    throw std::invalid_argument("check_ar_panel requires psi > 0");

  const double a = th.alpha;
  const double psi = th.psi(0, 0);
  const double fg = th.factors(0, 0);
  const double d1 = th.d_diag[0], d2 = th.d_diag[1];
  const bool unit_root = std::abs(a - 1.0) <= 1e-12;

  ExclusionMinor m{{1, 2}, {3, 4}, 0};
  MinorCalculus calc(th);
  IdentReport rep;
  rep.alpha_true = a;
  rep.minors_used = {m};
  rep.per_minor.push_back(detail::compute_per_minor(calc, m, a));
  rep.common_roots = rep.per_minor.front().roots;

  const double mid = unit_root ? d1 - d2 * fg : a * d1 - d2 * fg;
  const double mid_scale =
      std::abs(d1) * std::max(1.0, std::abs(a)) + std::abs(d2 * fg) + 1e-300;

  if (rep.per_minor.front().zero_poly) {
    rep.identified = false;
    rep.common_roots.clear();
    if (psi <= 1e-9 * (std::abs(psi) + 1.0)) {
      rep.case_log.push_back("Case 1'': Psi = 0");
    } else if (std::abs(mid) <= 1e-9 * mid_scale) {
      rep.case_log.push_back(
          unit_root
              ? "Case 2'': f_gamma = d1/d2 (middle factor = " + detail::fmt(mid) + ")"
              : "Case 2'': f_gamma = alpha*d1/d2 (middle factor = " +
                    detail::fmt(mid) + ")");
    } else {
      rep.case_log.push_back("zero polynomial for minor " + m.label());
    }
    return rep;
  }

  if (std::abs(mid) <= 1e-9 * mid_scale)
    rep.case_log.push_back(
        (unit_root ? std::string("Case 2'': f_gamma = d1/d2 near-degenerate")
                   : std::string("Case 2'': f_gamma = alpha*d1/d2 near-degenerate")) +
        " (middle factor = " + detail::fmt(mid) + ")");

  if (unit_root) {
    // the only root of the minor polynomial must be 1 itself
    bool only_one = true;
    for (double x : rep.per_minor.front().roots)
      if (!roots_match(x, 1.0)) only_one = false;
    rep.identified = only_one && !rep.per_minor.front().roots.empty();
    rep.case_log.push_back(
        "Case 3'': alpha = 1 and the minor polynomial has the sole root "
        "alphat = 1; identified at the unit root");
    rep.common_roots = {1.0};
    return rep;
  }

  // alpha != 1: eliminate the alphat = 1 candidate through the moment system
  // on entries (1,1), (2,1), (3,1): solve for the alternative d1, then the
  // alternative psi*f_gamma, and substitute into the third equation.
  const double base = d1 + psi * fg * fg;
  const double alt_psi_fg = psi * fg - (1.0 - a) * base;
  const double manifold = (a - 1.0) * ((a - 1.0) * base + psi * fg);
  const double manifold_scale =
      std::abs(a - 1.0) * ((1.0 + std::abs(a - 1.0)) * std::abs(base) +
                           std::abs(psi * fg)) + 1e-300;
  const bool on_manifold = std::abs(manifold) <= 1e-9 * manifold_scale;

  std::vector<double> final_roots;
  for (double x : rep.per_minor.front().roots) {
    if (roots_match(x, th.alpha)) { final_roots.push_back(x); continue; }
    if (roots_match(x, 1.0)) {
      if (on_manifold) {
        rep.case_log.push_back(
            "candidate alphat=1 admits an alternative representation: "
            "parameters lie on the manifold "
            "(alpha-1)*((alpha-1)*(d1+psi*f_gamma^2)+psi*f_gamma) = 0 "
            "(value = " + detail::fmt(manifold) + ")");
        final_roots.push_back(x);
      } else {
        rep.case_log.push_back(
            "candidate alphat=1 eliminated by the three-equation moment "
            "system: alternative psi*f_gamma = " + detail::fmt(alt_psi_fg) +
            ", third-equation residual (manifold value) = " +
            detail::fmt(manifold));
      }
    } else {
      final_roots.push_back(x);  // unexpected extra root, keep and fail below
      rep.case_log.push_back("unexpected candidate root " + detail::fmt(x) +
                             " of minor " + m.label());
    }
  }
  rep.common_roots = final_roots;
  bool only_alpha = !final_roots.empty();
  for (double x : final_roots)
    if (!roots_match(x, th.alpha)) only_alpha = false;
  rep.identified = only_alpha;
  return rep;
}

/// Maximum absolute entrywise gap of Sigma(theta_a) - Sigma(theta_b):
/// the observational-equivalence test.
inline double verify_sigma_equality(const Theta& a, const Theta& b) {
  if (a.big_t != b.big_t)
    throw std::invalid_argument("verify_sigma_equality: dimension mismatch");
  return (build_sigma(a) - build_sigma(b)).cwiseAbs().maxCoeff();
}

}  // namespace panelid
