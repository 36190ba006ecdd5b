#pragma once

#include <algorithm>
#include <functional>
#include <limits>

#include <json.hpp>

#include "panelid/likelihood.hpp"
#include "panelid/pack.hpp"
#include "panelid/rng.hpp"
#include "panelid/simulate.hpp"

namespace panelid {

struct FitOptions {
  int n_starts = 8;
  int max_iterations = 2000;
  double grad_tol_rel = 1e-8;   // quasi-Newton stop on the gradient
  double step_tol = 1e-10;      // quasi-Newton stop on the step
  bool polish = true;           // derivative-free polish after the quasi-Newton run
  std::uint64_t seed = 12345;   // start-point jitter
};

struct FitResult {
  Theta theta_hat;
  double loglik = 0.0;  // per-unit concentrated quasi log-likelihood
  int n_iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  int start_points_tried = 0;
};

inline void to_json(nlohmann::json& j, const FitResult& r) {
  j = nlohmann::json{{"theta_hat", r.theta_hat},
                     {"loglik", r.loglik},
                     {"n_iterations", r.n_iterations},
                     {"converged", r.converged},
                     {"gradient_norm", r.gradient_norm},
                     {"start_points_tried", r.start_points_tried}};
}

namespace detail {

using Objective = std::function<double(const Vec&)>;

inline Vec numeric_gradient(const Objective& f, const Vec& x, double scale = 1e-6) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = scale * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    const double fp = f(xp);
    xp[j] = x[j] - h;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct MinimizeResult {
  Vec x;
  double f = 0.0;
  int iterations = 0;
};

/// BFGS on the inverse Hessian with a backtracking Armijo line search;
/// accepted steps never increase the objective.
inline MinimizeResult bfgs(const Objective& obj, Vec x, int max_iterations,
                           double grad_tol_rel, double step_tol) {
  const auto n = x.size();
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  double f = obj(x);
  Vec g = numeric_gradient(obj, x);
  MinimizeResult out;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    if (g.norm() <= grad_tol_rel * (1.0 + std::abs(f))) break;
    Vec p = -(h_inv * g);
    if (p.dot(g) >= 0.0) {  // not a descent direction: reset
      h_inv.setIdentity();
      p = -g;
    }
    double t = 1.0;
    const double slope = g.dot(p);
    double f_new = std::numeric_limits<double>::infinity();
    Vec x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + t * p;
      f_new = obj(x_new);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const Vec s = x_new - x;
    if (s.cwiseAbs().maxCoeff() <= step_tol * (1.0 + x.cwiseAbs().maxCoeff())) {
      x = x_new;
      f = f_new;
      break;
    }
    Vec g_new = numeric_gradient(obj, x_new);
    const Vec y = g_new - g;
    const double ys = y.dot(s);
    if (ys > 1e-12 * y.norm() * s.norm()) {
      const Vec hy = h_inv * y;
      const double shy = 1.0 + y.dot(hy) / ys;
      h_inv += (shy * (s * s.transpose()) - hy * s.transpose() -
                s * hy.transpose()) / ys;
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }
  out.x = x;
  out.f = f;
  out.iterations = iter;
  return out;
}

/// Nelder-Mead polish around a candidate optimum.
inline MinimizeResult nelder_mead(const Objective& obj, Vec start,
                                  int max_iterations, double simplex_scale = 1e-4) {
  const auto n = start.size();
  std::vector<Vec> pts;
  std::vector<double> vals;
  pts.push_back(start);
  vals.push_back(obj(start));
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec p = start;
    p[j] += simplex_scale * (1.0 + std::abs(start[j]));
    pts.push_back(p);
    vals.push_back(obj(p));
  }
  auto order = [&] {
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Vec> p2;
    std::vector<double> v2;
    for (auto i : idx) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };
  order();
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    if (std::abs(vals.back() - vals.front()) <=
        1e-12 * (1.0 + std::abs(vals.front())))
      break;
    Vec centroid = Vec::Zero(n);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
    centroid /= static_cast<double>(n);
    const Vec reflected = centroid + (centroid - pts.back());
    const double fr = obj(reflected);
    if (fr < vals.front()) {
      const Vec expanded = centroid + 2.0 * (centroid - pts.back());
      const double fe = obj(expanded);
      pts.back() = fe < fr ? expanded : reflected;
      vals.back() = std::min(fe, fr);
    } else if (fr < vals[vals.size() - 2]) {
      pts.back() = reflected;
      vals.back() = fr;
    } else {
      const Vec contracted = centroid + 0.5 * (pts.back() - centroid);
      const double fc = obj(contracted);
      if (fc < vals.back()) {
        pts.back() = contracted;
        vals.back() = fc;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts.front() + 0.5 * (pts[i] - pts.front());
          vals[i] = obj(pts[i]);
        }
      }
    }
    order();
  }
  return MinimizeResult{pts.front(), vals.front(), iter};
}

/// AR(1)-style moment estimate of alpha from a covariance matrix: ratio of
/// the first subdiagonal mass to the leading diagonal mass.
inline double alpha_ratio_estimate(const Mat& s) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 1; t < s.rows(); ++t) {
    num += s(t, t - 1);
    den += s(t - 1, t - 1);
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Principal-components start conditional on a candidate alpha: de-filter S,
/// split the top-r eigenspace into factors and loading covariance under the
/// variant's normalization, and assign the residual diagonal to the error
/// variances.
inline Theta spectral_init(const Mat& s, double alpha0, const Theta& tmpl) {
  Theta th = tmpl;
  th.alpha = alpha0;
  const int big_t = tmpl.big_t;
  const int r = tmpl.r_bar;
  Mat b = build_b(alpha0, big_t);
  Mat omega_hat = b * s * b.transpose();
  const double floor_scale = std::max(1e-12, omega_hat.trace() / big_t);

  Eigen::SelfAdjointEigenSolver<Mat> es(omega_hat);
  Mat g(big_t, r);
  for (int j = 0; j < r; ++j) {
    const Eigen::Index col = big_t - 1 - j;  // descending eigenvalues
    const double lam = std::max(es.eigenvalues()[col], 1e-6 * floor_scale);
    g.col(j) = es.eigenvectors().col(col) * std::sqrt(lam);
  }

  auto set_psi = [&](const Eigen::MatrixXd& value) {
    Mat psi = value;
    psi = 0.5 * (psi + psi.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Mat> ps(psi);
    const double lift = 1e-6 * floor_scale - std::min(0.0, ps.eigenvalues().minCoeff());
    th.psi = psi + lift * Mat::Identity(r, r);
  };

  switch (tmpl.variant) {
    case Variant::Baseline:
    case Variant::Differenced: {
      Eigen::MatrixXd top = g.topRows(r);
      if (std::abs(Eigen::MatrixXd(top).determinant()) < 1e-10 * floor_scale)
        top += 1e-4 * std::sqrt(floor_scale) * Eigen::MatrixXd::Identity(r, r);
      Eigen::MatrixXd top_inv = top.inverse();
      Mat f = g * top_inv;
      for (auto [t, j] : free_factor_entries(tmpl)) th.factors(t, j) = f(t, j);
      set_psi(top * top.transpose());
      break;
    }
    case Variant::ArPanel: {
      double tail = g.bottomRows(big_t - 1).col(0).mean();
      if (std::abs(tail) < 1e-8 * std::sqrt(floor_scale))
        tail = std::sqrt(floor_scale);
      th.factors(0, 0) = g(0, 0) / tail;
      set_psi(Eigen::MatrixXd::Constant(1, 1, tail * tail));
      break;
    }
    case Variant::FixedEffectsLevels: {
      // column 1: least squares for the ones pattern below the first row
      Eigen::MatrixXd lower = g.bottomRows(big_t - 1);
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(big_t - 1);
      Eigen::VectorXd a =
          lower.colPivHouseholderQr().solve(ones);
      // column 2: exact solve for the (0, 1) tail
      Eigen::MatrixXd tail2(2, 2);
      tail2.row(0) = g.row(big_t - 2);
      tail2.row(1) = g.row(big_t - 1);
      Eigen::VectorXd rhs(2);
      rhs << 0.0, 1.0;
      Eigen::VectorXd bb = tail2.colPivHouseholderQr().solve(rhs);
      Eigen::MatrixXd rot(2, 2);
      rot.col(0) = a;
      rot.col(1) = bb;
      if (std::abs(rot.determinant()) < 1e-12)
        rot += 1e-6 * Eigen::MatrixXd::Identity(2, 2);
      Mat f = g * rot;
      th.factors(0, 0) = f(0, 0);
      for (int t = 0; t < big_t - 2; ++t) th.factors(t, 1) = f(t, 1);
      Eigen::MatrixXd rot_inv = rot.inverse();
      set_psi(rot_inv * rot_inv.transpose());
      break;
    }
  }

  Mat resid = omega_hat - th.factors * th.psi * th.factors.transpose();
  const double floor = 1e-3 * floor_scale;
  if (tmpl.variant == Variant::Differenced) {
    double sum_diag = 0.0;
    for (int t = 1; t < big_t; ++t) sum_diag += resid(t, t);
    DExtra e;
    e.sigma2 = std::max(floor, 0.5 * sum_diag / (big_t - 1));
    e.sigma1_sq = std::max(floor, resid(0, 0));
    e.sigma_c = big_t > 1 ? resid(0, 1) : 0.0;
    th.d_extra = e;
  } else {
    th.d_diag = Vec(big_t);
    for (int t = 0; t < big_t; ++t) th.d_diag[t] = std::max(floor, resid(t, t));
  }
  return th;
}

}  // namespace detail

/// A structurally valid parameter point with the variant's normalized factor
/// entries set and neutral free values; used as the template for fitting.
inline Theta default_template(Variant variant, int big_t, int r_bar) {
  Theta th;
  th.variant = variant;
  th.big_t = big_t;
  switch (variant) {
    case Variant::Baseline:
    case Variant::Differenced: {
      th.r_bar = r_bar;
      th.normalization = Normalization::TopBlockIdentity;
      th.factors = Mat::Zero(big_t, r_bar);
      for (int i = 0; i < r_bar && i < big_t; ++i) th.factors(i, i) = 1.0;
      break;
    }
    case Variant::FixedEffectsLevels: {
      th.r_bar = 2;
      th.normalization = Normalization::Tail;
      th.factors = Mat::Ones(big_t, 2);
      th.factors(0, 0) = 0.5;
      th.factors.col(1).setZero();
      th.factors(big_t - 1, 1) = 1.0;
      break;
    }
    case Variant::ArPanel: {
      th.r_bar = 1;
      th.normalization = Normalization::None;
      th.factors = Mat::Ones(big_t, 1);
      break;
    }
  }
  th.psi = Mat::Identity(th.r_bar, th.r_bar);
  if (variant == Variant::Differenced) th.d_extra = DExtra{1.0, 1.0, 0.0};
  else th.d_diag = Vec::Ones(big_t);
  return th;
}

/// Concentrated Gaussian quasi-ML fit from a covariance matrix: multi-start
/// quasi-Newton over the packed parameters, starts ranked from spectral
/// initializations across an alpha grid, optional derivative-free polish.
inline FitResult fit(const Mat& s_n, const Theta& tmpl,
                     const FitOptions& options = {}) {
  if (s_n.rows() != tmpl.big_t || s_n.cols() != tmpl.big_t)
    throw std::invalid_argument("fit: S must be T x T");
  if (tmpl.big_t < min_time_periods(tmpl.variant, tmpl.r_bar))
    throw std::invalid_argument("fit: T below the variant's dimension bound");

  const detail::Objective obj = [&](const Vec& v) {
    return neg_quasi_loglik(unpack(v, tmpl), s_n);
  };

  // start candidates: spectral inits on an alpha grid plus the moment ratio
  std::vector<double> alpha_grid = {-1.2, -0.9, -0.6, -0.3, 0.0,
                                    0.3,  0.6,  0.9,  1.0,  1.2};
  alpha_grid.push_back(detail::alpha_ratio_estimate(s_n));
  std::vector<std::pair<double, Vec>> ranked;
  for (double a0 : alpha_grid) {
    Theta start = detail::spectral_init(s_n, a0, tmpl);
    Vec v = pack(start);
    ranked.emplace_back(obj(v), v);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  CounterRng jitter(options.seed, 0);
  std::vector<Vec> starts;
  for (int i = 0; i < options.n_starts; ++i) {
    if (i < static_cast<int>(ranked.size()) && i < std::max(1, options.n_starts / 2)) {
      starts.push_back(ranked[static_cast<std::size_t>(i)].second);
    } else {
      Vec v = ranked.front().second;
      for (Eigen::Index j = 0; j < v.size(); ++j)
        v[j] += 0.05 * (1.0 + std::abs(v[j])) * jitter.next_normal();
      starts.push_back(v);
    }
  }

  FitResult best;
  double best_f = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  Vec best_x;
  for (const Vec& start : starts) {
    auto run = detail::bfgs(obj, start, options.max_iterations,
                            options.grad_tol_rel, options.step_tol);
    total_iterations += run.iterations;
    if (options.polish) {
      auto polished = detail::nelder_mead(obj, run.x, 200 * static_cast<int>(start.size()));
      if (polished.f < run.f) {
        auto rerun = detail::bfgs(obj, polished.x, options.max_iterations / 4,
                                  options.grad_tol_rel, options.step_tol);
        total_iterations += rerun.iterations;
        run = rerun.f < polished.f ? rerun : detail::MinimizeResult{polished.x, polished.f, 0};
      }
    }
    if (run.f < best_f) {
      best_f = run.f;
      best_x = run.x;
    }
  }

  best.theta_hat = unpack(best_x, tmpl);
  best.loglik = -best_f;
  best.n_iterations = total_iterations;
  best.start_points_tried = static_cast<int>(starts.size());
  best.gradient_norm = detail::numeric_gradient(obj, best_x).norm();
  best.converged = best.gradient_norm <= 1e-6 * (1.0 + std::abs(best_f));
  return best;
}

/// Panel-input variant: the covariance uses the 1/N divisor of the
/// concentrated likelihood.
inline FitResult fit(const PanelSample& panel, int r_bar, Variant variant,
                     const FitOptions& options = {}) {
  Theta tmpl = default_template(variant, panel.big_t(), r_bar);
  return fit(sample_cov(panel, CovDivisor::N), tmpl, options);
}

}  // namespace panelid
