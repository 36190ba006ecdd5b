#pragma once

#include <optional>
#include <stdexcept>

#include "panelid/matrices.hpp"
#include "panelid/rng.hpp"
#include "panelid/theta.hpp"

namespace panelid {

/// Controls for drawing random generic parameter points. Factors come from
/// continuous distributions so the checks operate off the measure-zero
/// failure sets.
struct ThetaGenOptions {
  std::optional<double> alpha;               // fixed value; otherwise drawn
  double alpha_lo = -0.9, alpha_hi = 0.95;
  double d_lo = 0.5, d_hi = 1.5;
  double factor_scale = 1.0;
  double psi_scale = 1.0;
};

/// Random generic theta for the given variant; the normalized factor
/// entries are set per variant, free entries are standard-normal draws.
inline Theta random_theta(Variant variant, int big_t, int r_bar,
                          CounterRng& rng, const ThetaGenOptions& opt = {}) {
  Theta th;
  th.variant = variant;
  th.big_t = big_t;
  th.alpha = opt.alpha ? *opt.alpha : rng.next_uniform_in(opt.alpha_lo, opt.alpha_hi);

  switch (variant) {
    case Variant::Baseline:
    case Variant::Differenced: {
      th.r_bar = r_bar;
      th.normalization = Normalization::TopBlockIdentity;
      th.factors = Mat::Zero(big_t, r_bar);
      for (int i = 0; i < r_bar; ++i) th.factors(i, i) = 1.0;
      for (int t = r_bar; t < big_t; ++t)
        for (int j = 0; j < r_bar; ++j)
          th.factors(t, j) = opt.factor_scale * rng.next_normal();
      break;
    }
    case Variant::FixedEffectsLevels: {
      th.r_bar = 2;
      th.normalization = Normalization::Tail;
      th.factors = Mat::Ones(big_t, 2);
      th.factors(0, 0) = opt.factor_scale * rng.next_normal();  // f_gamma
      for (int t = 0; t < big_t - 2; ++t)
        th.factors(t, 1) = opt.factor_scale * rng.next_normal();
      th.factors(big_t - 2, 1) = 0.0;
      th.factors(big_t - 1, 1) = 1.0;
      break;
    }
    case Variant::ArPanel: {
      th.r_bar = 1;
      th.normalization = Normalization::None;
      th.factors = Mat::Ones(big_t, 1);
      th.factors(0, 0) = opt.factor_scale * rng.next_normal();  // f_gamma
      break;
    }
  }

  // random symmetric PD loading covariance: A A' + small ridge
  Mat a(th.r_bar, th.r_bar);
  for (int i = 0; i < th.r_bar; ++i)
    for (int j = 0; j < th.r_bar; ++j) a(i, j) = rng.next_normal();
  th.psi = opt.psi_scale * (a * a.transpose() + 0.3 * Mat::Identity(th.r_bar, th.r_bar));

  if (variant == Variant::Differenced) {
    DExtra e;
    e.sigma2 = rng.next_uniform_in(opt.d_lo, opt.d_hi);
    e.sigma1_sq = rng.next_uniform_in(0.8 * e.sigma2, 2.0 * e.sigma2);
    // keep the leading block PD and realizable by level-data construction
    const double bound = 0.5 * e.sigma2 * std::sqrt(e.sigma1_sq / e.sigma2);
    e.sigma_c = rng.next_uniform_in(-bound, bound);
    th.d_extra = e;
  } else {
    th.d_diag = Vec(big_t);
    for (int t = 0; t < big_t; ++t)
      th.d_diag[t] = rng.next_uniform_in(opt.d_lo, opt.d_hi);
  }

  th.require_valid(false);
  build_omega(th);  // throws if the draw is degenerate
  return th;
}

}  // namespace panelid
