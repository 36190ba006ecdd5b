#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "panelid/gen.hpp"
#include "panelid/simulate.hpp"
#include "test_helpers.hpp"

using namespace panelid;
using Catch::Approx;

namespace {

Theta simple_theta(double alpha, int big_t) {
  Theta th;
  th.variant = Variant::Baseline;
  th.normalization = Normalization::TopBlockIdentity;
  th.alpha = alpha;
  th.big_t = big_t;
  th.r_bar = 1;
  th.factors = Mat::Ones(big_t, 1);
  th.psi = Mat::Constant(1, 1, 1.0);
  th.d_diag = Vec::Ones(big_t);
  return th;
}

}  // namespace

TEST_CASE("counter rng substreams") {
  CounterRng a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  CounterRng a2(7, 3);
  for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
  CHECK(differs);

  SECTION("normal draws have the right first two moments") {
    CounterRng rng(123, 0);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.next_normal();
      sum += x;
      sum2 += x * x;
    }
    CHECK(sum / n == Approx(0.0).margin(5.0 / std::sqrt(double(n))));
    CHECK(sum2 / n == Approx(1.0).margin(5.0 * std::sqrt(2.0 / n)));
  }
}

TEST_CASE("panel generation determinism") {
  CounterRng rng(61, 0);
  Theta th = random_theta(Variant::Baseline, 4, 1, rng);
  Vec delta = Vec::Zero(4);
  PanelSample p1 = gen_panel(th, delta, 50, 99);
  PanelSample p2 = gen_panel(th, delta, 50, 99);
  CHECK((p1.y - p2.y).cwiseAbs().maxCoeff() == 0.0);
  PanelSample p3 = gen_panel(th, delta, 50, 100);
  CHECK((p1.y - p3.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sample covariance") {
  SECTION("two identical units give the zero matrix") {
    PanelSample p;
    p.y = Mat::Ones(2, 3);
    CHECK(sample_cov(p, CovDivisor::NMinus1).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("hand-computed three-unit dataset") {
    PanelSample p;
    p.y = Mat(3, 2);
    p.y << 1.0, 2.0, 3.0, 2.0, 2.0, 5.0;
    // column means 2, 3; centered columns (-1,1,0) and (-1,-1,2)
    Mat s1 = sample_cov(p, CovDivisor::NMinus1);
    CHECK(s1(0, 0) == Approx(1.0));
    CHECK(s1(0, 1) == Approx(0.0).margin(1e-15));
    CHECK(s1(1, 1) == Approx(3.0));
    Mat s2 = sample_cov(p, CovDivisor::N);
    CHECK(s2(1, 1) == Approx(2.0));
  }
}

TEST_CASE("sample covariance converges to sigma") {
  Theta th = simple_theta(0.0, 3);
  Vec delta = Vec::Zero(3);
  const int n = 10000;
  PanelSample p = gen_panel(th, delta, n, 7);
  Mat s = sample_cov(p, CovDivisor::NMinus1);
  Mat target = build_sigma(th);  // F Psi F' + I here
  // elementwise tolerance ~5 standard errors, var of covariance ~ O(1)/N
  const double tol = 5.0 * 3.0 / std::sqrt(double(n));
  CHECK((s - target).cwiseAbs().maxCoeff() < tol);

  SECTION("per-period idiosyncratic variances are reproduced") {
    CounterRng rng(62, 0);
    Theta t2 = random_theta(Variant::Baseline, 5, 1, rng);
    Vec d2 = Vec::Zero(5);
    PanelSample p2 = gen_panel(t2, d2, 20000, 8);
    Mat s2 = sample_cov(p2, CovDivisor::NMinus1);
    Mat gamma = build_gamma(t2.alpha, 5);
    Mat low_rank = gamma * t2.factors * t2.psi *
                   (gamma * t2.factors).transpose();
    Mat gd = gamma * Mat(t2.d_diag.asDiagonal()) * gamma.transpose();
    Mat resid = s2 - low_rank;
    Mat sigma = low_rank + gd;
    for (int t = 0; t < 5; ++t) {
      // var(S_tt) ~ 2 Sigma_tt^2 / N for Gaussian data
      const double se = std::sqrt(2.0 / 20000.0) * sigma(t, t);
      CHECK(resid(t, t) == Approx(gd(t, t)).margin(6.0 * se));
    }
  }
}

TEST_CASE("delta enters only the mean") {
  CounterRng rng(63, 0);
  Theta th = random_theta(Variant::Baseline, 4, 1, rng);
  Vec d0 = Vec::Zero(4);
  Vec d1(4);
  d1 << 1.0, -2.0, 0.5, 3.0;
  PanelSample p0 = gen_panel(th, d0, 4000, 11);
  PanelSample p1 = gen_panel(th, d1, 4000, 11);
  // same seed: identical random components, so covariances agree exactly
  CHECK((sample_cov(p0, CovDivisor::NMinus1) - sample_cov(p1, CovDivisor::NMinus1))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  // and the mean shifts by Gamma * delta
  Mat gamma = build_gamma(th.alpha, 4);
  Vec shift = gamma * d1;
  Eigen::RowVectorXd mean_gap = p1.y.colwise().mean() - p0.y.colwise().mean();
  CHECK((mean_gap.transpose() - shift).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("loading distributions reproduce psi") {
  CounterRng rng(64, 0);
  Theta th = random_theta(Variant::Baseline, 6, 2, rng);
  Vec delta = Vec::Zero(6);
  for (LoadingDist dist :
       {LoadingDist::Gaussian, LoadingDist::Uniform, LoadingDist::FixedGrid}) {
    LoadingSpec spec;
    spec.dist = dist;
    const int n = 20000;
    PanelSample p = gen_panel(th, delta, n, 13, spec);
    Mat s = sample_cov(p, CovDivisor::NMinus1);
    Mat target = build_sigma(th);
    const double scale = target.cwiseAbs().maxCoeff();
    CHECK((s - target).cwiseAbs().maxCoeff() <
          8.0 * scale / std::sqrt(double(n)));
  }
}

TEST_CASE("nonzero loading mean shifts only the mean") {
  Theta th = simple_theta(0.3, 4);
  LoadingSpec spec;
  spec.mean = Vec::Constant(1, 2.0);
  PanelSample p = gen_panel(th, Vec::Zero(4), 20000, 17, spec);
  Mat s = sample_cov(p, CovDivisor::NMinus1);
  Mat target = build_sigma(th);
  CHECK((s - target).cwiseAbs().maxCoeff() < 8.0 * 4.0 / std::sqrt(20000.0));
  Mat gf = build_gamma(th.alpha, 4) * th.factors;
  Eigen::RowVectorXd mean = p.y.colwise().mean();
  CHECK((mean.transpose() - gf * spec.mean).cwiseAbs().maxCoeff() <
        8.0 * 4.0 / std::sqrt(20000.0));
}

TEST_CASE("differenced panel realizes the tridiagonal error structure") {
  CounterRng rng(65, 0);
  Theta th = random_theta(Variant::Differenced, 6, 1, rng);
  Vec delta(6);
  for (int t = 0; t < 6; ++t) delta[t] = rng.next_normal();
  const int n = 40000;
  PanelSample p = gen_panel(th, delta, n, 19);
  Mat s = sample_cov(p, CovDivisor::NMinus1);
  Mat target = build_sigma(th);
  const double scale = target.cwiseAbs().maxCoeff();
  CHECK((s - target).cwiseAbs().maxCoeff() < 8.0 * scale / std::sqrt(double(n)));

  SECTION("the realized first-period error block matches d_extra") {
    // strip the deterministic mean and the factor part, then difference out
    // the autoregression to recover eps_i; its covariance must be D-dot
    Mat gamma = build_gamma(th.alpha, 6);
    Mat b = build_b(th.alpha, 6);
    Mat centered = p.y.rowwise() - p.y.colwise().mean().eval();
    Mat filtered = centered * b.transpose();  // = F lambda_i + eps_i, centered
    Mat cov = filtered.transpose() * filtered / double(n - 1);
    Mat dd = build_d_dot(*th.d_extra, 6);
    Mat fpf = th.factors * th.psi * th.factors.transpose();
    const double tol = 8.0 * std::max(1.0, cov.cwiseAbs().maxCoeff()) / std::sqrt(double(n));
    CHECK(cov(0, 0) == Approx(fpf(0, 0) + dd(0, 0)).margin(tol));
    CHECK(cov(0, 1) == Approx(fpf(0, 1) + dd(0, 1)).margin(tol));  // sigma_c
    CHECK(cov(1, 2) == Approx(fpf(1, 2) + dd(1, 2)).margin(tol));  // -sigma^2
    CHECK(cov(0, 3) == Approx(fpf(0, 3)).margin(tol));             // off band
  }

  SECTION("infeasible first-period parameters are rejected") {
    Theta bad = th;
    bad.d_extra->sigma_c = -1.5 * bad.d_extra->sigma2;
    bad.d_extra->sigma1_sq = 0.5 * bad.d_extra->sigma_c * bad.d_extra->sigma_c /
                             bad.d_extra->sigma2;
    CHECK_THROWS_AS(gen_panel(bad, delta, 10, 1), std::invalid_argument);
  }
}

TEST_CASE("panel file round trips") {
  CounterRng rng(66, 0);
  Theta th = random_theta(Variant::Baseline, 4, 1, rng);
  PanelSample p = gen_panel(th, Vec::Zero(4), 25, 23);
  const auto dir = std::filesystem::temp_directory_path();

  SECTION("csv") {
    const std::string path = (dir / "panelid_test.csv").string();
    write_panel_csv(p, path);
    Mat back = read_panel_csv(path);
    REQUIRE(back.rows() == p.y.rows());
    REQUIRE(back.cols() == p.y.cols());
    CHECK((back - p.y).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
  }

  SECTION("binary") {
    const std::string path = (dir / "panelid_test.pnls").string();
    write_panel_binary(p, path);
    Mat back = read_panel_binary(path);
    REQUIRE(back.rows() == p.y.rows());
    CHECK((back - p.y).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
  }

  SECTION("binary rejects foreign files") {
    const std::string path = (dir / "panelid_bogus.pnls").string();
    std::ofstream os(path);
    os << "not a panel";
    os.close();
    CHECK_THROWS_AS(read_panel_binary(path), std::runtime_error);
    std::remove(path.c_str());
  }
}
