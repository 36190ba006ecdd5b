#include <catch2/catch_amalgamated.hpp>

#include "panelid/gen.hpp"
#include "panelid/jtilde.hpp"
#include "panelid/matrices.hpp"
#include "panelid/minors.hpp"
#include "panelid/poly.hpp"
#include "panelid/rng.hpp"
#include "test_helpers.hpp"

using namespace panelid;
using Catch::Approx;

namespace {

Theta baseline_theta(double alpha, int big_t, const std::vector<double>& f_free,
                     double psi, const std::vector<double>& d) {
  Theta th;
  th.variant = Variant::Baseline;
  th.normalization = Normalization::TopBlockIdentity;
  th.alpha = alpha;
  th.big_t = big_t;
  th.r_bar = 1;
  th.factors = Mat::Zero(big_t, 1);
  th.factors(0, 0) = 1.0;
  for (int t = 1; t < big_t; ++t) th.factors(t, 0) = f_free[static_cast<std::size_t>(t - 1)];
  th.psi = Mat::Constant(1, 1, psi);
  th.d_diag = Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
  return th;
}

}  // namespace

TEST_CASE("gamma builder") {
  CHECK(build_gamma(0.0, 3).isIdentity(0.0));

  Mat g = build_gamma(0.5, 3);
  Mat expected(3, 3);
  expected << 1, 0, 0, 0.5, 1, 0, 0.25, 0.5, 1;
  CHECK((g - expected).cwiseAbs().maxCoeff() == 0.0);

  // Gamma inverts B (oracle: dense inversion of B)
  Mat b = build_b(0.7, 5);
  Mat g5 = build_gamma(0.7, 5);
  CHECK((b * g5 - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::MatrixXd binv = Eigen::MatrixXd(b).inverse();
  CHECK((g5 - Mat(binv)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma inverts B for random alpha") {
  CounterRng rng(11, 0);
  for (int rep = 0; rep < 40; ++rep) {
    const double alpha = rng.next_uniform_in(-1.5, 1.5);
    const int big_t = 2 + static_cast<int>(rng.next_u64() % 11);
    Mat prod = build_gamma(alpha, big_t) * build_b(alpha, big_t);
    CHECK((prod - Mat::Identity(big_t, big_t)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("L builder and the Q decomposition") {
  Mat l0 = build_l(0.0, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(l0(r, c) == (r == c + 1 ? 1.0 : 0.0));

  // Q(alpha, a) = Gamma(a)^{-1} Gamma(alpha) = I + (alpha - a) L(alpha)
  const double alpha = 0.5, a = 0.2;
  Mat q = Eigen::MatrixXd(build_gamma(a, 4)).inverse() * build_gamma(alpha, 4);
  Mat q2 = Mat::Identity(4, 4) + (alpha - a) * build_l(alpha, 4);
  CHECK((q - q2).cwiseAbs().maxCoeff() < 1e-12);

  // L ties Gamma's subdiagonal structure: Gamma = I + alpha * L, and the
  // pair commutes; both checked by dense evaluation
  Mat g = build_gamma(0.9, 6);
  Mat l = build_l(0.9, 6);
  CHECK((g - (Mat::Identity(6, 6) + 0.9 * l)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((l * g - g * l).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Q decomposition for random draws") {
  CounterRng rng(12, 0);
  for (int rep = 0; rep < 40; ++rep) {
    const double alpha = rng.next_uniform_in(-1.5, 1.5);
    const double a = rng.next_uniform_in(-1.5, 1.5);
    const int big_t = 2 + static_cast<int>(rng.next_u64() % 11);
    Mat q = Eigen::MatrixXd(build_gamma(a, big_t)).inverse() * build_gamma(alpha, big_t);
    Mat q2 = Mat::Identity(big_t, big_t) + (alpha - a) * build_l(alpha, big_t);
    CHECK((q - q2).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("omega builder") {
  Theta th = baseline_theta(0.0, 2, {2.0}, 1.0, {0.5, 0.5});
  Mat omega = build_omega(th);
  Mat expected(2, 2);
  expected << 1.5, 2.0, 2.0, 4.5;
  CHECK((omega - expected).cwiseAbs().maxCoeff() < 1e-14);

  SECTION("differenced error covariance is tridiagonal") {
    Theta td;
    td.variant = Variant::Differenced;
    td.normalization = Normalization::TopBlockIdentity;
    td.alpha = 0.3;
    td.big_t = 4;
    td.r_bar = 1;
    td.factors = Mat::Zero(4, 1);
    td.factors(0, 0) = 1.0;
    td.factors(1, 0) = 0.4;
    td.factors(2, 0) = -0.2;
    td.factors(3, 0) = 0.9;
    td.psi = Mat::Constant(1, 1, 1.0);
    td.d_extra = DExtra{1.0, 2.0, -0.5};
    Mat dd = build_d(td);
    Mat exp_d(4, 4);
    exp_d << 2, -0.5, 0, 0, -0.5, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2;
    CHECK((dd - exp_d).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("omega minus D has rank r_bar") {
    CounterRng rng(5, 0);
    for (int rep = 0; rep < 10; ++rep) {
      for (int r_bar : {1, 2}) {
        Theta t = random_theta(Variant::Baseline, 2 * (r_bar + 1) + 2, r_bar, rng);
        Mat low_rank = build_omega(t) - build_d(t);
        Eigen::SelfAdjointEigenSolver<Mat> es(low_rank);
        int rank = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
          if (std::abs(es.eigenvalues()[i]) > 1e-10) ++rank;
        CHECK(rank == r_bar);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
      }
    }
  }

  SECTION("degenerate input is rejected") {
    Theta bad = baseline_theta(0.0, 2, {2.0}, 1.0, {0.5, -0.5});
    CHECK_THROWS_AS(build_omega(bad), std::invalid_argument);
  }
}

TEST_CASE("sigma builder") {
  SECTION("alpha = 0 collapses to omega") {
    Theta th = baseline_theta(0.0, 3, {1.0, 1.0}, 1.0, {1.0, 1.0, 1.0});
    CHECK((build_sigma(th) - build_omega(th)).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("matches the naive triple-product oracle") {
    Theta th = baseline_theta(0.5, 3, {1.0, 1.0}, 1.0, {1.0, 1.0, 1.0});
    Mat g = build_gamma(th.alpha, th.big_t);
    Mat oracle = testutil::naive_triple_product(g, build_omega(th), Mat(g.transpose()));
    CHECK((build_sigma(th) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("symmetric PD for random thetas of every variant") {
    CounterRng rng(6, 0);
    for (int rep = 0; rep < 8; ++rep) {
      for (Variant v : {Variant::Baseline, Variant::FixedEffectsLevels,
                        Variant::Differenced, Variant::ArPanel}) {
        const int big_t = std::max(min_time_periods(v, 1), 6);
        Theta t = random_theta(v, big_t, 1, rng);
        Mat s = build_sigma(t);
        CHECK(s.isApprox(s.transpose(), 1e-12));
        CHECK(is_positive_definite(s));
      }
    }
  }
}

TEST_CASE("normalization validator") {
  CounterRng rng(7, 0);
  Theta ok = random_theta(Variant::Baseline, 6, 2, rng);
  CHECK(validate_normalization(ok).empty());
  // idempotent and side-effect free
  CHECK(validate_normalization(ok).empty());

  Theta fel = random_theta(Variant::FixedEffectsLevels, 6, 2, rng);
  CHECK(validate_normalization(fel).empty());

  Theta bad = ok;
  bad.factors(1, 0) = 0.5;  // breaks the identity top block
  auto report = validate_normalization(bad);
  REQUIRE_FALSE(report.empty());
  CHECK(report.front().find("top block") != std::string::npos);
}

TEST_CASE("theta json round trip") {
  CounterRng rng(8, 0);
  for (Variant v : {Variant::Baseline, Variant::FixedEffectsLevels,
                    Variant::Differenced, Variant::ArPanel}) {
    const int big_t = std::max(min_time_periods(v, 2), 6);
    Theta t = random_theta(v, big_t, 2, rng);
    nlohmann::json j = t;
    for (const char* key : {"alpha", "T", "r_bar", "F", "Psi", "d", "d_extra",
                            "variant", "normalization"})
      CHECK(j.contains(key));
    Theta back = j.get<Theta>();
    CHECK(back.alpha == t.alpha);
    CHECK(back.big_t == t.big_t);
    CHECK((back.factors - t.factors).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.psi - t.psi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.variant == t.variant);
    CHECK(back.d_extra.has_value() == t.d_extra.has_value());
  }
}

TEST_CASE("alpha poly ring operations") {
  AlphaPoly p({1.0, 1.0});   // 1 + x
  AlphaPoly q({1.0, -1.0});  // 1 - x
  AlphaPoly prod = p * q;
  CHECK(prod.degree() == 2);
  CHECK(prod.coeff(0) == Approx(1.0));
  CHECK(prod.coeff(1) == Approx(0.0).margin(1e-15));
  CHECK(prod.coeff(2) == Approx(-1.0));

  AlphaPoly r({2.0, -3.0, 1.0});
  CHECK(r.eval(3.0) == Approx(2.0));

  CHECK(AlphaPoly().degree() == AlphaPoly::kZeroPolyDegree);
  CHECK((p - p).is_zero());
  CHECK((p - p).degree() == AlphaPoly::kZeroPolyDegree);

  // trailing coefficients below the relative threshold are trimmed
  AlphaPoly t({1.0, 1e-13});
  CHECK(t.degree() == 0);
}

TEST_CASE("minor enumeration") {
  auto m420 = enumerate_minors(4, 2, 0);
  CHECK(m420.size() == 3);
  // deterministic lexicographic order with the transpose representative
  CHECK(m420[0].rows == std::vector<int>{1, 2});
  CHECK(m420[0].cols == std::vector<int>{3, 4});

  auto m521 = enumerate_minors(5, 2, 1);
  REQUIRE(m521.size() == 1);
  CHECK(m521[0].rows == std::vector<int>{1, 2});
  CHECK(m521[0].cols == std::vector<int>{4, 5});

  CHECK(enumerate_minors(3, 2, 0).empty());

  SECTION("tridiagonal uniqueness at the minimal dimension") {
    for (int r_bar : {1, 2, 3})
      CHECK(enumerate_minors(2 * (r_bar + 1) + 1, r_bar + 1, 1).size() == 1);
  }

  SECTION("transpose dedup keeps exactly half of the ordered pairs") {
    auto m620 = enumerate_minors(6, 2, 0);
    // ordered disjoint pairs: C(6,2)*C(4,2) = 90, half by symmetry
    CHECK(m620.size() == 45);
    for (const auto& m : m620) {
      CHECK(m.validate(6).empty());
      CHECK(std::min(m.rows.front(), m.cols.front()) == m.rows.front());
    }
  }

  SECTION("band constraints are enforced") {
    ExclusionMinor bad{{1, 2}, {2, 4}, 0};
    CHECK_FALSE(bad.validate(4).empty());
    ExclusionMinor bad_band{{1, 2}, {3, 5}, 1};
    CHECK_FALSE(bad_band.validate(5).empty());
  }
}
