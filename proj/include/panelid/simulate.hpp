#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "panelid/matrices.hpp"
#include "panelid/rng.hpp"
#include "panelid/theta.hpp"

namespace panelid {

enum class LoadingDist { Gaussian, Uniform, FixedGrid };
enum class ErrorDist { Gaussian, Uniform };
enum class CovDivisor { NMinus1, N };

/// Distribution of the factor loadings: covariance always equals theta's
/// psi (via its Cholesky factor); the underlying unit-variance coordinates
/// are Gaussian, scaled-uniform, or a deterministic low-discrepancy grid
/// whose sample covariance converges to the identity.
struct LoadingSpec {
  LoadingDist dist = LoadingDist::Gaussian;
  Vec mean;  // empty means zero
};

struct PanelSample {
  Mat y;  // N x T, rows are units
  Theta theta_used;
  Vec delta;
  std::uint64_t seed = 0;
  Variant variant = Variant::Baseline;

  int n_units() const { return static_cast<int>(y.rows()); }
  int big_t() const { return static_cast<int>(y.cols()); }
};

namespace detail {

// radical-inverse (van der Corput) sequence in the given base
inline double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (i > 0) {
    x += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
    i /= static_cast<std::uint64_t>(base);
    f *= inv;
  }
  return x;
}

constexpr int kGridBases[] = {2, 3, 5, 7, 11, 13, 17, 19};

inline double unit_variance_draw(CounterRng& rng, ErrorDist dist) {
  if (dist == ErrorDist::Gaussian) return rng.next_normal();
  return std::sqrt(12.0) * (rng.next_uniform() - 0.5);
}

inline double loading_coordinate(CounterRng& rng, LoadingDist dist, int unit,
                                 int coord) {
  switch (dist) {
    case LoadingDist::Gaussian: return rng.next_normal();
    case LoadingDist::Uniform: return std::sqrt(12.0) * (rng.next_uniform() - 0.5);
    case LoadingDist::FixedGrid: {
      if (coord >= static_cast<int>(std::size(kGridBases)))
        throw std::invalid_argument("fixed-grid loadings support at most 8 factors");
      const double u = radical_inverse(static_cast<std::uint64_t>(unit) + 1,
                                       kGridBases[coord]);
      return std::sqrt(12.0) * (u - 0.5);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Draws a panel from the variant's data-generating process in matrix form:
/// y_i = Gamma delta + Gamma F lambda_i + Gamma eps_i, with the first period
/// generated directly from its own free parameters (no burn-in). Each unit
/// consumes an independent substream of (seed, unit), so output is
/// reproducible bit-for-bit and independent of any parallel schedule.
inline PanelSample gen_panel(const Theta& th, const Vec& delta, int n_units,
                             std::uint64_t seed, const LoadingSpec& loading = {},
                             ErrorDist error_dist = ErrorDist::Gaussian) {
  th.require_valid(false);
  if (n_units < 2) throw std::invalid_argument("n_units must be >= 2");
  if (delta.size() != th.big_t)
    throw std::invalid_argument("delta must have length T");
  if (loading.mean.size() != 0 && loading.mean.size() != th.r_bar)
    throw std::invalid_argument("loading mean must have length r_bar");

  const int big_t = th.big_t;
  const Vec mean =
      loading.mean.size() ? loading.mean : Vec(Vec::Zero(th.r_bar));
  Eigen::MatrixXd psi_chol =
      Eigen::LLT<Eigen::MatrixXd>(Eigen::MatrixXd(th.psi)).matrixL();

  PanelSample out;
  out.theta_used = th;
  out.delta = delta;
  out.seed = seed;
  out.variant = th.variant;
  out.y.resize(n_units, big_t);

  if (th.variant != Variant::Differenced) {
    const Mat gamma = build_gamma(th.alpha, big_t);
    const Vec base = gamma * delta;
    const Mat gf = gamma * th.factors;
    Vec sd(big_t);
    for (int t = 0; t < big_t; ++t) sd[t] = std::sqrt(th.d_diag[t]);
    for (int i = 0; i < n_units; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Vec z(th.r_bar);
      for (int j = 0; j < th.r_bar; ++j)
        z[j] = detail::loading_coordinate(rng, loading.dist, i, j);
      const Vec lambda = mean + psi_chol * z;
      Vec eps(big_t);
      for (int t = 0; t < big_t; ++t)
        eps[t] = sd[t] * detail::unit_variance_draw(rng, error_dist);
      out.y.row(i) = (base + gf * lambda + gamma * eps).transpose();
    }
    return out;
  }

  // Differenced: generate T+1 levels of the underlying process and take
  // first differences. The level factor path g accumulates the differenced
  // factors; the level initial condition is mixed with the second-period
  // innovation so the first differenced error realizes the requested
  // (sigma1_sq, sigma_c) exactly.
  const DExtra e = *th.d_extra;
  const double a = th.alpha;
  const double su = std::sqrt(e.sigma2);
  const double c1 = -e.sigma_c / e.sigma2;  // weight of u_2 inside eps_1
  double mix_u = 0.0, mix_w = 0.0;
  if (std::abs(a - 1.0) <= 1e-12) {
    if (std::abs(e.sigma_c + e.sigma2) > 1e-9 * e.sigma2 ||
        std::abs(e.sigma1_sq - e.sigma2) > 1e-9 * e.sigma2)
      throw std::invalid_argument(
          "at alpha = 1 the level construction forces sigma1_sq = sigma2 and "
          "sigma_c = -sigma2");
  } else {
    mix_u = (c1 - 1.0) / (a - 1.0);
    const double var_w = (e.sigma1_sq - c1 * c1 * e.sigma2) /
                         ((a - 1.0) * (a - 1.0));
    if (var_w < -1e-12 * e.sigma1_sq)
      throw std::invalid_argument(
          "sigma1_sq too small for the level construction: requires "
          "sigma1_sq >= sigma_c^2 / sigma2");
    mix_w = std::sqrt(std::max(0.0, var_w));
  }

  const int n_levels = big_t + 1;
  Mat g_levels = Mat::Zero(n_levels, th.r_bar);   // g_1 = 0
  Vec nu_levels = Vec::Zero(n_levels);            // nu_1 = 0
  g_levels.row(1) = th.factors.row(0);
  nu_levels[1] = delta[0];
  for (int t = 2; t < n_levels; ++t) {
    g_levels.row(t) = g_levels.row(t - 1) + th.factors.row(t - 1);
    nu_levels[t] = nu_levels[t - 1] + delta[t - 1];
  }

  for (int i = 0; i < n_units; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    Vec zc(th.r_bar);
    for (int j = 0; j < th.r_bar; ++j)
      zc[j] = detail::loading_coordinate(rng, loading.dist, i, j);
    const Vec lambda = mean + psi_chol * zc;
    Vec u(n_levels);  // u[0] unused; innovations for levels 2..T+1
    for (int t = 1; t < n_levels; ++t)
      u[t] = su * detail::unit_variance_draw(rng, error_dist);
    const double w = detail::unit_variance_draw(rng, error_dist);

    Vec z(n_levels);
    z[0] = nu_levels[0] + g_levels.row(0).dot(lambda) + mix_u * u[1] + mix_w * w;
    for (int t = 1; t < n_levels; ++t)
      z[t] = a * z[t - 1] + nu_levels[t] + g_levels.row(t).dot(lambda) + u[t];
    for (int t = 0; t < big_t; ++t) out.y(i, t) = z[t + 1] - z[t];
  }
  return out;
}

/// Centered sample covariance with divisor N-1 or N.
inline Mat sample_cov(const PanelSample& panel, CovDivisor divisor) {
  const int n = panel.n_units();
  if (n < 2) throw std::invalid_argument("sample_cov needs N >= 2");
  const Mat& y = panel.y;
  Eigen::RowVectorXd mean = y.colwise().mean();
  Mat centered = y.rowwise() - mean;
  const double div = divisor == CovDivisor::NMinus1 ? n - 1.0 : double(n);
  return Mat(centered.transpose() * centered / div);
}

// ---- file formats --------------------------------------------------------

/// CSV with header "unit,t1,...,tT" and full round-trip precision.
inline void write_panel_csv(const PanelSample& panel, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "unit";
  for (int t = 1; t <= panel.big_t(); ++t) os << ",t" << t;
  os << "\n";
  char buf[32];
  for (int i = 0; i < panel.n_units(); ++i) {
    os << (i + 1);
    for (int t = 0; t < panel.big_t(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", panel.y(i, t));
      os << ',' << buf;
    }
    os << "\n";
  }
}

inline Mat read_panel_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv " + path);
  int big_t = -1;  // columns after "unit"
  {
    big_t = 0;
    for (char ch : line)
      if (ch == ',') ++big_t;
  }
  std::vector<double> values;
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t pos = line.find(',');
    if (pos == std::string::npos) throw std::runtime_error("bad csv row");
    int col = 0;
    while (pos != std::string::npos && col < big_t) {
      std::size_t next = line.find(',', pos + 1);
      values.push_back(std::stod(line.substr(pos + 1, next - pos - 1)));
      pos = next;
      ++col;
    }
    if (col != big_t) throw std::runtime_error("ragged csv row");
    ++rows;
  }
  return Eigen::Map<const Mat>(values.data(), rows, big_t);
}

/// Compact binary layout: magic "PNLS", version byte 1, u32 N, u32 T,
/// N*T row-major little-endian doubles.
inline void write_panel_binary(const PanelSample& panel, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("PNLS", 4);
  const char version = 1;
  os.write(&version, 1);
  const std::uint32_t n = static_cast<std::uint32_t>(panel.n_units());
  const std::uint32_t t = static_cast<std::uint32_t>(panel.big_t());
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&t), 4);
  os.write(reinterpret_cast<const char*>(panel.y.data()),
           static_cast<std::streamsize>(sizeof(double) * panel.y.size()));
}

inline Mat read_panel_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PNLS", 4) != 0)
    throw std::runtime_error(path + " is not a panel binary file");
  char version = 0;
  is.read(&version, 1);
  if (version != 1) throw std::runtime_error("unsupported panel binary version");
  std::uint32_t n = 0, t = 0;
  is.read(reinterpret_cast<char*>(&n), 4);
  is.read(reinterpret_cast<char*>(&t), 4);
  Mat y(n, t);
  is.read(reinterpret_cast<char*>(y.data()),
          static_cast<std::streamsize>(sizeof(double) * y.size()));
  if (!is) throw std::runtime_error("truncated panel binary file");
  return y;
}

}  // namespace panelid
