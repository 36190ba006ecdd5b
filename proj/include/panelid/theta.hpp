#pragma once

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace panelid {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Variant { Baseline, FixedEffectsLevels, Differenced, ArPanel };
enum class Normalization { TopBlockIdentity, Tail, None };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "Baseline";
    case Variant::FixedEffectsLevels: return "FixedEffectsLevels";
    case Variant::Differenced: return "Differenced";
    case Variant::ArPanel: return "ArPanel";
  }
  return "?";
}

inline std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::TopBlockIdentity: return "TopBlockIdentity";
    case Normalization::Tail: return "Tail";
    case Normalization::None: return "None";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "Baseline") return Variant::Baseline;
  if (s == "FixedEffectsLevels") return Variant::FixedEffectsLevels;
  if (s == "Differenced") return Variant::Differenced;
  if (s == "ArPanel") return Variant::ArPanel;
  throw std::invalid_argument("unknown variant: " + s);
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "TopBlockIdentity") return Normalization::TopBlockIdentity;
  if (s == "Tail") return Normalization::Tail;
  if (s == "None") return Normalization::None;
  throw std::invalid_argument("unknown normalization: " + s);
}

/// Error-covariance parameters of the differenced model: the innovation
/// variance sigma^2 and the free first-period parameters sigma_1^2 and
/// sigma_c of the leading 2x2 block.
struct DExtra {
  double sigma2 = 1.0;
  double sigma1_sq = 1.0;
  double sigma_c = 0.0;
};

/// Minimal time dimension required by each model variant. For Differenced,
/// `big_t` is the differenced length, so the level requirement
/// T_level >= 2(r+1)+3 becomes big_t >= 2(r+1)+2.
inline int min_time_periods(Variant v, int r_bar) {
  switch (v) {
    case Variant::Baseline: return 2 * (r_bar + 1);
    case Variant::FixedEffectsLevels: return 6;
    case Variant::Differenced: return 2 * (r_bar + 1) + 2;
    case Variant::ArPanel: return 4;
  }
  return 0;
}

/// Full structural parameter point: autoregressive coefficient, factor
/// matrix, loading covariance and idiosyncratic variances, plus the model
/// variant and the normalization scheme that pins down the factor rotation.
struct Theta {
  double alpha = 0.0;
  int big_t = 0;    // number of time periods T (differenced length for Differenced)
  int r_bar = 0;    // number of factors
  Mat factors;      // T x r_bar, row t is f_t'
  Mat psi;          // r_bar x r_bar symmetric PD
  Vec d_diag;       // length T, idiosyncratic variances (unused for Differenced)
  std::optional<DExtra> d_extra;  // present iff variant == Differenced
  Variant variant = Variant::Baseline;
  Normalization normalization = Normalization::TopBlockIdentity;

  /// Shape and sign consistency only: dimensions, symmetric psi, positive
  /// error variances. This is what the matrix builders require; degenerate
  /// (singular-psi, denormalized) points still have a well-defined Sigma.
  std::vector<std::string> structural_violations() const;

  /// Full invariants: structural consistency plus positive-definite psi and
  /// the variant's normalization. Dimension bounds are skipped when
  /// strict_dims is false (exploratory regime).
  std::vector<std::string> validate(bool strict_dims = true) const;

  void require_structural() const { raise_if("invalid theta", structural_violations()); }

  void require_valid(bool strict_dims = true) const {
    raise_if("invalid theta", validate(strict_dims));
  }

 private:
  static void raise_if(const char* what, const std::vector<std::string>& v) {
    if (v.empty()) return;
    std::ostringstream os;
    os << what << ":";
    for (const auto& s : v) os << " [" << s << "]";
    throw std::invalid_argument(os.str());
  }
};

namespace detail {
inline bool near(double a, double b, double tol = 1e-12) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}
}  // namespace detail

/// Normalization-specific constraint report (empty iff the factor matrix
/// satisfies its variant's normalization). Pure and idempotent.
inline std::vector<std::string> validate_normalization(const Theta& th) {
  std::vector<std::string> out;
  const Mat& f = th.factors;
  if (f.rows() != th.big_t || f.cols() != th.r_bar) {
    out.push_back("factors must be T x r_bar");
    return out;
  }
  switch (th.variant) {
    case Variant::Baseline:
    case Variant::Differenced: {
      if (th.normalization != Normalization::TopBlockIdentity) {
        out.push_back(to_string(th.variant) +
                      " requires TopBlockIdentity normalization");
        break;
      }
      if (th.big_t < th.r_bar) break;
      for (int i = 0; i < th.r_bar; ++i)
        for (int j = 0; j < th.r_bar; ++j)
          if (!detail::near(f(i, j), i == j ? 1.0 : 0.0))
            out.push_back("top block of factors is not the identity at (" +
                          std::to_string(i + 1) + "," + std::to_string(j + 1) +
                          ")");
      break;
    }
    case Variant::FixedEffectsLevels: {
      if (th.normalization != Normalization::Tail) {
        out.push_back("FixedEffectsLevels requires Tail normalization");
        break;
      }
      if (th.r_bar != 2) {
        out.push_back("FixedEffectsLevels requires r_bar = 2");
        break;
      }
      for (int t = 1; t < th.big_t; ++t)
        if (!detail::near(f(t, 0), 1.0))
          out.push_back("first factor column must be 1 after period 1 (row " +
                        std::to_string(t + 1) + ")");
      if (th.big_t >= 2) {
        if (!detail::near(f(th.big_t - 2, 1), 0.0))
          out.push_back("tail normalization requires f_{T-1} = 0");
        if (!detail::near(f(th.big_t - 1, 1), 1.0))
          out.push_back("tail normalization requires f_T = 1");
        // the last 2x2 block of F must be invertible
        if (detail::near(f(th.big_t - 2, 1), f(th.big_t - 1, 1)))
          out.push_back("free factor must satisfy f_{T-1} != f_T");
      }
      break;
    }
    case Variant::ArPanel: {
      if (th.r_bar != 1) {
        out.push_back("ArPanel requires r_bar = 1");
        break;
      }
      for (int t = 1; t < th.big_t; ++t)
        if (!detail::near(f(t, 0), 1.0))
          out.push_back("ArPanel factor must be 1 after period 1 (row " +
                        std::to_string(t + 1) + ")");
      break;
    }
  }
  return out;
}

inline std::vector<std::string> Theta::structural_violations() const {
  std::vector<std::string> out;
  if (big_t < 1) out.push_back("T must be >= 1");
  if (r_bar < 0) out.push_back("r_bar must be >= 0");
  if (factors.rows() != big_t || factors.cols() != r_bar)
    out.push_back("factors must be T x r_bar");
  if (psi.rows() != r_bar || psi.cols() != r_bar)
    out.push_back("psi must be r_bar x r_bar");
  if (r_bar > 0 && psi.rows() == r_bar && !psi.isApprox(psi.transpose(), 1e-10))
    out.push_back("psi must be symmetric");
  if (variant == Variant::Differenced) {
    if (!d_extra) out.push_back("Differenced requires d_extra");
    else {
      if (d_extra->sigma2 <= 0.0) out.push_back("sigma2 must be positive");
      if (d_extra->sigma1_sq <= 0.0) out.push_back("sigma1_sq must be positive");
    }
  } else {
    if (d_extra) out.push_back("d_extra only valid for Differenced");
    if (d_diag.size() != big_t) out.push_back("d must have length T");
    for (int t = 0; t < d_diag.size(); ++t)
      if (d_diag[t] <= 0.0)
        out.push_back("d_" + std::to_string(t + 1) + " must be positive");
  }
  return out;
}

inline std::vector<std::string> Theta::validate(bool strict_dims) const {
  std::vector<std::string> out = structural_violations();
  if (r_bar > 0 && psi.rows() == r_bar && psi.cols() == r_bar) {
    Eigen::SelfAdjointEigenSolver<Mat> es(psi);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
      out.push_back("psi must be positive definite");
  }
  if (strict_dims && big_t < min_time_periods(variant, r_bar))
    out.push_back("T = " + std::to_string(big_t) + " below the bound " +
                  std::to_string(min_time_periods(variant, r_bar)) + " for " +
                  to_string(variant));
  auto norm = validate_normalization(*this);
  out.insert(out.end(), norm.begin(), norm.end());
  return out;
}

// ---- JSON serialization -------------------------------------------------
// Document keys: alpha, T, r_bar, F (row-major), Psi (row-major), d,
// d_extra ([sigma2, sigma1_sq, sigma_c] or null), variant, normalization.

inline void to_json(nlohmann::json& j, const Theta& th) {
  std::vector<double> f(th.factors.data(),
                        th.factors.data() + th.factors.size());
  std::vector<double> p(th.psi.data(), th.psi.data() + th.psi.size());
  std::vector<double> d(th.d_diag.data(), th.d_diag.data() + th.d_diag.size());
  j = nlohmann::json{{"alpha", th.alpha},
                     {"T", th.big_t},
                     {"r_bar", th.r_bar},
                     {"F", f},
                     {"Psi", p},
                     {"d", d},
                     {"variant", to_string(th.variant)},
                     {"normalization", to_string(th.normalization)}};
  if (th.d_extra)
    j["d_extra"] = {th.d_extra->sigma2, th.d_extra->sigma1_sq,
                    th.d_extra->sigma_c};
  else
    j["d_extra"] = nullptr;
}

inline void from_json(const nlohmann::json& j, Theta& th) {
  th.alpha = j.at("alpha").get<double>();
  th.big_t = j.at("T").get<int>();
  th.r_bar = j.at("r_bar").get<int>();
  auto f = j.at("F").get<std::vector<double>>();
  if (static_cast<int>(f.size()) != th.big_t * th.r_bar)
    throw std::invalid_argument("F has wrong length");
  th.factors = Eigen::Map<const Mat>(f.data(), th.big_t, th.r_bar);
  auto p = j.at("Psi").get<std::vector<double>>();
  if (static_cast<int>(p.size()) != th.r_bar * th.r_bar)
    throw std::invalid_argument("Psi has wrong length");
  th.psi = Eigen::Map<const Mat>(p.data(), th.r_bar, th.r_bar);
  auto d = j.at("d").get<std::vector<double>>();
  th.d_diag = Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
  th.variant = variant_from_string(j.at("variant").get<std::string>());
  th.normalization =
      normalization_from_string(j.at("normalization").get<std::string>());
  if (j.contains("d_extra") && !j.at("d_extra").is_null()) {
    auto e = j.at("d_extra").get<std::vector<double>>();
    if (e.size() != 3) throw std::invalid_argument("d_extra must be a triple");
    th.d_extra = DExtra{e[0], e[1], e[2]};
  } else {
    th.d_extra.reset();
  }
}

}  // namespace panelid
