#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

#include "panelid/fit.hpp"
#include "panelid/gen.hpp"
#include "panelid/ident.hpp"
#include "panelid/simulate.hpp"

namespace panelid {

/// Config-driven experiment description. `theta` holds either a literal
/// parameter document or a generator spec ({"variant", "T", "r_bar",
/// "alpha", ...}) for random draws.
struct ExperimentConfig {
  std::string command;  // simulate | identify | fit | mc
  nlohmann::json theta;
  int n_units = 1000;
  int n_replications = 1;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::vector<std::string> formats = {"json", "csv"};
  int workers = 1;
  int n_minors = 2;              // identify
  std::string input_path;       // fit
  std::string input_variant;    // fit
  int input_r_bar = 1;          // fit
  std::vector<int> n_grid;      // mc
};

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.command = j.at("command").get<std::string>();
  if (j.contains("theta")) c.theta = j.at("theta");
  c.n_units = j.value("n_units", 1000);
  c.n_replications = j.value("n_replications", 1);
  c.seed = j.value("seed", std::uint64_t{1});
  c.output_dir = j.value("output_dir", std::string("."));
  if (j.contains("formats"))
    c.formats = j.at("formats").get<std::vector<std::string>>();
  c.workers = j.value("workers", 1);
  c.n_minors = j.value("n_minors", 2);
  c.input_path = j.value("input_path", std::string());
  c.input_variant = j.value("variant", std::string());
  c.input_r_bar = j.value("r_bar", 1);
  if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<int>>();
}

namespace detail {

struct ThetaSource {
  bool is_generator = false;
  Theta literal;
  Variant variant = Variant::Baseline;
  int big_t = 0;
  int r_bar = 1;
  ThetaGenOptions options;

  Theta draw(std::uint64_t seed, std::uint64_t replication) const {
    if (!is_generator) return literal;
    CounterRng rng(seed, replication);
    return random_theta(variant, big_t, r_bar, rng, options);
  }
};

inline ThetaSource parse_theta_source(const nlohmann::json& doc) {
  if (doc.is_null())
    throw std::invalid_argument("config requires a theta document or generator");
  ThetaSource src;
  if (doc.contains("F")) {  // literal theta document
    src.literal = doc.get<Theta>();
    src.literal.require_valid(false);
    return src;
  }
  src.is_generator = true;
  src.variant = variant_from_string(doc.at("variant").get<std::string>());
  src.big_t = doc.at("T").get<int>();
  src.r_bar = doc.value("r_bar", src.variant == Variant::FixedEffectsLevels ? 2 : 1);
  if (doc.contains("alpha")) {
    if (doc.at("alpha").is_number()) {
      src.options.alpha = doc.at("alpha").get<double>();
    } else {
      auto range = doc.at("alpha").get<std::vector<double>>();
      if (range.size() != 2)
        throw std::invalid_argument("alpha range must be [lo, hi]");
      src.options.alpha_lo = range[0];
      src.options.alpha_hi = range[1];
    }
  }
  if (doc.contains("d_range")) {
    auto range = doc.at("d_range").get<std::vector<double>>();
    if (range.size() != 2) throw std::invalid_argument("d_range must be [lo, hi]");
    src.options.d_lo = range[0];
    src.options.d_hi = range[1];
  }
  src.options.factor_scale = doc.value("factor_scale", 1.0);
  src.options.psi_scale = doc.value("psi_scale", 1.0);
  return src;
}

inline bool wants_format(const ExperimentConfig& c, const std::string& f) {
  for (const auto& s : c.formats)
    if (s == f) return true;
  return false;
}

/// Replication-level worker pool with results stored by index, so the
/// aggregate is independent of the worker count.
template <typename Fn>
void parallel_replications(int n, int workers, Fn&& body) {
  if (workers <= 1) {
    for (int r = 0; r < n; ++r) body(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, n);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < n; r = next.fetch_add(1)) body(r);
    });
  for (auto& t : pool) t.join();
}

inline IdentReport dispatch_check(const Theta& th, int n_minors) {
  switch (th.variant) {
    case Variant::Baseline: return check_alpha_identification(th, n_minors);
    case Variant::FixedEffectsLevels: return check_fixed_effects_levels(th);
    case Variant::Differenced: return check_differenced(th);
    case Variant::ArPanel: return check_ar_panel(th);
  }
  throw std::invalid_argument("unknown variant");
}

inline void print_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::cout << row[i];
      if (i + 1 < row.size())
        std::cout << std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << "\n";
  }
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << body;
}

// ---- command implementations ---------------------------------------------

inline int run_simulate(const ExperimentConfig& cfg) {
  const ThetaSource src = parse_theta_source(cfg.theta);
  std::filesystem::create_directories(cfg.output_dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (int r = 0; r < cfg.n_replications; ++r) {
    const Theta th = src.draw(cfg.seed, static_cast<std::uint64_t>(r));
    const Vec delta = Vec::Zero(th.big_t);
    PanelSample panel = gen_panel(th, delta, cfg.n_units,
                                  cfg.seed + static_cast<std::uint64_t>(r) * 0x10001);
    char name[64];
    std::snprintf(name, sizeof(name), "panel_r%03d", r);
    const auto base = std::filesystem::path(cfg.output_dir) / name;
    if (wants_format(cfg, "csv")) write_panel_csv(panel, base.string() + ".csv");
    write_panel_binary(panel, base.string() + ".pnls");
    manifest.push_back({{"replication", r},
                        {"file", std::string(name)},
                        {"n_units", cfg.n_units},
                        {"theta", th}});
  }
  if (wants_format(cfg, "json"))
    write_text(std::filesystem::path(cfg.output_dir) / "panels.json",
               manifest.dump(2) + "\n");
  std::cout << "wrote " << cfg.n_replications << " panel(s) of " << cfg.n_units
            << " units to " << cfg.output_dir << "\n";
  return 0;
}

inline int run_identify(const ExperimentConfig& cfg) {
  const ThetaSource src = parse_theta_source(cfg.theta);
  std::filesystem::create_directories(cfg.output_dir);
  std::vector<IdentReport> reports(static_cast<std::size_t>(cfg.n_replications));
  std::vector<std::string> failures(static_cast<std::size_t>(cfg.n_replications));
  parallel_replications(cfg.n_replications, cfg.workers, [&](int r) {
    try {
      const Theta th = src.draw(cfg.seed, static_cast<std::uint64_t>(r));
      reports[static_cast<std::size_t>(r)] = dispatch_check(th, cfg.n_minors);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(r)] = e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw std::runtime_error("identification check failed: " + f);

  int identified = 0;
  std::map<int, int> degree_hist;
  int degree_violations = 0;
  for (const auto& rep : reports) {
    identified += rep.identified ? 1 : 0;
    for (const auto& pm : rep.per_minor) {
      if (pm.zero_poly) continue;
      ++degree_hist[pm.jtilde_degree];
      const int k = pm.minor.dim();
      const int r_bar = rep.minors_used.empty() ? 1 : k - 1;
      if (pm.jtilde_degree < std::max(0, k - r_bar) ||
          pm.jtilde_degree > 2 * k - 1)
        ++degree_violations;
    }
  }

  std::vector<std::vector<std::string>> table;
  table.push_back({"checks", "identified", "rate", "degree_violations"});
  table.push_back({std::to_string(cfg.n_replications),
                   std::to_string(identified),
                   fmt_num(double(identified) / cfg.n_replications),
                   std::to_string(degree_violations)});
  print_table(table);
  std::vector<std::vector<std::string>> hist;
  hist.push_back({"jtilde_degree", "count"});
  for (const auto& [deg, count] : degree_hist)
    hist.push_back({std::to_string(deg), std::to_string(count)});
  print_table(hist);

  if (wants_format(cfg, "json")) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rep : reports) arr.push_back(rep);
    write_text(std::filesystem::path(cfg.output_dir) / "ident_reports.json",
               arr.dump(2) + "\n");
  }
  if (wants_format(cfg, "csv")) {
    std::string csv = "replication,identified,alpha_true,n_common_roots\n";
    for (std::size_t r = 0; r < reports.size(); ++r)
      csv += std::to_string(r) + "," + (reports[r].identified ? "1" : "0") + "," +
             fmt_num(reports[r].alpha_true) + "," +
             std::to_string(reports[r].common_roots.size()) + "\n";
    write_text(std::filesystem::path(cfg.output_dir) / "ident_summary.csv", csv);
  }
  std::cout << "identified " << identified << "/" << cfg.n_replications << "\n";
  return 0;
}

inline int run_fit(const ExperimentConfig& cfg) {
  if (cfg.input_path.empty())
    throw std::invalid_argument("fit requires input_path (csv or pnls panel file)");
  if (cfg.input_variant.empty())
    throw std::invalid_argument("fit requires the variant of the model to fit");
  const Variant variant = variant_from_string(cfg.input_variant);
  Mat y;
  if (cfg.input_path.size() > 5 &&
      cfg.input_path.substr(cfg.input_path.size() - 5) == ".pnls")
    y = read_panel_binary(cfg.input_path);
  else
    y = read_panel_csv(cfg.input_path);
  PanelSample panel;
  panel.y = y;
  FitOptions options;
  options.seed = cfg.seed;
  FitResult result = fit(panel, cfg.input_r_bar, variant, options);

  std::filesystem::create_directories(cfg.output_dir);
  std::vector<std::vector<std::string>> table;
  table.push_back({"alpha_hat", "loglik", "converged", "grad_norm", "starts"});
  table.push_back({fmt_num(result.theta_hat.alpha), fmt_num(result.loglik),
                   result.converged ? "yes" : "no", fmt_num(result.gradient_norm),
                   std::to_string(result.start_points_tried)});
  print_table(table);
  if (wants_format(cfg, "json")) {
    nlohmann::json j = result;
    write_text(std::filesystem::path(cfg.output_dir) / "fit_result.json",
               j.dump(2) + "\n");
  }
  if (wants_format(cfg, "csv")) {
    std::string csv = "alpha_hat,loglik,converged,gradient_norm,start_points\n";
    csv += fmt_num(result.theta_hat.alpha) + "," + fmt_num(result.loglik) + "," +
           (result.converged ? "1" : "0") + "," + fmt_num(result.gradient_norm) +
           "," + std::to_string(result.start_points_tried) + "\n";
    write_text(std::filesystem::path(cfg.output_dir) / "fit_result.csv", csv);
  }
  return 0;
}

struct McCell {
  double alpha_err = 0.0;
  double param_gap = 0.0;
  bool converged = false;
};

inline double mc_param_gap(const Theta& hat, const Theta& truth) {
  double gap = (hat.factors - truth.factors).cwiseAbs().maxCoeff();
  gap = std::max(gap, (hat.psi - truth.psi).cwiseAbs().maxCoeff());
  if (truth.variant == Variant::Differenced) {
    gap = std::max(gap, std::abs(hat.d_extra->sigma2 - truth.d_extra->sigma2));
    gap = std::max(gap, std::abs(hat.d_extra->sigma1_sq - truth.d_extra->sigma1_sq));
    gap = std::max(gap, std::abs(hat.d_extra->sigma_c - truth.d_extra->sigma_c));
  } else {
    gap = std::max(gap, (hat.d_diag - truth.d_diag).cwiseAbs().maxCoeff());
  }
  return gap;
}

inline int run_mc(const ExperimentConfig& cfg) {
  const ThetaSource src = parse_theta_source(cfg.theta);
  if (cfg.n_grid.empty())
    throw std::invalid_argument("mc requires n_grid (list of panel sizes N)");
  std::filesystem::create_directories(cfg.output_dir);

  std::string csv = "N,replication,alpha_true,alpha_hat,alpha_err,param_gap,converged\n";
  std::vector<std::vector<std::string>> table;
  table.push_back({"N", "reps", "bias(alpha)", "RMSE(alpha)", "max_param_gap",
                   "converged"});
  nlohmann::json summary = nlohmann::json::array();

  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const int n = cfg.n_grid[gi];
    std::vector<McCell> cells(static_cast<std::size_t>(cfg.n_replications));
    std::vector<Theta> truths(static_cast<std::size_t>(cfg.n_replications));
    std::vector<double> alpha_hats(static_cast<std::size_t>(cfg.n_replications));
    std::vector<std::string> failures(static_cast<std::size_t>(cfg.n_replications));
    parallel_replications(cfg.n_replications, cfg.workers, [&](int r) {
      try {
        const Theta truth = src.draw(cfg.seed, static_cast<std::uint64_t>(r));
        const std::uint64_t panel_seed =
            cfg.seed ^ (0x5851F42D4C957F2DULL * (gi + 1)) ^
            (0x14057B7EF767814FULL * static_cast<std::uint64_t>(r + 1));
        PanelSample panel = gen_panel(truth, Vec::Zero(truth.big_t), n, panel_seed);
        FitOptions options;
        options.seed = cfg.seed + static_cast<std::uint64_t>(r);
        FitResult fr = fit(panel, truth.r_bar, truth.variant, options);
        auto& cell = cells[static_cast<std::size_t>(r)];
        cell.alpha_err = fr.theta_hat.alpha - truth.alpha;
        cell.param_gap = mc_param_gap(fr.theta_hat, truth);
        cell.converged = fr.converged;
        truths[static_cast<std::size_t>(r)] = truth;
        alpha_hats[static_cast<std::size_t>(r)] = fr.theta_hat.alpha;
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(r)] = e.what();
      }
    });
    for (const auto& f : failures)
      if (!f.empty()) throw std::runtime_error("mc replication failed: " + f);

    double bias = 0.0, mse = 0.0, max_gap = 0.0;
    int converged = 0;
    for (int r = 0; r < cfg.n_replications; ++r) {
      const auto& cell = cells[static_cast<std::size_t>(r)];
      bias += cell.alpha_err;
      mse += cell.alpha_err * cell.alpha_err;
      max_gap = std::max(max_gap, cell.param_gap);
      converged += cell.converged ? 1 : 0;
      csv += std::to_string(n) + "," + std::to_string(r) + "," +
             fmt_num(truths[static_cast<std::size_t>(r)].alpha) + "," +
             fmt_num(alpha_hats[static_cast<std::size_t>(r)]) + "," +
             fmt_num(cell.alpha_err) + "," + fmt_num(cell.param_gap) + "," +
             (cell.converged ? "1" : "0") + "\n";
    }
    bias /= cfg.n_replications;
    const double rmse = std::sqrt(mse / cfg.n_replications);
    table.push_back({std::to_string(n), std::to_string(cfg.n_replications),
                     fmt_num(bias), fmt_num(rmse), fmt_num(max_gap),
                     std::to_string(converged) + "/" +
                         std::to_string(cfg.n_replications)});
    summary.push_back({{"N", n},
                       {"replications", cfg.n_replications},
                       {"bias_alpha", bias},
                       {"rmse_alpha", rmse},
                       {"max_param_gap", max_gap},
                       {"converged", converged}});
  }

  print_table(table);
  if (wants_format(cfg, "csv"))
    write_text(std::filesystem::path(cfg.output_dir) / "mc_results.csv", csv);
  if (wants_format(cfg, "json"))
    write_text(std::filesystem::path(cfg.output_dir) / "mc_summary.json",
               summary.dump(2) + "\n");
  return 0;
}

}  // namespace detail

/// Dispatch a parsed experiment config. Exit codes: 0 success, 1 config
/// error, 2 runtime numerical failure.
inline int run(const ExperimentConfig& cfg) {
  try {
    if (cfg.n_replications < 1)
      throw std::invalid_argument("n_replications must be >= 1");
    if (cfg.command == "simulate") return detail::run_simulate(cfg);
    if (cfg.command == "identify") return detail::run_identify(cfg);
    if (cfg.command == "fit") return detail::run_fit(cfg);
    if (cfg.command == "mc") return detail::run_mc(cfg);
    throw std::invalid_argument("unknown command: " + cfg.command);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace panelid
