#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace panelid {

/// Row/column index sets of an exclusion minor, 1-based. band = 0 excludes
/// the main diagonal (R and C disjoint); band = 1 excludes the whole
/// tridiagonal band (|r - c| >= 2 for every selected entry).
struct ExclusionMinor {
  std::vector<int> rows;  // strictly increasing
  std::vector<int> cols;  // strictly increasing
  int band = 0;

  int dim() const { return static_cast<int>(rows.size()); }

  std::string label() const {
    auto join = [](const std::vector<int>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
      return s;
    };
    return "(" + join(rows) + "),(" + join(cols) + ")";
  }

  std::vector<std::string> validate(int big_t) const {
    std::vector<std::string> out;
    if (rows.size() != cols.size() || rows.empty())
      out.push_back("rows and cols must be nonempty and of equal size");
    if (band != 0 && band != 1) out.push_back("band must be 0 or 1");
    auto check_sorted = [&](const std::vector<int>& v, const char* name) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 1 || v[i] > big_t)
          out.push_back(std::string(name) + " index out of range");
        if (i && v[i] <= v[i - 1])
          out.push_back(std::string(name) + " must be strictly increasing");
      }
    };
    check_sorted(rows, "row");
    check_sorted(cols, "col");
    for (int r : rows)
      for (int c : cols)
        if (std::abs(r - c) < band + 1)
          out.push_back("entry (" + std::to_string(r) + "," +
                        std::to_string(c) + ") lies inside the excluded band");
    if (band == 0 && 2 * dim() > big_t)
      out.push_back("dimension k exceeds T/2");
    return out;
  }

  void require_valid(int big_t) const {
    auto v = validate(big_t);
    if (!v.empty()) throw std::invalid_argument("invalid minor " + label() + ": " + v.front());
  }
};

inline void to_json(nlohmann::json& j, const ExclusionMinor& m) {
  j = nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"band", m.band}};
}

inline void from_json(const nlohmann::json& j, ExclusionMinor& m) {
  m.rows = j.at("rows").get<std::vector<int>>();
  m.cols = j.at("cols").get<std::vector<int>>();
  m.band = j.value("band", 0);
}

namespace detail {

inline void k_subsets(int big_t, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> cur;
  cur.reserve(static_cast<std::size_t>(k));
  // lexicographic recursion over 1..T
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    int need = k - static_cast<int>(cur.size());
    for (int v = start; v + need - 1 <= big_t; ++v) {
      cur.push_back(v);
      self(self, v + 1);
      cur.pop_back();
    }
  };
  rec(rec, 1);
}

}  // namespace detail

/// All k-dimensional exclusion minors of a T x T symmetric matrix,
/// deduplicated under transpose symmetry (the representative keeps the
/// smallest index of R union C in R) and listed in lexicographic order.
/// Infeasible (big_t, k, band) simply yields an empty list.
inline std::vector<ExclusionMinor> enumerate_minors(int big_t, int k, int band) {
  if (big_t < 1 || k < 1) throw std::invalid_argument("T and k must be >= 1");
  if (band != 0 && band != 1) throw std::invalid_argument("band must be 0 or 1");
  std::vector<ExclusionMinor> out;
  if (band == 0 && 2 * k > big_t) return out;
  if (band == 1 && big_t < 2 * k + 1) return out;

  std::vector<std::vector<int>> row_sets;
  detail::k_subsets(big_t, k, row_sets);
  for (const auto& rows : row_sets) {
    // columns compatible with every selected row
    std::vector<int> allowed;
    for (int c = 1; c <= big_t; ++c) {
      bool ok = true;
      for (int r : rows)
        if (std::abs(r - c) < band + 1) { ok = false; break; }
      if (ok) allowed.push_back(c);
    }
    if (static_cast<int>(allowed.size()) < k) continue;
    std::vector<std::vector<int>> col_idx;
    detail::k_subsets(static_cast<int>(allowed.size()), k, col_idx);
    for (const auto& ci : col_idx) {
      std::vector<int> cols(ci.size());
      for (std::size_t i = 0; i < ci.size(); ++i)
        cols[i] = allowed[static_cast<std::size_t>(ci[i] - 1)];
      // transpose dedup: keep the orientation whose R holds the smallest index
      if (std::min(rows.front(), cols.front()) != rows.front()) continue;
      out.push_back(ExclusionMinor{rows, cols, band});
    }
  }
  return out;
}

}  // namespace panelid
