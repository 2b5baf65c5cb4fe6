#pragma once

#include "deftree/rational.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace deftree {

/// maximize objective . x  subject to  coeff . x <= rhs per row,  x >= 0.
///
/// Every LP assembled in this project has rhs >= 0 after fixed variables are
/// substituted out, so the slack basis is a feasible start and no phase-1 is
/// needed; solve_lp enforces that precondition.
struct LinearProgram {
  std::vector<std::string> var_names;
  std::vector<Rat> objective;
  struct Row {
    std::string label;
    std::vector<Rat> coeff;
    Rat rhs;
  };
  std::vector<Row> rows;

  size_t add_var(std::string name, Rat objective_coeff = Rat(0)) {
    var_names.push_back(std::move(name));
    objective.push_back(std::move(objective_coeff));
    for (auto& row : rows) row.coeff.emplace_back(0);
    return var_names.size() - 1;
  }
  Row& add_row(std::string label, Rat rhs = Rat(0)) {
    rows.push_back({std::move(label), std::vector<Rat>(var_names.size(), Rat(0)), std::move(rhs)});
    return rows.back();
  }

  std::string render() const {
    std::string out = "max " ;
    bool first = true;
    for (size_t j = 0; j < var_names.size(); ++j) {
      if (objective[j] == 0) continue;
      out += (first ? "" : " + ") + format_rat(objective[j]) + "*" + var_names[j];
      first = false;
    }
    out += "\nsubject to\n";
    for (const auto& row : rows) {
      out += "  [" + row.label + "] ";
      bool f = true;
      for (size_t j = 0; j < var_names.size(); ++j) {
        if (row.coeff[j] == 0) continue;
        out += (f ? "" : " + ") + format_rat(row.coeff[j]) + "*" + var_names[j];
        f = false;
      }
      if (f) out += "0";
      out += " <= " + format_rat(row.rhs) + "\n";
    }
    out += "  all variables >= 0\n";
    return out;
  }
};

struct LpResult {
  Rat value;
  std::vector<Rat> x;
  std::vector<Rat> dual;                  // one multiplier per row, >= 0
  std::vector<size_t> certificate_rows;   // rows with positive dual weight
};

/// Exact primal simplex with Bland's rule (entering: lowest eligible column;
/// leaving: lowest basis variable among ratio-test ties), immune to cycling.
inline LpResult solve_lp(const LinearProgram& lp) {
  const size_t n = lp.var_names.size();
  const size_t m = lp.rows.size();
  for (const auto& row : lp.rows) {
    if (row.coeff.size() != n) throw std::invalid_argument("row width mismatch");
    if (row.rhs < 0) throw std::invalid_argument("solve_lp requires rhs >= 0");
  }

  // Tableau: m rows of [structural | slack | rhs]; objective row holds
  // reduced costs (z_j - c_j) and the current value.
  const size_t width = n + m + 1;
  std::vector<std::vector<Rat>> tab(m, std::vector<Rat>(width, Rat(0)));
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) tab[i][j] = lp.rows[i].coeff[j];
    tab[i][n + i] = 1;
    tab[i][width - 1] = lp.rows[i].rhs;
  }
  std::vector<Rat> obj(width, Rat(0));
  for (size_t j = 0; j < n; ++j) obj[j] = -lp.objective[j];
  std::vector<size_t> basis(m);
  for (size_t i = 0; i < m; ++i) basis[i] = n + i;

  for (;;) {
    size_t enter = width;
    for (size_t j = 0; j + 1 < width; ++j) {
      if (obj[j] < 0) {
        enter = j;
        break;
      }
    }
    if (enter == width) break;

    size_t leave = m;
    Rat best_ratio;
    for (size_t i = 0; i < m; ++i) {
      if (tab[i][enter] <= 0) continue;
      Rat ratio = tab[i][width - 1] / tab[i][enter];
      if (leave == m || ratio < best_ratio ||
          (ratio == best_ratio && basis[i] < basis[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    if (leave == m)
      throw std::logic_error("unbounded objective; the assembled LPs are value-bounded");

    // Pivot on (leave, enter).
    Rat piv = tab[leave][enter];
    for (size_t j = 0; j < width; ++j) tab[leave][j] /= piv;
    for (size_t i = 0; i < m; ++i) {
      if (i == leave || tab[i][enter] == 0) continue;
      Rat f = tab[i][enter];
      for (size_t j = 0; j < width; ++j) tab[i][j] -= f * tab[leave][j];
    }
    if (obj[enter] != 0) {
      Rat f = obj[enter];
      for (size_t j = 0; j < width; ++j) obj[j] -= f * tab[leave][j];
    }
    basis[leave] = enter;
  }

  LpResult out;
  out.value = obj[width - 1];
  out.x.assign(n, Rat(0));
  for (size_t i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = tab[i][width - 1];
  out.dual.assign(m, Rat(0));
  for (size_t i = 0; i < m; ++i) {
    out.dual[i] = obj[n + i];
    if (out.dual[i] > 0) out.certificate_rows.push_back(i);
  }
  return out;
}

}  // namespace deftree
