#include "mba/simplex.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "mba/error.hpp"

namespace mba {

std::size_t LinearProgram::add_row(
    std::vector<std::pair<std::size_t, double>> coeffs, RowSense sense,
    double rhs) {
  rows.push_back({std::move(coeffs), sense, rhs});
  return rows.size() - 1;
}

namespace {

constexpr double kPivotTol = 1e-11;

// Tableau layout: columns [structural | slack/surplus | artificial | rhs].
class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& opts)
      : opts_(opts), m_(lp.rows.size()), n_(lp.num_vars) {
    for (const auto& row : lp.rows) {
      if (row.sense != RowSense::Eq) ++n_slack_;
    }
    // Rows are negated to make rhs >= 0, so a Le row may become Ge and
    // need an artificial.
    flipped_.assign(m_, false);
    needs_art_.assign(m_, false);
    for (std::size_t r = 0; r < m_; ++r) {
      const auto& row = lp.rows[r];
      flipped_[r] = row.rhs < 0.0;
      RowSense s = row.sense;
      if (flipped_[r] && s != RowSense::Eq) {
        s = s == RowSense::Le ? RowSense::Ge : RowSense::Le;
      }
      needs_art_[r] = s != RowSense::Le;
      if (needs_art_[r]) ++n_art_;
    }
    cols_ = n_ + n_slack_ + n_art_;
    t_.assign(m_ * (cols_ + 1), 0.0);
    basis_.assign(m_, 0);
    row_origin_col_.assign(m_, 0);

    std::size_t slack = n_, art = n_ + n_slack_;
    for (std::size_t r = 0; r < m_; ++r) {
      const auto& row = lp.rows[r];
      const double sign = flipped_[r] ? -1.0 : 1.0;
      for (const auto& [v, a] : row.coeffs) at(r, v) += sign * a;
      rhs(r) = sign * row.rhs;
      std::size_t slack_col = cols_;
      if (row.sense != RowSense::Eq) {
        slack_col = slack++;
        at(r, slack_col) = sign * (row.sense == RowSense::Le ? 1.0 : -1.0);
      }
      if (needs_art_[r]) {
        at(r, art) = 1.0;
        basis_[r] = art;
        row_origin_col_[r] = art;
        ++art;
      } else {
        basis_[r] = slack_col;
        row_origin_col_[r] = slack_col;
      }
    }
    cost_.assign(cols_, 0.0);
  }

  LpResult run(const LinearProgram& lp) {
    LpResult res;
    if (n_art_ > 0) {
      for (std::size_t c = n_ + n_slack_; c < cols_; ++c) cost_[c] = -1.0;
      const LpStatus s = optimize(1, res.iterations, true);
      (void)s;  // Phase 1 is bounded above by zero.
      double infeas = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (basis_[r] >= n_ + n_slack_) infeas += rhs(r);
      }
      double scale = 1.0;
      for (const auto& row : lp.rows) scale = std::max(scale, std::fabs(row.rhs));
      if (infeas > opts_.feasibility_tol * scale) {
        res.status = LpStatus::Infeasible;
        return res;
      }
      drive_out_artificials();
      for (std::size_t c = n_ + n_slack_; c < cols_; ++c) cost_[c] = 0.0;
    }
    for (std::size_t v = 0; v < n_; ++v) {
      cost_[v] = v < lp.objective.size() ? lp.objective[v] : 0.0;
    }
    res.status = optimize(2, res.iterations, false);
    if (res.status != LpStatus::Optimal) return res;

    res.x.assign(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) res.x[basis_[r]] = std::max(0.0, rhs(r));
    }
    res.objective = 0.0;
    for (std::size_t v = 0; v < n_; ++v) res.objective += cost_[v] * res.x[v];

    // y' = c_B B^-1; column k of B^-1 sits under the row's initial basic
    // column.
    res.duals.assign(m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      const std::size_t col = row_origin_col_[k];
      double y = 0.0;
      for (std::size_t r = 0; r < m_; ++r) y += cost_[basis_[r]] * at(r, col);
      res.duals[k] = flipped_[k] ? -y : y;
    }
    return res;
  }

 private:
  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const {
    return t_[r * (cols_ + 1) + c];
  }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double rhs(std::size_t r) const { return at(r, cols_); }

  double reduced_cost(std::size_t c) const {
    double z = 0.0;
    for (std::size_t r = 0; r < m_; ++r) z += cost_[basis_[r]] * at(r, c);
    return cost_[c] - z;
  }

  double objective_value() const {
    double z = 0.0;
    for (std::size_t r = 0; r < m_; ++r) z += cost_[basis_[r]] * rhs(r);
    return z;
  }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) {
        double& v = at(r, c);
        v -= f * at(pr, c);
        if (std::fabs(v) < 1e-14) v = 0.0;
      }
      at(r, pc) = 0.0;
    }
    basis_[pr] = pc;
  }

  LpStatus optimize(int phase, std::size_t& iterations, bool allow_art) {
    const std::size_t limit = allow_art ? cols_ : n_ + n_slack_;
    std::vector<bool> in_basis(cols_, false);
    while (true) {
      std::fill(in_basis.begin(), in_basis.end(), false);
      for (std::size_t b : basis_) in_basis[b] = true;
      // Bland: lowest-index improving column.
      std::size_t enter = cols_;
      for (std::size_t c = 0; c < limit; ++c) {
        if (in_basis[c]) continue;
        if (reduced_cost(c) > opts_.optimality_tol) {
          enter = c;
          break;
        }
      }
      if (enter == cols_) return LpStatus::Optimal;

      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = at(r, enter);
        if (a <= kPivotTol) continue;
        const double ratio = std::max(0.0, rhs(r)) / a;
        if (ratio < best - 1e-12 ||
            (std::fabs(ratio - best) <= 1e-12 && basis_[r] < basis_[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave == m_) return LpStatus::Unbounded;
      if (++iterations > opts_.max_iterations) {
        throw LpError("simplex iteration cap reached", objective_value(),
                      std::numeric_limits<double>::infinity());
      }
      pivot(leave, enter);
      if (opts_.trace) {
        *opts_.trace << phase << ',' << iterations << ',' << objective_value()
                     << ',' << enter << '\n';
      }
    }
  }

  // Artificials left basic at zero after phase 1 are pivoted onto any
  // non-artificial column with a nonzero entry; rows with none are
  // redundant and keep the artificial, which is barred from re-entering.
  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_ + n_slack_) continue;
      for (std::size_t c = 0; c < n_ + n_slack_; ++c) {
        if (std::fabs(at(r, c)) > 1e-9) {
          pivot(r, c);
          break;
        }
      }
    }
  }

  const SimplexOptions& opts_;
  std::size_t m_, n_;
  std::size_t n_slack_ = 0, n_art_ = 0, cols_ = 0;
  std::vector<double> t_;
  std::vector<double> cost_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> row_origin_col_;
  std::vector<bool> flipped_;
  std::vector<bool> needs_art_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opts) {
  for (const auto& row : lp.rows) {
    for (const auto& [v, a] : row.coeffs) {
      if (v >= lp.num_vars || !std::isfinite(a)) {
        throw LpError("malformed linear program row", 0.0, 0.0);
      }
    }
  }
  Tableau t(lp, opts);
  return t.run(lp);
}

}  // namespace mba
