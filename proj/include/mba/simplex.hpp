#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

namespace mba {

enum class RowSense { Le, Ge, Eq };

/// maximize c'x subject to rows, x >= 0.
struct LinearProgram {
  struct Row {
    std::vector<std::pair<std::size_t, double>> coeffs;  // (variable, a)
    RowSense sense = RowSense::Le;
    double rhs = 0.0;
  };

  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<Row> rows;

  /// Appends a row and returns its index.
  std::size_t add_row(std::vector<std::pair<std::size_t, double>> coeffs,
                      RowSense sense, double rhs);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-7;
  std::size_t max_iterations = 200'000;
  /// When set, one CSV line (phase, iteration, objective, entering) is
  /// written per pivot.
  std::ostream* trace = nullptr;
};

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  std::vector<double> x;
  /// Row duals y with c - A'y <= 0 on columns at optimality; y >= 0 on Le
  /// rows and y <= 0 on Ge rows.
  std::vector<double> duals;
  std::size_t iterations = 0;
};

/// Dense two-phase primal simplex with Bland's rule. Throws LpError when
/// the iteration cap is reached.
LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace mba
