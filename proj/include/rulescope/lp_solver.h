#ifndef RULESCOPE_LP_SOLVER_H_
#define RULESCOPE_LP_SOLVER_H_

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace rulescope::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RowType { kLessEqual, kGreaterEqual, kEqual };

struct Row {
  std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
  RowType type = RowType::kLessEqual;
  double rhs = 0.0;
};

// minimize cost . x  subject to rows and lower <= x <= upper.
// Lower bounds must be finite; upper bounds may be +inf.
struct Problem {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Row> rows;

  std::size_t AddVariable(double cost_coef, double lo, double hi);
  std::size_t num_variables() const { return cost.size(); }
};

struct Options {
  std::size_t max_iterations = 200000;
  std::size_t refactor_interval = 256;
  double primal_tolerance = 1e-9;
  double dual_tolerance = 1e-10;
  double pivot_tolerance = 1e-9;
  // Accepted gap between the primal objective and the Lagrangian bound.
  double certification_gap = 1e-6;
  // Non-improving iterations before the bounds are perturbed (and, if that
  // does not help, before switching to Bland's rule).
  std::size_t stall_limit = 300;
  // Relative size of the random bound perturbation.
  double perturbation = 1e-6;
};

struct Solution {
  std::vector<double> x;
  double objective = 0.0;
  double dual_bound = 0.0;  // certified lower bound on the optimum
  double max_violation = 0.0;
  std::size_t iterations = 0;
};

// Two-phase bounded-variable revised simplex on a dense basis inverse.
// Throws SolverError on iteration limit, infeasibility, unboundedness or a
// failed optimality certificate.
Solution Solve(const Problem& problem, const Options& options = {});

}  // namespace rulescope::lp

#endif  // RULESCOPE_LP_SOLVER_H_
