#include "rulescope/lp_solver.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "rulescope/error.h"

namespace rulescope::lp {

std::size_t Problem::AddVariable(double cost_coef, double lo, double hi) {
  cost.push_back(cost_coef);
  lower.push_back(lo);
  upper.push_back(hi);
  return cost.size() - 1;
}

namespace {

enum class VarState : std::uint8_t { kBasic, kLower, kUpper };

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const Problem& problem, const Options& options)
      : problem_(problem), options_(options) {}

  Solution Run();

 private:
  enum class PhaseResult { kOptimal, kUnbounded };

  void Build();
  void Refactor();
  void RecomputeBasicValues();
  PhaseResult RunPhase(const std::vector<double>& cost);
  double Objective(const std::vector<double>& cost) const;
  std::vector<double> Incumbent() const {
    return {x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(num_structural_)};
  }
  [[noreturn]] void Fail(const std::string& why) const {
    throw SolverError("LP solver: " + why, Incumbent());
  }
  double ColumnDot(std::size_t j, const Eigen::VectorXd& y) const {
    double sum = 0.0;
    for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) sum += val_[e] * y[row_[e]];
    return sum;
  }
  Solution Certify();
  void Pivot(std::size_t r, std::size_t q, const Eigen::VectorXd& alpha, bool to_lower);
  void Perturb();
  void RemovePerturbation(const std::vector<double>& cost);
  void DualCleanup(const std::vector<double>& cost);

  const Problem& problem_;
  const Options& options_;

  std::size_t num_rows_ = 0;
  std::size_t num_structural_ = 0;
  std::size_t num_columns_ = 0;
  std::vector<std::size_t> col_start_;
  std::vector<Eigen::Index> row_;
  std::vector<double> val_;
  Eigen::VectorXd b_;
  std::vector<double> lo_, up_;
  std::vector<double> x_;
  std::vector<VarState> state_;
  std::vector<std::size_t> basis_;
  RowMajorMatrix binv_;
  std::size_t iterations_ = 0;
  std::size_t pivots_since_refactor_ = 0;
  std::vector<std::size_t> artificials_;
  bool perturbed_ = false;
  std::vector<double> saved_lo_, saved_up_;
  std::mt19937_64 rng_{0x5eed};
};

void Simplex::Build() {
  num_rows_ = problem_.rows.size();
  num_structural_ = problem_.num_variables();
  if (problem_.lower.size() != num_structural_ || problem_.upper.size() != num_structural_) {
    throw ValidationError("LP bound vectors do not match the number of variables");
  }
  for (std::size_t j = 0; j < num_structural_; ++j) {
    if (!std::isfinite(problem_.lower[j]) || problem_.upper[j] < problem_.lower[j]) {
      throw ValidationError("LP variable " + std::to_string(j) + " has invalid bounds");
    }
  }

  // Column-wise copy; >= rows are negated so every row reads a.x + s = b.
  std::vector<std::vector<std::pair<Eigen::Index, double>>> columns(num_structural_);
  b_.resize(static_cast<Eigen::Index>(num_rows_));
  for (std::size_t i = 0; i < num_rows_; ++i) {
    const Row& row = problem_.rows[i];
    const double sign = row.type == RowType::kGreaterEqual ? -1.0 : 1.0;
    b_[static_cast<Eigen::Index>(i)] = sign * row.rhs;
    for (const auto& [var, coef] : row.terms) {
      if (var >= num_structural_) throw ValidationError("LP row references unknown variable");
      if (coef != 0.0) columns[var].emplace_back(static_cast<Eigen::Index>(i), sign * coef);
    }
  }
  col_start_.assign(1, 0);
  auto push_column = [&](const std::vector<std::pair<Eigen::Index, double>>& entries) {
    for (const auto& [r, v] : entries) {
      row_.push_back(r);
      val_.push_back(v);
    }
    col_start_.push_back(row_.size());
  };
  for (auto& column : columns) {
    std::sort(column.begin(), column.end());
    // Merge duplicate terms for the same row.
    std::vector<std::pair<Eigen::Index, double>> merged;
    for (const auto& entry : column) {
      if (!merged.empty() && merged.back().first == entry.first) {
        merged.back().second += entry.second;
      } else {
        merged.push_back(entry);
      }
    }
    push_column(merged);
  }
  lo_ = problem_.lower;
  up_ = problem_.upper;
  x_ = lo_;
  state_.assign(num_structural_, VarState::kLower);

  for (std::size_t i = 0; i < num_rows_; ++i) {
    push_column({{static_cast<Eigen::Index>(i), 1.0}});
    lo_.push_back(0.0);
    up_.push_back(problem_.rows[i].type == RowType::kEqual ? 0.0 : kInfinity);
    x_.push_back(0.0);
    state_.push_back(VarState::kLower);
  }

  Eigen::VectorXd activity = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_rows_));
  for (std::size_t j = 0; j < num_structural_; ++j) {
    for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) {
      activity[row_[e]] += val_[e] * x_[j];
    }
  }
  basis_.resize(num_rows_);
  std::vector<double> diag(num_rows_, 1.0);
  for (std::size_t i = 0; i < num_rows_; ++i) {
    const double residual = b_[static_cast<Eigen::Index>(i)] - activity[static_cast<Eigen::Index>(i)];
    const std::size_t slack = num_structural_ + i;
    if (residual >= -options_.primal_tolerance &&
        residual <= up_[slack] + options_.primal_tolerance) {
      basis_[i] = slack;
      state_[slack] = VarState::kBasic;
      x_[slack] = residual;
      continue;
    }
    const double sigma = residual > 0.0 ? 1.0 : -1.0;
    push_column({{static_cast<Eigen::Index>(i), sigma}});
    artificials_.push_back(lo_.size());
    basis_[i] = lo_.size();
    diag[i] = sigma;
    lo_.push_back(0.0);
    up_.push_back(kInfinity);
    x_.push_back(std::abs(residual));
    state_.push_back(VarState::kBasic);
  }
  num_columns_ = lo_.size();
  binv_ = RowMajorMatrix::Zero(static_cast<Eigen::Index>(num_rows_),
                               static_cast<Eigen::Index>(num_rows_));
  for (std::size_t i = 0; i < num_rows_; ++i) {
    binv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
  }
}

void Simplex::Refactor() {
  const auto m = static_cast<Eigen::Index>(num_rows_);
  if (m == 0) return;
  Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const std::size_t j = basis_[static_cast<std::size_t>(k)];
    for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) {
      basis_matrix(row_[e], k) = val_[e];
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
  binv_ = lu.inverse();
  if (!binv_.allFinite()) Fail("basis became singular");
  pivots_since_refactor_ = 0;
  RecomputeBasicValues();
}

void Simplex::RecomputeBasicValues() {
  Eigen::VectorXd rhs = b_;
  for (std::size_t j = 0; j < num_columns_; ++j) {
    if (state_[j] == VarState::kBasic || x_[j] == 0.0) continue;
    for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) {
      rhs[row_[e]] -= val_[e] * x_[j];
    }
  }
  const Eigen::VectorXd xb = binv_ * rhs;
  for (std::size_t k = 0; k < num_rows_; ++k) x_[basis_[k]] = xb[static_cast<Eigen::Index>(k)];
}

double Simplex::Objective(const std::vector<double>& cost) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < num_columns_; ++j) sum += cost[j] * x_[j];
  return sum;
}

Simplex::PhaseResult Simplex::RunPhase(const std::vector<double>& cost) {
  const auto m = static_cast<Eigen::Index>(num_rows_);
  const double tol_p = options_.primal_tolerance;
  const double tol_d = options_.dual_tolerance;
  const double tol_piv = options_.pivot_tolerance;
  double objective = Objective(cost);
  double best = objective;
  std::size_t stall = 0;
  bool bland = false;
  Eigen::VectorXd cb(m);
  Eigen::VectorXd alpha(m);

  while (true) {
    for (Eigen::Index k = 0; k < m; ++k) cb[k] = cost[basis_[static_cast<std::size_t>(k)]];
    const Eigen::VectorXd y = binv_.transpose() * cb;

    // Pricing: Dantzig, or smallest eligible index under Bland's rule.
    std::size_t entering = num_columns_;
    double best_score = 0.0;
    double entering_d = 0.0;
    for (std::size_t j = 0; j < num_columns_; ++j) {
      if (state_[j] == VarState::kBasic || lo_[j] == up_[j]) continue;
      const double d = cost[j] - ColumnDot(j, y);
      const bool eligible = (state_[j] == VarState::kLower && d < -tol_d) ||
                            (state_[j] == VarState::kUpper && d > tol_d);
      if (!eligible) continue;
      if (bland) {
        entering = j;
        entering_d = d;
        break;
      }
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        entering = j;
        entering_d = d;
      }
    }
    if (entering == num_columns_) {
      if (perturbed_) {
        RemovePerturbation(cost);
        objective = best = Objective(cost);
        stall = 0;
        bland = false;
        continue;
      }
      if (pivots_since_refactor_ > 0) {
        Refactor();
        objective = Objective(cost);
        continue;
      }
      return PhaseResult::kOptimal;
    }
    if (++iterations_ > options_.max_iterations) Fail("iteration limit exceeded");

    const std::size_t q = entering;
    const double dir = state_[q] == VarState::kLower ? 1.0 : -1.0;
    alpha.setZero();
    for (std::size_t e = col_start_[q]; e < col_start_[q + 1]; ++e) {
      alpha.noalias() += val_[e] * binv_.col(row_[e]);
    }

    // Ratio test (Harris two-pass; exact minimum under Bland).
    auto exact_ratio = [&](Eigen::Index k, double a) {
      const std::size_t j = basis_[static_cast<std::size_t>(k)];
      const double r = a > 0.0 ? (x_[j] - lo_[j]) / a : (up_[j] - x_[j]) / (-a);
      return std::max(r, 0.0);
    };
    const double relax = bland ? 0.0 : tol_p;
    double theta_max = kInfinity;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double a = dir * alpha[k];
      if (std::abs(a) <= tol_piv) continue;
      const std::size_t j = basis_[static_cast<std::size_t>(k)];
      if (a > 0.0) {
        theta_max = std::min(theta_max, (x_[j] - lo_[j] + relax) / a);
      } else if (std::isfinite(up_[j])) {
        theta_max = std::min(theta_max, (up_[j] - x_[j] + relax) / (-a));
      }
    }
    Eigen::Index leaving = -1;
    double theta = kInfinity;
    if (std::isfinite(theta_max)) {
      theta_max = std::max(theta_max, 0.0);
      double best_pivot = 0.0;
      std::size_t best_index = num_columns_;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double a = dir * alpha[k];
        if (std::abs(a) <= tol_piv) continue;
        const std::size_t j = basis_[static_cast<std::size_t>(k)];
        if (a < 0.0 && !std::isfinite(up_[j])) continue;
        const double r = exact_ratio(k, a);
        if (bland) {
          if (r <= theta_max + 1e-12 && j < best_index) {
            best_index = j;
            leaving = k;
            theta = r;
          }
        } else if (r <= theta_max && std::abs(a) > best_pivot) {
          best_pivot = std::abs(a);
          leaving = k;
          theta = r;
        }
      }
    }
    const double range = up_[q] - lo_[q];
    const bool flip = range <= theta || (leaving < 0 && std::isfinite(range));
    if (flip) theta = range;
    if (!std::isfinite(theta)) return PhaseResult::kUnbounded;

    const double step = dir * theta;
    if (step != 0.0) {
      for (Eigen::Index k = 0; k < m; ++k) {
        if (alpha[k] != 0.0) x_[basis_[static_cast<std::size_t>(k)]] -= step * alpha[k];
      }
    }
    objective += entering_d * step;

    if (flip) {
      x_[q] = state_[q] == VarState::kLower ? up_[q] : lo_[q];
      state_[q] = state_[q] == VarState::kLower ? VarState::kUpper : VarState::kLower;
    } else {
      const bool to_lower = dir * alpha[leaving] > 0.0;
      Pivot(static_cast<std::size_t>(leaving), q, alpha, to_lower);
      x_[q] += step;
      if (pivots_since_refactor_ >= options_.refactor_interval) {
        Refactor();
        objective = Objective(cost);
      }
    }

    if (objective < best - 1e-12 * (1.0 + std::abs(best))) {
      best = objective;
      stall = 0;
    } else if (++stall > options_.stall_limit) {
      // Degenerate vertex: perturb the bounds once; if that still stalls,
      // fall back to Bland's rule.
      if (!perturbed_) {
        Perturb();
        objective = best = Objective(cost);
      } else {
        bland = true;
      }
      stall = 0;
    }
  }
}

void Simplex::Pivot(std::size_t r, std::size_t q, const Eigen::VectorXd& alpha, bool to_lower) {
  const std::size_t out = basis_[r];
  x_[out] = to_lower ? lo_[out] : up_[out];
  state_[out] = to_lower ? VarState::kLower : VarState::kUpper;
  state_[q] = VarState::kBasic;
  basis_[r] = q;
  const auto leaving = static_cast<Eigen::Index>(r);
  binv_.row(leaving) /= alpha[leaving];
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (k != leaving && alpha[k] != 0.0) binv_.row(k).noalias() -= alpha[k] * binv_.row(leaving);
  }
  ++pivots_since_refactor_;
}

void Simplex::Perturb() {
  saved_lo_ = lo_;
  saved_up_ = up_;
  std::uniform_real_distribution<double> unit(0.5, 1.0);
  for (std::size_t j = 0; j < num_columns_; ++j) {
    if (lo_[j] == up_[j]) continue;
    lo_[j] -= options_.perturbation * (1.0 + std::abs(lo_[j])) * unit(rng_);
    if (std::isfinite(up_[j])) up_[j] += options_.perturbation * (1.0 + std::abs(up_[j])) * unit(rng_);
    if (state_[j] == VarState::kLower) x_[j] = lo_[j];
    if (state_[j] == VarState::kUpper) x_[j] = up_[j];
  }
  perturbed_ = true;
  Refactor();
}

void Simplex::RemovePerturbation(const std::vector<double>& cost) {
  lo_ = saved_lo_;
  up_ = saved_up_;
  for (std::size_t j = 0; j < num_columns_; ++j) {
    if (state_[j] == VarState::kLower) x_[j] = lo_[j];
    if (state_[j] == VarState::kUpper) x_[j] = up_[j];
  }
  perturbed_ = false;
  Refactor();
  DualCleanup(cost);
}

// Bounded dual simplex: the basis is dual feasible, only small primal
// violations left by removing the perturbation need repair.
void Simplex::DualCleanup(const std::vector<double>& cost) {
  const auto m = static_cast<Eigen::Index>(num_rows_);
  const double tol_p = options_.primal_tolerance;
  const double tol_piv = options_.pivot_tolerance;
  Eigen::VectorXd cb(m);
  Eigen::VectorXd alpha(m);
  while (true) {
    Eigen::Index r = -1;
    double worst = tol_p;
    for (Eigen::Index k = 0; k < m; ++k) {
      const std::size_t j = basis_[static_cast<std::size_t>(k)];
      const double v = std::max(lo_[j] - x_[j], x_[j] - up_[j]);
      if (v > worst) {
        worst = v;
        r = k;
      }
    }
    if (r < 0) return;
    if (++iterations_ > options_.max_iterations) Fail("iteration limit exceeded");
    const std::size_t p = basis_[static_cast<std::size_t>(r)];
    const bool below = x_[p] < lo_[p];
    const double target = below ? lo_[p] : up_[p];

    for (Eigen::Index k = 0; k < m; ++k) cb[k] = cost[basis_[static_cast<std::size_t>(k)]];
    const Eigen::VectorXd y = binv_.transpose() * cb;
    const Eigen::VectorXd rho = binv_.row(r).transpose();

    std::size_t q = num_columns_;
    double best_ratio = kInfinity;
    double best_pivot = 0.0;
    for (std::size_t j = 0; j < num_columns_; ++j) {
      if (state_[j] == VarState::kBasic || lo_[j] == up_[j]) continue;
      const double a = ColumnDot(j, rho);
      if (std::abs(a) <= tol_piv) continue;
      // Moving x_j by t changes x_p by -a t.
      const bool up_move = state_[j] == VarState::kLower;
      const bool helps = below ? (up_move ? a < 0.0 : a > 0.0) : (up_move ? a > 0.0 : a < 0.0);
      if (!helps) continue;
      const double d = cost[j] - ColumnDot(j, y);
      const double ratio = std::abs(d) / std::abs(a);
      if (ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 && std::abs(a) > best_pivot)) {
        best_ratio = std::min(ratio, best_ratio);
        best_pivot = std::abs(a);
        q = j;
      }
    }
    if (q == num_columns_) Fail("problem is infeasible");

    alpha.setZero();
    for (std::size_t e = col_start_[q]; e < col_start_[q + 1]; ++e) {
      alpha.noalias() += val_[e] * binv_.col(row_[e]);
    }
    const double t = (x_[p] - target) / alpha[r];
    for (Eigen::Index k = 0; k < m; ++k) {
      if (alpha[k] != 0.0) x_[basis_[static_cast<std::size_t>(k)]] -= t * alpha[k];
    }
    x_[q] += t;
    Pivot(static_cast<std::size_t>(r), q, alpha, below);
    if (pivots_since_refactor_ >= options_.refactor_interval) Refactor();
  }
}

Solution Simplex::Certify() {
  Refactor();
  // Clamp tiny bound violations of basic variables left by the relaxed
  // ratio test; the primal check below measures what that costs.
  Solution solution;
  solution.x = Incumbent();
  for (std::size_t j = 0; j < num_structural_; ++j) {
    solution.x[j] = std::clamp(solution.x[j], problem_.lower[j], problem_.upper[j]);
  }
  double violation = 0.0;
  for (const Row& row : problem_.rows) {
    double activity = 0.0;
    for (const auto& [var, coef] : row.terms) activity += coef * solution.x[var];
    const double scale = 1.0 + std::abs(row.rhs);
    double v = 0.0;
    if (row.type != RowType::kGreaterEqual) v = std::max(v, activity - row.rhs);
    if (row.type != RowType::kLessEqual) v = std::max(v, row.rhs - activity);
    violation = std::max(violation, v / scale);
  }
  solution.max_violation = violation;
  if (violation > 1e-7) Fail("primal solution violates constraints by " + std::to_string(violation));

  double objective = 0.0;
  for (std::size_t j = 0; j < num_structural_; ++j) objective += problem_.cost[j] * solution.x[j];
  solution.objective = objective;

  // Lagrangian bound from the final duals: valid for any y, tight at optimum.
  const auto m = static_cast<Eigen::Index>(num_rows_);
  Eigen::VectorXd cb(m);
  auto cost_of = [&](std::size_t j) { return j < num_structural_ ? problem_.cost[j] : 0.0; };
  for (Eigen::Index k = 0; k < m; ++k) cb[k] = cost_of(basis_[static_cast<std::size_t>(k)]);
  const Eigen::VectorXd y = binv_.transpose() * cb;
  double bound = y.dot(b_);
  for (std::size_t j = 0; j < num_columns_; ++j) {
    const double d = cost_of(j) - ColumnDot(j, y);
    if (d >= 0.0) {
      bound += d * lo_[j];
    } else if (std::isfinite(up_[j])) {
      bound += d * up_[j];
    } else if (d < -options_.dual_tolerance) {
      Fail("optimality certificate failed: unbounded dual direction");
    }
  }
  solution.dual_bound = bound;
  if (objective - bound > options_.certification_gap) {
    Fail("optimality gap " + std::to_string(objective - bound) + " exceeds tolerance");
  }
  solution.iterations = iterations_;
  return solution;
}

Solution Simplex::Run() {
  Build();
  if (!artificials_.empty()) {
    std::vector<double> phase1(num_columns_, 0.0);
    for (std::size_t j : artificials_) phase1[j] = 1.0;
    if (RunPhase(phase1) == PhaseResult::kUnbounded) Fail("phase 1 reported unbounded");
    double infeasibility = 0.0;
    for (std::size_t j : artificials_) infeasibility += x_[j];
    if (infeasibility > 1e-7 * (1.0 + b_.lpNorm<Eigen::Infinity>())) {
      Fail("problem is infeasible");
    }
    for (std::size_t j : artificials_) {
      up_[j] = 0.0;
      if (state_[j] != VarState::kBasic) {
        x_[j] = 0.0;
        state_[j] = VarState::kLower;
      }
    }
    Refactor();
  }
  std::vector<double> phase2(num_columns_, 0.0);
  std::copy(problem_.cost.begin(), problem_.cost.end(), phase2.begin());
  if (RunPhase(phase2) == PhaseResult::kUnbounded) Fail("problem is unbounded");
  return Certify();
}

}  // namespace

Solution Solve(const Problem& problem, const Options& options) {
  Simplex simplex(problem, options);
  return simplex.Run();
}

}  // namespace rulescope::lp
