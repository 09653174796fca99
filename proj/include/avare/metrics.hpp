#pragma once

// Per-step cost of a sampling distribution, dynamic regret against the
// per-step optimum, relative error, log-log growth fits, seed aggregation.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "avare/core.hpp"
#include "avare/problems.hpp"
#include "avare/simplex_opt.hpp"

namespace avare {

// Per-step trace of one run. Columns are parallel arrays of length steps();
// metrics that were not computed hold NaN.
struct RunRecord {
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  std::size_t n = 0;
  std::size_t batch = 1;
  bool full_metrics = false;

  std::vector<std::uint64_t> t;
  std::vector<double> alpha;
  std::vector<double> eps;
  std::vector<double> cost;
  std::vector<double> opt_cost;
  std::vector<double> cum_regret;
  std::vector<double> subopt;
  std::vector<double> rel_err;
  std::vector<double> dx_norm;
  // batch entries per step, only when index recording is enabled.
  std::vector<std::uint32_t> indices;

  // Not serialized: files must not depend on timing.
  double wall_seconds = 0;

  std::size_t steps() const noexcept { return t.size(); }
  void reserve(std::size_t steps);
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// sum_i norms_i^2 / p_i. Throws std::domain_error when some positive norm
/// has zero probability.
template <typename DerivedP, typename DerivedA>
typename DerivedA::Scalar cost(const Eigen::MatrixBase<DerivedP>& p,
                               const Eigen::MatrixBase<DerivedA>& norms) {
  if (p.size() != norms.size()) throw std::invalid_argument("cost: size mismatch");
  const auto c = restricted_objective(norms, p);
  if (!(c < std::numeric_limits<decltype(c)>::infinity())) {
    throw std::domain_error("cost: zero probability on an index with positive norm");
  }
  return c;
}

/// Running sum of cost - optimum. Needs a full-metrics record.
std::vector<double> dynamic_regret(const RunRecord& record);

/// (cost - opt) / opt per step; absent where the optimum is zero.
std::vector<std::optional<double>> relative_error(const RunRecord& record);

struct Table1Ratios {
  // N max_i L_i / sum_i L_i
  double smoothness = 0;
  // N sum_i |g_i*|^2 / (sum_i |g_i*|)^2
  double variance = 0;
};

/// Both ratios at a given point (normally the minimizer).
template <typename Scalar>
Table1Ratios table1_ratios_at(const FiniteSumProblem<Scalar>& prob, const Vector<Scalar>& x) {
  const Vector<Scalar> l = prob.smoothness_all();
  const Vector<Scalar> g = prob.gradient_norms(x);
  const auto n = static_cast<double>(prob.size());
  Table1Ratios out;
  out.smoothness = n * static_cast<double>(l.maxCoeff()) / static_cast<double>(l.sum());
  const double s = static_cast<double>(g.sum());
  out.variance = s > 0 ? n * static_cast<double>(g.squaredNorm()) / (s * s) : 1.0;
  return out;
}

template <typename Scalar>
Table1Ratios table1_ratios(const FiniteSumProblem<Scalar>& prob,
                           MinimizerOptions options = MinimizerOptions{}) {
  return table1_ratios_at(prob, solve_minimizer(prob, options));
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  std::size_t points = 0;
  // False when too few strictly positive values remained to fit.
  bool defined = false;
};

/// Least squares fit of log y against log x over pairs with x, y > 0.
LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Slope of log cumulative regret against log t after discarding the first
/// burn_in fraction of steps. Throws when fewer than 100 points remain; the
/// fit is flagged undefined when the regret is identically zero.
LineFit regret_slope(const std::vector<std::uint64_t>& t, const std::vector<double>& cum_regret,
                     double burn_in);
LineFit regret_slope(const RunRecord& record, double burn_in);

// Mean and sample standard deviation over seeds, step by step. NaN entries are
// skipped; a step where every seed is NaN stays NaN.
struct AggregateColumn {
  std::vector<double> mean;
  std::vector<double> std;
};

struct AggregateTrace {
  std::vector<std::uint64_t> t;
  // t m / N
  std::vector<double> passes;
  std::size_t seeds = 0;
  AggregateColumn alpha, eps, cost, opt_cost, cum_regret, subopt, rel_err, dx_norm;
};

AggregateTrace aggregate(const std::vector<RunRecord>& records);

}  // namespace avare
