#pragma once

// Variance-minimizing distributions over the eps-restricted simplex
//   Delta(eps) = { p : p_i >= eps, sum p_i = 1 },
// i.e. the minimizer of sum_i a_i^2 / p_i for non-negative weights a.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "avare/core.hpp"

namespace avare {

template <typename Scalar>
struct SimplexSolution {
  // Number of indices that receive a_i / lambda; the remaining N - rho sit at eps.
  std::size_t rho = 0;
  // Zero only for the all-zero weight vector, where p is uniform.
  Scalar lambda = 0;
  Vector<Scalar> p;
};

namespace detail {

// Weights are ranked by decreasing value, ties broken by ascending index.
template <typename Derived>
struct RankBefore {
  const Eigen::MatrixBase<Derived>& a;
  bool operator()(std::size_t i, std::size_t j) const {
    const auto ai = a(static_cast<Eigen::Index>(i));
    const auto aj = a(static_cast<Eigen::Index>(j));
    return ai > aj || (ai == aj && i < j);
  }
};

template <typename Derived>
std::vector<std::size_t> decreasing_order(const Eigen::MatrixBase<Derived>& a) {
  std::vector<std::size_t> order(static_cast<std::size_t>(a.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), RankBefore<Derived>{a});
  return order;
}

// The rank-r threshold test: key * (1 - (N - r) eps) >= eps * prefix_r, where
// key is the r-th largest weight and prefix_r the sum of the r largest. It
// holds for every r <= rho and fails for every r > rho. All solvers in the
// library evaluate this exact expression so their decisions agree bitwise
// when fed identical prefix sums.
template <typename Scalar>
bool threshold_holds(Scalar key, Scalar prefix, std::size_t r, std::size_t n, Scalar eps) {
  return (Scalar(1) - static_cast<Scalar>(n - r) * eps) * key >= eps * prefix;
}

template <typename Scalar>
Scalar normalizer(Scalar prefix, std::size_t rho, std::size_t n, Scalar eps) {
  return prefix / (Scalar(1) - static_cast<Scalar>(n - rho) * eps);
}

template <typename Derived>
SimplexSolution<typename Derived::Scalar> uniform_solution(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  SimplexSolution<Scalar> sol;
  sol.rho = static_cast<std::size_t>(a.size());
  sol.lambda = 0;
  sol.p = Vector<Scalar>::Constant(a.size(), Scalar(1) / static_cast<Scalar>(a.size()));
  return sol;
}

template <typename Derived, typename InHead>
SimplexSolution<typename Derived::Scalar> assemble(const Eigen::MatrixBase<Derived>& a,
                                                   typename Derived::Scalar eps, std::size_t rho,
                                                   typename Derived::Scalar prefix,
                                                   InHead&& in_head) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<std::size_t>(a.size());
  SimplexSolution<Scalar> sol;
  sol.rho = rho;
  sol.lambda = normalizer(prefix, rho, n, eps);
  sol.p.resize(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sol.p(i) = in_head(static_cast<std::size_t>(i)) ? a(i) / sol.lambda : eps;
  }
  return sol;
}

}  // namespace detail

/// Sum_i a_i^2 / p_i with the convention 0/0 = 0. Returns +inf when some
/// positive weight has zero probability.
template <typename DerivedA, typename DerivedP>
typename DerivedA::Scalar restricted_objective(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedP>& p) {
  using Scalar = typename DerivedA::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) == 0) continue;
    if (p(i) <= 0) return std::numeric_limits<Scalar>::infinity();
    total += a(i) * a(i) / p(i);
  }
  return total;
}

/// Closed-form minimizer over Delta(eps) in expected O(N) time.
///
/// Locates the threshold rank with a quickselect-style partition search
/// instead of sorting: the threshold test is monotone in rank, so each
/// partition step discards the half that cannot contain rho. All-zero
/// weights yield the uniform distribution.
template <typename Derived>
SimplexSolution<typename Derived::Scalar> solve_restricted(const Eigen::MatrixBase<Derived>& a,
                                                           typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  detail::require_weights(a, "solve_restricted");
  const auto n = static_cast<std::size_t>(a.size());
  detail::require_eps(eps, n, "solve_restricted");
  if ((a.array() == Scalar(0)).all()) return detail::uniform_solution(a);

  const detail::RankBefore<Derived> before{a};
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  // idx[0, lo) holds exactly the top-lo weights, idx[hi, n) only weights ranked
  // below everything in idx[lo, hi). head_sum is the sum over idx[0, lo).
  std::size_t lo = 0;
  std::size_t hi = n;
  Scalar head_sum = 0;
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  while (lo < hi) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    const std::size_t pick = lo + static_cast<std::size_t>((state >> 33) % (hi - lo));
    std::swap(idx[pick], idx[hi - 1]);
    const std::size_t pivot = idx[hi - 1];
    const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                    idx.begin() + static_cast<std::ptrdiff_t>(hi - 1),
                                    [&](std::size_t i) { return before(i, pivot); });
    const auto split = static_cast<std::size_t>(mid - idx.begin());
    std::swap(idx[split], idx[hi - 1]);

    Scalar left_sum = 0;
    for (std::size_t k = lo; k < split; ++k) left_sum += a(static_cast<Eigen::Index>(idx[k]));
    const Scalar pivot_value = a(static_cast<Eigen::Index>(pivot));
    const Scalar prefix = head_sum + left_sum + pivot_value;
    const std::size_t rank = split + 1;
    if (detail::threshold_holds(pivot_value, prefix, rank, n, eps)) {
      head_sum = prefix;
      lo = split + 1;
    } else {
      hi = split;
    }
  }

  std::size_t rho = lo;
  if (rho == 0) {
    // Rounding can fail the rank-1 test at eps = 1/N; rho >= 1 exactly.
    const auto top = *std::min_element(idx.begin(), idx.end(), before);
    idx[0] = top;
    head_sum = a(static_cast<Eigen::Index>(top));
    rho = 1;
  }
  std::vector<char> head(n, 0);
  for (std::size_t k = 0; k < rho; ++k) head[idx[k]] = 1;
  return detail::assemble(a, eps, rho, head_sum, [&](std::size_t i) { return head[i] != 0; });
}

/// Sort-based O(N log N) implementation: full decreasing sort, linear scan
/// for the first rank failing the threshold test, direct evaluation.
template <typename Derived>
SimplexSolution<typename Derived::Scalar> solve_restricted_reference(
    const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  detail::require_weights(a, "solve_restricted_reference");
  const auto n = static_cast<std::size_t>(a.size());
  detail::require_eps(eps, n, "solve_restricted_reference");
  if ((a.array() == Scalar(0)).all()) return detail::uniform_solution(a);

  const auto order = detail::decreasing_order(a);
  std::vector<Scalar> prefix(n + 1, Scalar(0));
  for (std::size_t r = 1; r <= n; ++r) {
    prefix[r] = prefix[r - 1] + a(static_cast<Eigen::Index>(order[r - 1]));
  }
  std::size_t rho = n;
  for (std::size_t r = 1; r <= n; ++r) {
    if (!detail::threshold_holds(Scalar(a(static_cast<Eigen::Index>(order[r - 1]))), prefix[r],
                                 r, n, eps)) {
      rho = std::max<std::size_t>(r - 1, 1);
      break;
    }
  }
  std::vector<char> head(n, 0);
  for (std::size_t r = 0; r < rho; ++r) head[order[r]] = 1;
  return detail::assemble(a, eps, rho, prefix[rho], [&](std::size_t i) { return head[i] != 0; });
}

/// Optimality certificate for a restricted-simplex solution.
///
/// Rebuilds the multipliers nu = lambda^2, mu_i = 0 on the top-rho indices and
/// mu_i = nu - a_i^2 / eps^2 elsewhere, then checks stationarity (in the
/// division-free form p_i^2 (nu - mu_i) = a_i^2), complementary slackness,
/// primal and dual feasibility. Residuals are scaled by the natural magnitude
/// of each condition and compared against tol.
template <typename Derived>
bool verify_kkt(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar eps,
                const SimplexSolution<typename Derived::Scalar>& sol, double tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<std::size_t>(a.size());
  if (sol.p.size() != a.size() || n == 0) return false;

  // Primal feasibility.
  if (std::abs(static_cast<double>(sol.p.sum() - Scalar(1))) > tol) return false;
  for (Eigen::Index i = 0; i < sol.p.size(); ++i) {
    if (static_cast<double>(sol.p(i) - eps) < -tol) return false;
  }
  if ((a.array() == Scalar(0)).all()) return true;  // objective is identically zero
  if (sol.rho < 1 || sol.rho > n || !(sol.lambda > 0)) return false;

  const auto order = detail::decreasing_order(a);
  const Scalar nu = sol.lambda * sol.lambda;
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(order[r]);
    const Scalar ai = a(i);
    const Scalar pi = sol.p(i);
    Scalar mu = 0;
    if (r >= sol.rho) {
      if (eps == 0) return false;  // every index must be in the head when eps = 0
      mu = nu - ai * ai / (eps * eps);
    }
    const double scale = std::max(1.0, static_cast<double>(nu));
    // Dual feasibility.
    if (static_cast<double>(mu) < -tol * scale) return false;
    // Stationarity, measured against the size of the terms that cancel.
    const double magnitude =
        std::max({1.0, static_cast<double>(ai * ai), static_cast<double>(pi * pi * nu)});
    if (std::abs(static_cast<double>(pi * pi * (nu - mu) - ai * ai)) > tol * magnitude) {
      return false;
    }
    // Complementary slackness.
    if (std::abs(static_cast<double>(mu * (pi - eps))) > tol * scale) return false;
  }
  return true;
}

/// Minimum of sum a_i^2 / p_i over the full simplex: (sum a_i)^2.
template <typename Derived>
typename Derived::Scalar optimal_cost_full_simplex(const Eigen::MatrixBase<Derived>& a) {
  const auto s = a.sum();
  return s * s;
}

/// Upper bound 6 eps N (sum a)^2 on the cost of restricting the simplex to
/// Delta(eps); valid for eps <= 1/(2N).
template <typename Derived>
typename Derived::Scalar restriction_gap_bound(const Eigen::MatrixBase<Derived>& a,
                                               typename Derived::Scalar eps) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<Scalar>(a.size());
  const Scalar slack = 4 * std::numeric_limits<Scalar>::epsilon();
  if (!(eps >= 0) || 2 * n * eps > Scalar(1) + slack) {
    throw std::invalid_argument("restriction_gap_bound: eps must lie in [0, 1/(2N)]");
  }
  return 6 * eps * n * optimal_cost_full_simplex(a);
}

}  // namespace avare
