#pragma once

// Shared generators and oracles for the test binaries. Oracles here are
// written independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "avare/core.hpp"
#include "avare/rng.hpp"

namespace testing {

using avare::RngStream;
using avare::VectorXd;
using avare::MatrixXd;

// Non-negative weights with deliberate zeros and ties.
inline VectorXd random_weights(RngStream& rng, std::size_t n, double zero_prob = 0.2,
                               double tie_prob = 0.2) {
  VectorXd a(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double u = rng.uniform();
    if (u < zero_prob) {
      a(i) = 0;
    } else if (i > 0 && u < zero_prob + tie_prob) {
      a(i) = a(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(i))));
    } else {
      // Spread over several orders of magnitude.
      a(i) = std::exp(4.0 * rng.normal());
    }
  }
  return a;
}

// eps uniform on [0, 1/N], with the endpoints hit now and then.
inline double random_eps(RngStream& rng, std::size_t n) {
  const double u = rng.uniform();
  const double top = 1.0 / static_cast<double>(n);
  if (u < 0.05) return 0.0;
  if (u < 0.10) return top;
  return rng.uniform() * top;
}

// Point of the restricted simplex: eps + (1 - N eps) * Dirichlet(1).
inline VectorXd random_feasible(RngStream& rng, std::size_t n, double eps) {
  VectorXd w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = -std::log(rng.uniform_open_closed());
  w /= w.sum();
  return VectorXd::Constant(w.size(), eps) + (1.0 - static_cast<double>(n) * eps) * w;
}

inline long double objective(const VectorXd& a, const std::vector<long double>& p) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double ai = a(static_cast<Eigen::Index>(i));
    if (ai == 0) continue;
    if (p[i] <= 0) return INFINITY;
    s += ai * ai / p[i];
  }
  return s;
}

inline long double objective(const VectorXd& a, const VectorXd& p) {
  std::vector<long double> q(static_cast<std::size_t>(p.size()));
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = p(static_cast<Eigen::Index>(i));
  return objective(a, q);
}

// Stationarity of the Lagrangian gives p_i = max(eps, a_i / lambda) for some
// lambda > 0; the total mass is non-increasing in lambda, so bisect on it in
// extended precision.
inline std::vector<long double> bisection_oracle(const VectorXd& a, double eps) {
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<long double> p(n, 1.0L / n);
  const long double amax = a.maxCoeff();
  if (amax == 0 || static_cast<long double>(n) * eps >= 1.0L - 1e-15L) return p;
  auto mass = [&](long double lam) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::max<long double>(eps, a(static_cast<Eigen::Index>(i)) / lam);
    return s;
  };
  long double lo = amax * 1e-30L;
  long double hi = static_cast<long double>(a.sum()) * 2 + amax;
  while (mass(hi) > 1) hi *= 2;
  for (int it = 0; it < 400; ++it) {
    const long double mid = (lo + hi) / 2;
    if (mass(mid) > 1) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max<long double>(eps, a(static_cast<Eigen::Index>(i)) / hi);
  long double s = std::accumulate(p.begin(), p.end(), 0.0L);
  for (auto& v : p) v /= s;
  return p;
}

// Minimum of the objective over the grid eps + (1 - N eps) k / G, sum k = G.
inline long double grid_oracle(const VectorXd& a, double eps, int grid) {
  const auto n = static_cast<std::size_t>(a.size());
  const long double free = 1.0L - static_cast<long double>(n) * eps;
  std::vector<int> k(n, 0);
  long double best = INFINITY;
  std::vector<long double> p(n);
  // Enumerate compositions of grid into n parts.
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    if (i + 1 == n) {
      k[i] = left;
      for (std::size_t j = 0; j < n; ++j) p[j] = eps + free * k[j] / grid;
      best = std::min(best, objective(a, p));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      k[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, grid);
  return best;
}

struct Brute {
  VectorXd mean;
  double trace_var = 0;
  std::vector<double> stage_var;
  double max_cross = 0;
};

// Walks every permutation of 0..N-1; the first m entries form the ordered
// batch, which is hit (N-m)! times.
inline Brute brute_force(const MatrixXd& g, const VectorXd& p, std::size_t m) {
  const auto n = static_cast<std::size_t>(g.rows());
  const VectorXd total = g.colwise().sum().transpose();
  double repeats = 1;
  for (std::size_t k = 2; k <= n - m; ++k) repeats *= double(k);
  Brute out;
  out.mean = VectorXd::Zero(g.cols());
  out.stage_var.assign(m, 0.0);
  MatrixXd cross = MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double prob = 1, used = 0;
    VectorXd prefix = VectorXd::Zero(g.cols());
    MatrixXd err(Eigen::Index(m), g.cols());
    for (std::size_t j = 0; j < m; ++j) {
      const auto i = Eigen::Index(perm[j]);
      const double q = p(i) / (1 - used);
      prob *= q;
      used += p(i);
      err.row(Eigen::Index(j)) = (g.row(i).transpose() / q + prefix - total).transpose();
      prefix += g.row(i).transpose();
    }
    prob /= repeats;
    const VectorXd e = err.colwise().mean().transpose();
    out.mean += prob * (e + total);
    out.trace_var += prob * e.squaredNorm();
    for (std::size_t j = 0; j < m; ++j) {
      out.stage_var[j] += prob * err.row(Eigen::Index(j)).squaredNorm();
      for (std::size_t k = j + 1; k < m; ++k)
        cross(Eigen::Index(j), Eigen::Index(k)) += prob * err.row(Eigen::Index(j)).dot(err.row(Eigen::Index(k)));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.max_cross = cross.cwiseAbs().maxCoeff();
  return out;
}

// Pearson chi-square p-value of observed counts against expected
// probabilities. Cells with expected count below 5 are pooled into one.
inline double chi_square_pvalue(const std::vector<std::uint64_t>& counts,
                                const std::vector<double>& probs) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  double stat = 0;
  int cells = 0;
  double pooled_e = 0, pooled_o = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * static_cast<double>(total);
    if (e < 5) {
      pooled_e += e;
      pooled_o += static_cast<double>(counts[i]);
      continue;
    }
    const double d = static_cast<double>(counts[i]) - e;
    stat += d * d / e;
    ++cells;
  }
  if (pooled_e > 0) {
    if (pooled_e >= 5 || cells == 0) {
      const double d = pooled_o - pooled_e;
      stat += d * d / pooled_e;
      ++cells;
    } else if (pooled_o > 10 * pooled_e + 10) {
      return 0.0;  // mass where almost none is expected
    }
  }
  if (cells < 2) return 1.0;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace testing
