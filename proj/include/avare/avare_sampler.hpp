#pragma once

// Stateful sampler for the restricted-simplex optimal distribution built from
// last-seen gradient norms. Three structures are kept in sync:
//   H   the norms by original index,
//   T   an order-statistic tree over (norm, index), decreasing norm first,
//   CS  cumulative sums of the norms in tree order, CS[r] = sum of the r largest.
// find_rho runs a tree descent with a successor probe per level, O(log^2 N);
// sampling adds one select and a binary search over CS; an update is O(log N)
// tree work plus one contiguous O(N) pass over CS.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "avare/core.hpp"
#include "avare/detail/rank_tree.hpp"
#include "avare/rng.hpp"
#include "avare/simplex_opt.hpp"
#include "avare/without_replacement.hpp"

namespace avare {

template <typename Scalar>
struct RhoLambda {
  std::size_t rho = 0;
  Scalar lambda = 0;
  // All norms zero and eps = 0: no distribution can be formed from the table.
  bool degenerate = false;
};

// Work counters. Tree work is counted in node touches, CS maintenance in
// array elements written.
struct SamplerStats {
  std::uint64_t search_visits = 0;
  std::uint64_t sample_visits = 0;
  std::uint64_t update_tree_visits = 0;
  std::uint64_t update_prefix_elements = 0;
  std::uint64_t searches = 0;
  std::uint64_t samples = 0;
  std::uint64_t updates = 0;
};

template <typename Scalar>
class WeightTable {
 public:
  using Tree = detail::RankTree<Scalar>;
  using Id = typename Tree::Id;

  static constexpr std::uint64_t kDefaultReanchorPeriod = std::uint64_t{1} << 16;

  template <typename Derived>
  explicit WeightTable(const Eigen::MatrixBase<Derived>& norms,
                       std::uint64_t reanchor_period = kDefaultReanchorPeriod)
      : reanchor_period_(reanchor_period) {
    detail::require_weights(norms, "WeightTable");
    h_ = norms.template cast<Scalar>();
    tree_.build(h_);
    positive_ = static_cast<std::size_t>((h_.array() > Scalar(0)).count());
    reanchor();
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(h_.size()); }
  Scalar norm(std::size_t i) const { return h_(static_cast<Eigen::Index>(i)); }
  const Vector<Scalar>& norms() const noexcept { return h_; }
  const Tree& tree() const noexcept { return tree_; }
  bool all_zero() const noexcept { return positive_ == 0; }

  // CS[0..N] with CS[0] = 0.
  const Vector<Scalar>& prefix_sums() const noexcept { return cs_; }
  // Write access for fault-injection tests of validate_full.
  Vector<Scalar>& unsafe_prefix_sums() noexcept { return cs_; }

  // Original indices in decreasing-norm order.
  std::vector<std::size_t> order() const {
    const auto ids = tree_.inorder();
    return std::vector<std::size_t>(ids.begin(), ids.end());
  }

  std::size_t rank_of(std::size_t i) const { return tree_.rank(static_cast<Id>(i)); }

  /// Replaces the norm of index i.
  void update(std::size_t i, Scalar new_norm) {
    if (i >= size()) throw std::out_of_range("WeightTable::update: index out of range");
    if (!std::isfinite(static_cast<double>(new_norm)) || new_norm < 0) {
      throw std::invalid_argument("WeightTable::update: norm must be finite and non-negative");
    }
    const auto id = static_cast<Id>(i);
    const Scalar old_norm = h_(static_cast<Eigen::Index>(i));
    const std::uint64_t v0 = tree_.visits();

    const std::size_t r_old = tree_.rank(id);
    tree_.erase(id);
    h_(static_cast<Eigen::Index>(i)) = new_norm;
    tree_.insert(id, new_norm);
    const std::size_t r_new = tree_.rank(id);
    stats_.update_tree_visits += tree_.visits() - v0;

    // Ranks between the old and new slot shift by one; everything from the
    // larger of the two onward only sees the value change.
    const std::size_t n = size();
    const Scalar delta = new_norm - old_norm;
    if (r_new < r_old) {
      for (std::size_t k = r_old - 1; k >= r_new; --k) cs_(k) = cs_(k - 1) + new_norm;
    } else if (r_new > r_old) {
      for (std::size_t k = r_old; k < r_new; ++k) cs_(k) = cs_(k + 1) - old_norm;
    }
    const std::size_t tail = std::max(r_old, r_new);
    cs_.segment(tail, n - tail + 1).array() += delta;
    stats_.update_prefix_elements += n - std::min(r_old, r_new) + 1;

    if (old_norm > 0) --positive_;
    if (new_norm > 0) ++positive_;
    ++stats_.updates;
    if (reanchor_period_ == 0) return;
    // Drift is absolute at the scale of the largest total seen since the last
    // rebuild, so a total that collapses far below it also forces a rebuild.
    peak_ = std::max(peak_, cs_(n));
    if (++since_anchor_ >= reanchor_period_ || cs_(n) < peak_ * Scalar(1e-6)) reanchor();
  }

  /// Threshold rank and normalizer for the given eps.
  RhoLambda<Scalar> find_rho(Scalar eps) const {
    const std::size_t n = size();
    detail::require_eps(eps, n, "WeightTable::find_rho");
    RhoLambda<Scalar> out;
    if (all_zero()) {
      out.rho = n;
      out.lambda = 0;
      out.degenerate = (eps == 0);
      return out;
    }
    const std::uint64_t v0 = tree_.visits();
    out.rho = search(eps);
    out.lambda = detail::normalizer(cs_(out.rho), out.rho, n, eps);
    stats_.search_visits += tree_.visits() - v0;
    ++stats_.searches;
    return out;
  }

  /// Probability of index i under the distribution described by rl.
  Scalar probability(std::size_t i, const RhoLambda<Scalar>& rl, Scalar eps) const {
    if (all_zero()) return Scalar(1) / static_cast<Scalar>(size());
    if (rank_of(i) <= rl.rho) return h_(static_cast<Eigen::Index>(i)) / rl.lambda;
    return eps;
  }

  /// Explicit distribution in original index order (O(N)).
  Vector<Scalar> probabilities(Scalar eps) const {
    const auto rl = find_rho(eps);
    const std::size_t n = size();
    if (all_zero()) return Vector<Scalar>::Constant(h_.size(), Scalar(1) / static_cast<Scalar>(n));
    Vector<Scalar> p = Vector<Scalar>::Constant(h_.size(), eps);
    const auto ids = tree_.inorder();
    for (std::size_t r = 0; r < rl.rho; ++r) p(ids[r]) = h_(ids[r]) / rl.lambda;
    return p;
  }

  std::size_t sample(Scalar eps, RngStream& rng) const { return sample(find_rho(eps), eps, rng); }

  /// Draws an original index using a precomputed threshold.
  ///
  /// With probability (N - rho) eps a rank is drawn uniformly from the tail;
  /// otherwise u * CS[rho] is located among CS[1..rho] by binary search, which
  /// gives head rank r probability (1 - (N - rho) eps) a_r / CS[rho] = a_r / lambda.
  std::size_t sample(const RhoLambda<Scalar>& rl, Scalar eps, RngStream& rng) const {
    const std::size_t n = size();
    if (rl.degenerate) throw std::domain_error("WeightTable::sample: all norms zero with eps = 0");
    ++stats_.samples;
    if (all_zero()) return static_cast<std::size_t>(rng.index(n));

    const std::uint64_t v0 = tree_.visits();
    std::size_t rank = 0;
    const auto tail_mass = static_cast<double>(static_cast<Scalar>(n - rl.rho) * eps);
    if (rl.rho < n && rng.bernoulli(tail_mass)) {
      rank = rl.rho + 1 + static_cast<std::size_t>(rng.index(n - rl.rho));
    } else {
      const Scalar target = static_cast<Scalar>(rng.uniform_open_closed()) * cs_(rl.rho);
      std::size_t lo = 1;
      std::size_t hi = rl.rho;
      while (lo < hi) {
        tree_.count_visit();
        const std::size_t mid = lo + (hi - lo) / 2;
        if (target <= cs_(mid)) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      rank = lo;
    }
    const auto id = static_cast<std::size_t>(tree_.select(rank));
    stats_.sample_visits += tree_.visits() - v0;
    return id;
  }

  /// Ordered batch of m distinct indices drawn sequentially from the
  /// renormalized distribution, with the realized conditional probabilities.
  BatchDraw sample_without_replacement(Scalar eps, std::size_t m, RngStream& rng) const {
    const auto rl = find_rho(eps);
    if (rl.degenerate) {
      throw std::domain_error("WeightTable::sample_without_replacement: degenerate table");
    }
    return draw_without_replacement(
        size(), m, [&](RngStream& g) { return sample(rl, eps, g); },
        [&](std::size_t i) { return static_cast<double>(probability(i, rl, eps)); }, rng);
  }

  /// Rebuilds tree order and cumulative sums from H and compares them with the
  /// maintained structures; CS must agree within 1e-6 relative to its total.
  bool validate_full() const {
    const std::size_t n = size();
    if (tree_.size() != n || !tree_.check()) return false;
    for (std::size_t i = 0; i < n; ++i) {
      if (tree_.key(static_cast<Id>(i)) != h_(static_cast<Eigen::Index>(i))) return false;
    }
    const auto expected = detail::decreasing_order(h_);
    const auto ids = tree_.inorder();
    if (!std::equal(expected.begin(), expected.end(), ids.begin(),
                    [](std::size_t a, Id b) { return a == static_cast<std::size_t>(b); })) {
      return false;
    }
    if (cs_.size() != static_cast<Eigen::Index>(n + 1) || cs_(0) != 0) return false;
    Scalar acc = 0;
    const double tol = 1e-6 * std::max(1.0, static_cast<double>(h_.sum()));
    for (std::size_t r = 1; r <= n; ++r) {
      acc += h_(static_cast<Eigen::Index>(expected[r - 1]));
      if (std::abs(static_cast<double>(cs_(r) - acc)) > tol) return false;
      if (cs_(r) < cs_(r - 1) - tol) return false;
    }
    return true;
  }

  /// Recomputes CS from scratch to discard accumulated rounding.
  void reanchor() {
    rebuild_prefix();
    since_anchor_ = 0;
    peak_ = cs_(static_cast<Eigen::Index>(size()));
  }

  const SamplerStats& stats() const noexcept { return stats_; }
  void reset_stats() noexcept { stats_ = SamplerStats{}; }

 private:
  void rebuild_prefix() {
    const std::size_t n = size();
    cs_.setZero(static_cast<Eigen::Index>(n + 1));
    const auto ids = tree_.inorder();
    for (std::size_t r = 1; r <= n; ++r) cs_(r) = cs_(r - 1) + h_(ids[r - 1]);
  }

  // Descends from the root tracking the rank of the current node. A node of
  // rank r passing the threshold test whose successor fails it is rho.
  std::size_t search(Scalar eps) const {
    const std::size_t n = size();
    Id node = tree_.root();
    std::size_t before = 0;
    while (node != Tree::kNil) {
      tree_.count_visit();
      const std::size_t r = before + tree_.subtree_size(tree_.left(node)) + 1;
      if (!detail::threshold_holds(tree_.key(node), cs_(r), r, n, eps)) {
        node = tree_.left(node);
        continue;
      }
      if (r == n) return r;
      const Scalar next_key = tree_.key(tree_.select(r + 1));
      if (!detail::threshold_holds(next_key, cs_(r + 1), r + 1, n, eps)) return r;
      before = r;
      node = tree_.right(node);
    }
    // Reached only after a failing node with an empty left subtree, so that
    // node sits at rank before + 1. The rank-1 test holds in exact arithmetic
    // (it can round the other way at eps = 1/N), hence the floor.
    return std::max<std::size_t>(before, 1);
  }

  Vector<Scalar> h_;
  Tree tree_;
  Vector<Scalar> cs_;
  std::size_t positive_ = 0;
  std::uint64_t reanchor_period_;
  std::uint64_t since_anchor_ = 0;
  Scalar peak_ = 0;
  mutable SamplerStats stats_;
};

}  // namespace avare
