#pragma once

// Order-statistic AVL tree over a fixed population of ids 0..N-1.
//
// Each id carries a key; the inorder sequence lists ids by decreasing key,
// equal keys by ascending id, so every id has an unambiguous 1-based rank.
// Node storage is indexed by id, which makes re-keying an id a plain
// erase + insert without any allocation.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace avare::detail {

template <typename Scalar>
class RankTree {
 public:
  using Id = std::int32_t;
  static constexpr Id kNil = -1;

  RankTree() = default;

  template <typename Keys>
  explicit RankTree(const Keys& keys) {
    build(keys);
  }

  template <typename Keys>
  void build(const Keys& keys) {
    const auto n = static_cast<std::size_t>(keys.size());
    if (n > static_cast<std::size_t>(INT32_MAX)) throw std::length_error("RankTree: too many ids");
    key_.resize(n);
    for (std::size_t i = 0; i < n; ++i) key_[i] = keys[static_cast<decltype(keys.size())>(i)];
    left_.assign(n, kNil);
    right_.assign(n, kNil);
    height_.assign(n, 0);
    size_.assign(n, 0);
    std::vector<Id> order(n);
    std::iota(order.begin(), order.end(), Id{0});
    std::sort(order.begin(), order.end(), [this](Id a, Id b) { return before(a, b); });
    root_ = build_range(order, 0, n);
    count_ = n;
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return key_.size(); }
  Id root() const noexcept { return root_; }
  Id left(Id x) const noexcept { return left_[x]; }
  Id right(Id x) const noexcept { return right_[x]; }
  Scalar key(Id x) const noexcept { return key_[x]; }
  std::size_t subtree_size(Id x) const noexcept { return x == kNil ? 0 : size_[x]; }
  int height() const noexcept { return height_of(root_); }

  bool before(Id a, Id b) const noexcept {
    return key_[a] > key_[b] || (key_[a] == key_[b] && a < b);
  }

  // Removes id x, which must currently be in the tree.
  void erase(Id x) {
    root_ = erase_rec(root_, x);
    left_[x] = right_[x] = kNil;
    height_[x] = 0;
    size_[x] = 0;
    --count_;
  }

  // Inserts id x (currently absent) under the given key.
  void insert(Id x, Scalar key) {
    key_[x] = key;
    left_[x] = right_[x] = kNil;
    height_[x] = 1;
    size_[x] = 1;
    root_ = insert_rec(root_, x);
    ++count_;
  }

  // 1-based position of x in the inorder sequence.
  std::size_t rank(Id x) const {
    std::size_t r = 0;
    Id node = root_;
    while (node != x) {
      ++visits_;
      if (node == kNil) throw std::logic_error("RankTree::rank: id not in tree");
      if (before(x, node)) {
        node = left_[node];
      } else {
        r += subtree_size(left_[node]) + 1;
        node = right_[node];
      }
    }
    ++visits_;
    return r + subtree_size(left_[x]) + 1;
  }

  // Id at 1-based position r.
  Id select(std::size_t r) const {
    Id node = root_;
    while (node != kNil) {
      ++visits_;
      const std::size_t ls = subtree_size(left_[node]);
      if (r <= ls) {
        node = left_[node];
      } else if (r == ls + 1) {
        return node;
      } else {
        r -= ls + 1;
        node = right_[node];
      }
    }
    throw std::out_of_range("RankTree::select: rank out of range");
  }

  std::vector<Id> inorder() const {
    std::vector<Id> out;
    out.reserve(count_);
    std::vector<Id> stack;
    Id node = root_;
    while (node != kNil || !stack.empty()) {
      while (node != kNil) {
        stack.push_back(node);
        node = left_[node];
      }
      node = stack.back();
      stack.pop_back();
      out.push_back(node);
      node = right_[node];
    }
    return out;
  }

  // Structural audit: sizes, heights, AVL balance and key ordering.
  bool check() const {
    std::size_t seen = 0;
    if (!check_rec(root_, seen)) return false;
    if (seen != count_) return false;
    const auto seq = inorder();
    for (std::size_t k = 1; k < seq.size(); ++k) {
      if (!before(seq[k - 1], seq[k])) return false;
    }
    return true;
  }

  // Number of node touches since construction; callers diff it around an operation.
  std::uint64_t visits() const noexcept { return visits_; }
  void count_visit() const noexcept { ++visits_; }

 private:
  int height_of(Id x) const noexcept { return x == kNil ? 0 : height_[x]; }

  void refresh(Id x) {
    height_[x] = 1 + std::max(height_of(left_[x]), height_of(right_[x]));
    size_[x] = 1 + subtree_size(left_[x]) + subtree_size(right_[x]);
  }

  Id rotate_right(Id x) {
    const Id y = left_[x];
    left_[x] = right_[y];
    right_[y] = x;
    refresh(x);
    refresh(y);
    return y;
  }

  Id rotate_left(Id x) {
    const Id y = right_[x];
    right_[x] = left_[y];
    left_[y] = x;
    refresh(x);
    refresh(y);
    return y;
  }

  Id rebalance(Id x) {
    refresh(x);
    const int balance = height_of(left_[x]) - height_of(right_[x]);
    if (balance > 1) {
      if (height_of(left_[left_[x]]) < height_of(right_[left_[x]])) {
        left_[x] = rotate_left(left_[x]);
      }
      return rotate_right(x);
    }
    if (balance < -1) {
      if (height_of(right_[right_[x]]) < height_of(left_[right_[x]])) {
        right_[x] = rotate_right(right_[x]);
      }
      return rotate_left(x);
    }
    return x;
  }

  Id build_range(const std::vector<Id>& order, std::size_t lo, std::size_t hi) {
    if (lo >= hi) return kNil;
    const std::size_t mid = lo + (hi - lo) / 2;
    const Id x = order[mid];
    left_[x] = build_range(order, lo, mid);
    right_[x] = build_range(order, mid + 1, hi);
    refresh(x);
    return x;
  }

  Id insert_rec(Id node, Id x) {
    if (node == kNil) return x;
    ++visits_;
    if (before(x, node)) {
      left_[node] = insert_rec(left_[node], x);
    } else {
      right_[node] = insert_rec(right_[node], x);
    }
    return rebalance(node);
  }

  Id remove_min(Id node, Id& min_id) {
    ++visits_;
    if (left_[node] == kNil) {
      min_id = node;
      return right_[node];
    }
    left_[node] = remove_min(left_[node], min_id);
    return rebalance(node);
  }

  Id erase_rec(Id node, Id x) {
    if (node == kNil) throw std::logic_error("RankTree::erase: id not in tree");
    ++visits_;
    if (node == x) {
      if (left_[node] == kNil) return right_[node];
      if (right_[node] == kNil) return left_[node];
      Id successor = kNil;
      const Id rest = remove_min(right_[node], successor);
      left_[successor] = left_[node];
      right_[successor] = rest;
      return rebalance(successor);
    }
    if (before(x, node)) {
      left_[node] = erase_rec(left_[node], x);
    } else {
      right_[node] = erase_rec(right_[node], x);
    }
    return rebalance(node);
  }

  bool check_rec(Id x, std::size_t& seen) const {
    if (x == kNil) return true;
    ++seen;
    if (!check_rec(left_[x], seen) || !check_rec(right_[x], seen)) return false;
    const int hl = height_of(left_[x]);
    const int hr = height_of(right_[x]);
    if (height_[x] != 1 + std::max(hl, hr) || std::abs(hl - hr) > 1) return false;
    return size_[x] == 1 + subtree_size(left_[x]) + subtree_size(right_[x]);
  }

  std::vector<Scalar> key_;
  std::vector<Id> left_;
  std::vector<Id> right_;
  std::vector<int> height_;
  std::vector<std::size_t> size_;
  Id root_ = kNil;
  std::size_t count_ = 0;
  mutable std::uint64_t visits_ = 0;
};

}  // namespace avare::detail
