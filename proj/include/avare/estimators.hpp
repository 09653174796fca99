#pragma once

// Importance-weighted gradient estimators: single draw, with-replacement
// minibatch mean, and the without-replacement sequential estimator
//
//   g_b = (1/m) sum_j g_j,   g_j = g_{I_j} / q_j + sum_{k<j} g_{I_k},
//   q_j = p_{I_j} / (1 - sum_{k<j} p_{I_k}),
//
// plus exact moment enumeration of the latter on small populations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "avare/core.hpp"

namespace avare {

template <typename Scalar>
struct GradientSample {
  std::vector<std::size_t> indices;
  // Realized draw probabilities: p_I for independent draws, q_j for sequential ones.
  Vector<Scalar> weights;
  // Row j holds the gradient of indices[j].
  Matrix<Scalar> gradients;
};

template <typename Scalar>
struct EstimateResult {
  Vector<Scalar> ghat;
  // Row j is the stage estimate g_j (without-replacement estimator only).
  Matrix<Scalar> stages;
};

template <typename Derived>
Vector<typename Derived::Scalar> single_estimate(const Eigen::MatrixBase<Derived>& g,
                                                 typename Derived::Scalar p) {
  if (!(p > 0)) throw std::invalid_argument("single_estimate: probability must be positive");
  return g / p;
}

template <typename DerivedG, typename DerivedP>
Vector<typename DerivedG::Scalar> minibatch_wr_estimate(const Eigen::MatrixBase<DerivedG>& grads,
                                                        const Eigen::MatrixBase<DerivedP>& probs) {
  using Scalar = typename DerivedG::Scalar;
  if (grads.rows() == 0) throw std::invalid_argument("minibatch_wr_estimate: empty batch");
  if (probs.size() != grads.rows()) {
    throw std::invalid_argument("minibatch_wr_estimate: one probability per draw expected");
  }
  Vector<Scalar> acc = Vector<Scalar>::Zero(grads.cols());
  for (Eigen::Index j = 0; j < grads.rows(); ++j) {
    acc += single_estimate(grads.row(j).transpose(), probs(j));
  }
  return acc / static_cast<Scalar>(grads.rows());
}

template <typename Scalar>
Vector<Scalar> minibatch_wr_estimate(const GradientSample<Scalar>& batch) {
  return minibatch_wr_estimate(batch.gradients, batch.weights);
}

template <typename Scalar>
EstimateResult<Scalar> minibatch_wor_stages(const GradientSample<Scalar>& batch) {
  const auto m = static_cast<Eigen::Index>(batch.indices.size());
  if (m == 0) throw std::invalid_argument("minibatch_wor_estimate: empty batch");
  if (batch.weights.size() != m || batch.gradients.rows() != m) {
    throw std::invalid_argument("minibatch_wor_estimate: indices, weights and gradients disagree");
  }
  std::vector<std::size_t> seen(batch.indices);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw std::invalid_argument("minibatch_wor_estimate: duplicate index in batch");
  }
  EstimateResult<Scalar> out;
  out.stages.resize(m, batch.gradients.cols());
  Vector<Scalar> prefix = Vector<Scalar>::Zero(batch.gradients.cols());
  for (Eigen::Index j = 0; j < m; ++j) {
    const Scalar q = batch.weights(j);
    if (!(q > 0 && q <= 1)) {
      throw std::invalid_argument("minibatch_wor_estimate: conditional weight outside (0, 1]");
    }
    out.stages.row(j) = (batch.gradients.row(j).transpose() / q + prefix).transpose();
    prefix += batch.gradients.row(j).transpose();
  }
  out.ghat = out.stages.colwise().mean().transpose();
  return out;
}

template <typename Scalar>
Vector<Scalar> minibatch_wor_estimate(const GradientSample<Scalar>& batch) {
  return minibatch_wor_stages(batch).ghat;
}

/// Trace of the covariance of the with-replacement mean of m single-draw
/// estimates: (sum_i |g_i|^2 / p_i - |sum_i g_i|^2) / m.
template <typename DerivedG, typename DerivedP>
typename DerivedG::Scalar with_replacement_trace_variance(const Eigen::MatrixBase<DerivedG>& grads,
                                                          const Eigen::MatrixBase<DerivedP>& p,
                                                          std::size_t m) {
  using Scalar = typename DerivedG::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 0; i < grads.rows(); ++i) total += grads.row(i).squaredNorm() / p(i);
  return (total - grads.colwise().sum().squaredNorm()) / static_cast<Scalar>(m);
}

template <typename Scalar>
struct MomentReport {
  Vector<Scalar> mean;
  // E |g_b - g|^2
  Scalar trace_var = 0;
  // E |g_j - g|^2 for j = 1..m
  std::vector<Scalar> per_stage_var;
  // max_{j<k} |E <g_j - g, g_k - g>|
  Scalar max_cross_term = 0;
  // Largest violation of the stage recursion
  //   E[|g_{j+1} - g|^2 | S^j] = (1 - q_j) E[|g_j - g|^2 | S^{j-1}] - q_j |g_j - g|^2
  // over all prefixes S^j of positive probability.
  Scalar max_recursion_residual = 0;
  // Same recursion after averaging over I_j given S^{j-1}.
  Scalar max_averaged_recursion_residual = 0;
  std::size_t outcomes = 0;
};

namespace detail {

template <typename Scalar>
class MomentEnumerator {
 public:
  MomentEnumerator(const Matrix<Scalar>& g, const Vector<Scalar>& p, std::size_t m)
      : g_(g), p_(p), m_(m), n_(static_cast<std::size_t>(g.rows())) {
    total_ = g_.colwise().sum().transpose();
    report_.mean = Vector<Scalar>::Zero(g_.cols());
    report_.per_stage_var.assign(m_, Scalar(0));
    cross_ = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    taken_.assign(n_, 0);
    errors_.resize(static_cast<Eigen::Index>(m_), g_.cols());
  }

  MomentReport<Scalar> run() {
    visit(0, Scalar(1), Scalar(0), Vector<Scalar>::Zero(g_.cols()), Scalar(0), Scalar(0),
          Scalar(0));
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t k = j + 1; k < m_; ++k) {
        report_.max_cross_term =
            std::max(report_.max_cross_term,
                     std::abs(cross_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))));
      }
    }
    return report_;
  }

 private:
  // Stage variance conditional on the current prefix: sum_i q_i |g_i/q_i + prefix - g|^2.
  Scalar stage_variance(Scalar remaining, const Vector<Scalar>& prefix) const {
    Scalar v = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (taken_[i]) continue;
      const Scalar q = p_(static_cast<Eigen::Index>(i)) / remaining;
      const Vector<Scalar> e = g_.row(static_cast<Eigen::Index>(i)).transpose() / q + prefix - total_;
      v += q * e.squaredNorm();
    }
    return v;
  }

  // depth = prefix length. parent_var = E[|g_depth - g|^2 | S^{depth-1}], and
  // last_q / last_err describe the final prefix element's stage.
  void visit(std::size_t depth, Scalar prob, Scalar taken_mass, const Vector<Scalar>& prefix,
             Scalar parent_var, Scalar last_q, Scalar last_err) {
    if (depth == m_) {
      ++report_.outcomes;
      const Vector<Scalar> ghat = (errors_.colwise().sum().transpose() / static_cast<Scalar>(m_)) + total_;
      report_.mean += prob * ghat;
      report_.trace_var += prob * (ghat - total_).squaredNorm();
      for (std::size_t j = 0; j < m_; ++j) {
        for (std::size_t k = j + 1; k < m_; ++k) {
          cross_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) +=
              prob * errors_.row(static_cast<Eigen::Index>(j)).dot(errors_.row(static_cast<Eigen::Index>(k)));
        }
      }
      return;
    }
    const Scalar remaining = Scalar(1) - taken_mass;
    const Scalar var_here = stage_variance(remaining, prefix);
    report_.per_stage_var[depth] += prob * var_here;
    if (depth >= 1) {
      const Scalar predicted = (Scalar(1) - last_q) * parent_var - last_q * last_err;
      report_.max_recursion_residual =
          std::max(report_.max_recursion_residual, std::abs(var_here - predicted));
    }

    // Averaged recursion one level down: E[V_{j+1} | S^{j-1}] against
    // (1 - E q_j) V_j - E[q_j |g_j - g|^2], with j = depth + 1.
    const bool check_average = depth + 2 <= m_;
    Scalar mean_next_var = 0, mean_q = 0, mean_q_err = 0;

    for (std::size_t i = 0; i < n_; ++i) {
      if (taken_[i]) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const Scalar pi = p_(ii);
      const Scalar q = pi / remaining;
      const Vector<Scalar> gi = g_.row(ii).transpose();
      const Vector<Scalar> err = gi / q + prefix - total_;
      errors_.row(static_cast<Eigen::Index>(depth)) = err.transpose();
      taken_[i] = 1;
      if (check_average) {
        const Scalar next_var = stage_variance(remaining - pi, prefix + gi);
        mean_next_var += q * next_var;
        mean_q += q * q;
        mean_q_err += q * q * err.squaredNorm();
      }
      visit(depth + 1, prob * q, taken_mass + pi, prefix + gi, var_here, q, err.squaredNorm());
      taken_[i] = 0;
    }
    if (check_average) {
      const Scalar predicted = (Scalar(1) - mean_q) * var_here - mean_q_err;
      report_.max_averaged_recursion_residual =
          std::max(report_.max_averaged_recursion_residual, std::abs(mean_next_var - predicted));
    }
  }

  const Matrix<Scalar>& g_;
  const Vector<Scalar>& p_;
  std::size_t m_;
  std::size_t n_;
  Vector<Scalar> total_;
  MomentReport<Scalar> report_;
  Matrix<Scalar> cross_;
  Matrix<Scalar> errors_;
  std::vector<char> taken_;
};

}  // namespace detail

/// Exact moments of the without-replacement estimator by enumerating every
/// ordered m-tuple of distinct indices under the sequential law. Requires
/// strictly positive p summing to one and N <= max_n.
template <typename DerivedG, typename DerivedP>
MomentReport<typename DerivedG::Scalar> enumerate_moments(const Eigen::MatrixBase<DerivedG>& grads,
                                                          const Eigen::MatrixBase<DerivedP>& p,
                                                          std::size_t m, std::size_t max_n = 6) {
  using Scalar = typename DerivedG::Scalar;
  const auto n = static_cast<std::size_t>(grads.rows());
  if (n == 0 || n > max_n) {
    throw std::invalid_argument("enumerate_moments: N outside the enumeration cap");
  }
  if (m < 1 || m > n) throw std::invalid_argument("enumerate_moments: need 1 <= m <= N");
  if (static_cast<std::size_t>(p.size()) != n) {
    throw std::invalid_argument("enumerate_moments: p must have one entry per gradient");
  }
  if ((p.array() <= Scalar(0)).any()) {
    throw std::invalid_argument("enumerate_moments: p must be strictly positive");
  }
  const Matrix<Scalar> g = grads;
  const Vector<Scalar> pp = p;
  return detail::MomentEnumerator<Scalar>(g, pp, m).run();
}

}  // namespace avare
