#pragma once

// Finite-sum objectives f(x) = sum_i f_i(x) with
//   f_i(x) = (phi_i(x) + (mu/2) |x|^2) / N,
// phi_i the logistic or softmax cross-entropy loss of example i. With this
// scaling N * grad f_i is the classical per-example stochastic gradient.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "avare/core.hpp"
#include "avare/rng.hpp"

namespace avare {

enum class ModelKind { logistic, softmax };

template <typename Scalar>
struct Dataset {
  // One example per row.
  Matrix<Scalar> features;
  std::vector<int> labels;
  int classes = 2;
  // Original label value of each class, used when writing the data back out.
  std::vector<double> label_values;

  std::size_t size() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1) {
      throw std::invalid_argument("Dataset: need at least one example and one feature");
    }
    if (labels.size() != size()) throw std::invalid_argument("Dataset: one label per example");
    if (classes < 2) throw std::invalid_argument("Dataset: need at least two classes");
    if (!features.allFinite()) throw std::invalid_argument("Dataset: non-finite feature value");
    for (int y : labels) {
      if (y < 0 || y >= classes) throw std::invalid_argument("Dataset: label out of range");
    }
  }
};

template <typename Scalar>
class FiniteSumProblem {
 public:
  FiniteSumProblem(Dataset<Scalar> data, ModelKind kind, Scalar mu)
      : data_(std::move(data)), kind_(kind), mu_(mu) {
    data_.validate();
    if (!(mu_ >= 0)) throw std::invalid_argument("FiniteSumProblem: mu must be non-negative");
    if (kind_ == ModelKind::logistic && data_.classes != 2) {
      throw std::invalid_argument("FiniteSumProblem: logistic model needs binary labels");
    }
    sq_norms_ = data_.features.rowwise().squaredNorm();
  }

  const Dataset<Scalar>& data() const noexcept { return data_; }
  ModelKind kind() const noexcept { return kind_; }
  Scalar mu() const noexcept { return mu_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t features() const noexcept { return data_.dim(); }

  // Parameter dimension: d for logistic, K d for softmax (row-major K x d weights).
  std::size_t dim() const noexcept {
    return kind_ == ModelKind::logistic ? data_.dim()
                                        : static_cast<std::size_t>(data_.classes) * data_.dim();
  }

  Scalar loss(const Vector<Scalar>& x, std::size_t i) const {
    check(x, i);
    const auto z = data_.features.row(static_cast<Eigen::Index>(i)).transpose();
    const int y = data_.labels[i];
    Scalar phi;
    if (kind_ == ModelKind::logistic) {
      const Scalar s = z.dot(x);
      phi = softplus(s) - (y == 1 ? s : Scalar(0));
    } else {
      const Vector<Scalar> logits = weights(x) * z;
      const Scalar top = logits.maxCoeff();
      phi = top + std::log((logits.array() - top).exp().sum()) - logits(y);
    }
    return (phi + mu_ / 2 * x.squaredNorm()) / static_cast<Scalar>(size());
  }

  void gradient_into(const Vector<Scalar>& x, std::size_t i, Eigen::Ref<Vector<Scalar>> out) const {
    check(x, i);
    const auto z = data_.features.row(static_cast<Eigen::Index>(i)).transpose();
    const int y = data_.labels[i];
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(size());
    if (kind_ == ModelKind::logistic) {
      const Scalar r = sigmoid(z.dot(x)) - Scalar(y);
      out = (r * z + mu_ * x) * inv_n;
    } else {
      const auto k = static_cast<Eigen::Index>(data_.classes);
      const auto d = static_cast<Eigen::Index>(data_.dim());
      Vector<Scalar> probs = weights(x) * z;
      probs.array() -= probs.maxCoeff();
      probs = probs.array().exp();
      probs /= probs.sum();
      probs(y) -= Scalar(1);
      Eigen::Map<Matrix<Scalar>> g(out.data(), k, d);
      g.noalias() = probs * z.transpose();
      out += mu_ * x;
      out *= inv_n;
    }
  }

  Vector<Scalar> gradient(const Vector<Scalar>& x, std::size_t i) const {
    Vector<Scalar> out(static_cast<Eigen::Index>(dim()));
    gradient_into(x, i, out);
    return out;
  }

  Vector<Scalar> full_gradient(const Vector<Scalar>& x) const {
    Vector<Scalar> total = Vector<Scalar>::Zero(static_cast<Eigen::Index>(dim()));
    Vector<Scalar> g(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < size(); ++i) {
      gradient_into(x, i, g);
      total += g;
    }
    return total;
  }

  Scalar full_loss(const Vector<Scalar>& x) const {
    Scalar total = 0;
    for (std::size_t i = 0; i < size(); ++i) total += loss(x, i);
    return total;
  }

  // All N per-example gradient norms at x.
  Vector<Scalar> gradient_norms(const Vector<Scalar>& x) const {
    Vector<Scalar> norms(static_cast<Eigen::Index>(size()));
    Vector<Scalar> g(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < size(); ++i) {
      gradient_into(x, i, g);
      norms(static_cast<Eigen::Index>(i)) = g.norm();
    }
    return norms;
  }

  /// Lipschitz constant of grad f_i: (|z_i|^2 / 4 + mu) / N for logistic,
  /// (|z_i|^2 / 2 + mu) / N for softmax.
  Scalar smoothness(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("FiniteSumProblem: example index out of range");
    const Scalar curvature = kind_ == ModelKind::logistic ? Scalar(0.25) : Scalar(0.5);
    return (curvature * sq_norms_(static_cast<Eigen::Index>(i)) + mu_) /
           static_cast<Scalar>(size());
  }

  Vector<Scalar> smoothness_all() const {
    Vector<Scalar> out(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) out(static_cast<Eigen::Index>(i)) = smoothness(i);
    return out;
  }

 private:
  static Scalar softplus(Scalar s) {
    using std::exp;
    using std::log1p;
    return (s > 0 ? s : Scalar(0)) + log1p(exp(-std::abs(s)));
  }

  static Scalar sigmoid(Scalar s) {
    using std::exp;
    if (s >= 0) return Scalar(1) / (Scalar(1) + exp(-s));
    const Scalar e = exp(s);
    return e / (Scalar(1) + e);
  }

  Eigen::Map<const Matrix<Scalar>> weights(const Vector<Scalar>& x) const {
    return Eigen::Map<const Matrix<Scalar>>(x.data(), data_.classes,
                                            static_cast<Eigen::Index>(data_.dim()));
  }

  void check(const Vector<Scalar>& x, std::size_t i) const {
    if (i >= size()) throw std::out_of_range("FiniteSumProblem: example index out of range");
    if (static_cast<std::size_t>(x.size()) != dim()) {
      throw std::invalid_argument("FiniteSumProblem: parameter has the wrong dimension");
    }
  }

  Dataset<Scalar> data_;
  ModelKind kind_;
  Scalar mu_;
  Vector<Scalar> sq_norms_;
};

template <typename Scalar>
Vector<Scalar> per_example_gradient(const FiniteSumProblem<Scalar>& prob, const Vector<Scalar>& x,
                                    std::size_t i) {
  return prob.gradient(x, i);
}

template <typename Scalar>
Vector<Scalar> full_gradient(const FiniteSumProblem<Scalar>& prob, const Vector<Scalar>& x) {
  return prob.full_gradient(x);
}

template <typename Scalar>
Scalar full_loss(const FiniteSumProblem<Scalar>& prob, const Vector<Scalar>& x) {
  return prob.full_loss(x);
}

template <typename Scalar>
Scalar per_example_smoothness(const FiniteSumProblem<Scalar>& prob, std::size_t i) {
  return prob.smoothness(i);
}

struct MinimizerOptions {
  double tol = 1e-10;
  std::uint64_t max_iterations = 1000000;
};

/// Full-batch gradient descent with step 1 / sum_i L_i until |grad f| <= tol.
/// Needs mu > 0; throws std::runtime_error if the iteration cap is hit.
template <typename Scalar>
Vector<Scalar> solve_minimizer(const FiniteSumProblem<Scalar>& prob,
                               MinimizerOptions options = MinimizerOptions{}) {
  if (!(prob.mu() > 0)) throw std::invalid_argument("solve_minimizer: mu must be positive");
  const Scalar step = Scalar(1) / prob.smoothness_all().sum();
  Vector<Scalar> x = Vector<Scalar>::Zero(static_cast<Eigen::Index>(prob.dim()));
  Scalar gnorm = 0;
  for (std::uint64_t it = 0; it < options.max_iterations; ++it) {
    const Vector<Scalar> g = prob.full_gradient(x);
    gnorm = g.norm();
    if (gnorm <= options.tol) return x;
    x -= step * g;
  }
  std::ostringstream msg;
  msg << "solve_minimizer: no convergence after " << options.max_iterations
      << " iterations, gradient norm " << static_cast<double>(gnorm) << " > tol " << options.tol;
  throw std::runtime_error(msg.str());
}

template <typename Scalar>
struct SyntheticData {
  Dataset<Scalar> data;
  Vector<Scalar> teacher;
};

/// Binary classification data: teacher w ~ N(0, I_d), then each row z ~ N(0, I_d)
/// labelled 1[z.w > 0], then each label flipped independently with probability
/// noise. Draw order is fixed so a seed determines the dataset bit for bit.
template <typename Scalar = double>
SyntheticData<Scalar> generate_synthetic(std::size_t n, std::size_t d, std::uint64_t seed,
                                         double noise = 0.05) {
  if (n < 1 || d < 1) throw std::invalid_argument("make_synthetic: N and d must be positive");
  RngStream rng(seed, 0);
  SyntheticData<Scalar> out;
  out.teacher.resize(static_cast<Eigen::Index>(d));
  for (auto& w : out.teacher) w = static_cast<Scalar>(rng.normal());
  auto& data = out.data;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      data.features(i, j) = static_cast<Scalar>(rng.normal());
    }
  }
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar s = data.features.row(static_cast<Eigen::Index>(i)).dot(out.teacher);
    int y = s > 0 ? 1 : 0;
    if (rng.bernoulli(noise)) y = 1 - y;
    data.labels[i] = y;
  }
  data.classes = 2;
  data.label_values = {0.0, 1.0};
  return out;
}

template <typename Scalar = double>
Dataset<Scalar> make_synthetic(std::size_t n, std::size_t d, std::uint64_t seed) {
  return generate_synthetic<Scalar>(n, d, seed).data;
}

}  // namespace avare
