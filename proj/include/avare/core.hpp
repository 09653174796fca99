#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace avare {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

// Raised when iterates leave the finite region or exceed the divergence bound.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::uint64_t step)
      : std::runtime_error(what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

namespace detail {

template <typename Derived>
void require_weights(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (a.size() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty weight vector");
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto v = a(i);
    if (!std::isfinite(static_cast<double>(v)) || v < 0) {
      throw std::invalid_argument(std::string(who) + ": weight " + std::to_string(i) +
                                  " is negative or non-finite");
    }
  }
}

template <typename Scalar>
void require_eps(Scalar eps, std::size_t n, const char* who) {
  // eps * n <= 1 is the feasibility condition of the restricted simplex; the
  // slack admits eps = 1/N computed in floating point.
  const Scalar slack = 4 * std::numeric_limits<Scalar>::epsilon();
  if (!(eps >= 0) || eps * static_cast<Scalar>(n) > Scalar(1) + slack) {
    throw std::invalid_argument(std::string(who) + ": eps must lie in [0, 1/N]");
  }
}

}  // namespace detail
}  // namespace avare
