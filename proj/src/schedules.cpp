#include "avare/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace avare {
namespace {

constexpr double kSlack = 1e-12;

[[noreturn]] void reject(const std::string& msg) { throw std::invalid_argument(msg); }

double decreasing_part(const EpsilonSchedule& s, std::uint64_t t) {
  const double steps =
      s.mode == EpsilonMode::single ? double(t - 1) : double(s.m) * double(t - 1);
  // (1/C) (C / (C + steps))^{d/3}; equal to the textbook form and exact at t = 1.
  return (1.0 / s.c) * std::pow(s.c / (s.c + steps), s.delta / 3.0);
}

}  // namespace

EpsilonSchedule EpsilonSchedule::single(std::size_t n, double c, double delta) {
  EpsilonSchedule s{EpsilonMode::single, n, c, delta, 1, 0.0};
  s.validate();
  return s;
}

EpsilonSchedule EpsilonSchedule::minibatch(std::size_t n, double c, std::size_t m, double delta) {
  EpsilonSchedule s{EpsilonMode::minibatch, n, c, delta, m, 0.0};
  s.validate();
  return s;
}

EpsilonSchedule EpsilonSchedule::constant_step(std::size_t n, std::size_t m,
                                               std::optional<double> p_min,
                                               std::optional<double> c, double delta) {
  const double nn = double(n);
  const double pm = p_min.value_or(1.0 / (5.0 * nn));
  const double cc = c.value_or(1.0 / (1.0 / nn - pm));
  EpsilonSchedule s{EpsilonMode::constant_step, n, cc, delta, m, pm};
  s.validate();
  return s;
}

void EpsilonSchedule::validate() const {
  if (n < 1) reject("epsilon schedule: N must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) reject("epsilon schedule: delta must lie in (0, 1]");
  if (m < 1) reject("epsilon schedule: batch size must be at least 1");
  if (!(c > 0.0) || !std::isfinite(c)) reject("epsilon schedule: C must be positive and finite");
  const double nn = double(n);
  if (mode == EpsilonMode::constant_step) {
    if (!(p_min >= 0.0 && p_min < 1.0 / nn)) reject("epsilon schedule: p_min must lie in [0, 1/N)");
    if (c > (1.0 + kSlack) / (1.0 / nn - p_min)) {
      reject("epsilon schedule: constant-step mode needs C <= 1 / (1/N - p_min)");
    }
  } else if (c < nn * (1.0 - kSlack)) {
    reject("epsilon schedule: C must be at least N");
  }
}

double epsilon_at(const EpsilonSchedule& s, std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("epsilon_at: t starts at 1");
  const double eps = decreasing_part(s, t);
  const double value = s.mode == EpsilonMode::constant_step ? eps + s.p_min : eps;
  // C within the validation slack of its bound can overshoot 1/N by an ulp.
  return std::min(value, 1.0 / double(s.n));
}

std::optional<std::uint64_t> t0_of(const EpsilonSchedule& s) {
  const double target = 1.0 / (2.0 * double(s.n));
  const double floor = s.mode == EpsilonMode::constant_step ? s.p_min : 0.0;
  if (floor >= target) return std::nullopt;
  if (epsilon_at(s, 1) <= target) return 1;
  // Solve (1/C)(C/(C + k))^{d/3} = target - floor for k = steps taken, then
  // correct the rounding by direct evaluation.
  const double want = target - floor;
  const double ratio = std::pow(1.0 / (s.c * want), 3.0 / s.delta);  // (C + k) / C
  const double k = s.c * (ratio - 1.0);
  const double per_step = s.mode == EpsilonMode::single ? 1.0 : double(s.m);
  auto t = static_cast<std::uint64_t>(std::max(1.0, std::floor(k / per_step) + 1.0));
  while (t > 1 && epsilon_at(s, t - 1) <= target) --t;
  while (epsilon_at(s, t) > target) ++t;
  return t;
}

void validate(const StepSchedule& s) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PowerDecayStep>) {
          if (!(v.e > 0.0 && v.f >= 1.0 && v.beta > 0.0 && v.beta <= 1.0)) {
            reject("power-decay step: need E > 0, F >= 1, beta in (0, 1]");
          }
        } else if constexpr (std::is_same_v<T, ExperimentStep>) {
          if (!(v.m >= 1 && v.n >= 1 && v.l > 0.0 && v.mu > 0.0)) {
            reject("experiment step: need m, N >= 1 and L, mu > 0");
          }
        } else {
          if (!(v.alpha > 0.0)) reject("constant step: alpha must be positive");
        }
      },
      s);
}

double alpha_at(const StepSchedule& s, std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("alpha_at: t starts at 1");
  validate(s);
  return std::visit(
      [t](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PowerDecayStep>) {
          return v.e / std::pow(v.f + double(t) - 1.0, v.beta);
        } else if constexpr (std::is_same_v<T, ExperimentStep>) {
          const double m = double(v.m);
          return m / (2.0 * double(v.n) * v.l + m * v.mu * double(t));
        } else {
          return v.alpha;
        }
      },
      s);
}

}  // namespace avare
