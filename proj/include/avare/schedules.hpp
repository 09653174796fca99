#pragma once

#include <cstdint>
#include <optional>
#include <variant>

namespace avare {

enum class EpsilonMode { single, minibatch, constant_step };

/// Floor sequence eps_t for the restricted simplex.
///
///   single:        1 / (C^{1-d/3} (C + t - 1)^{d/3})
///   minibatch:     1 / (C^{1-d/3} (C + m (t - 1))^{d/3})
///   constant_step: minibatch value + p_min
///
/// The decreasing modes need C >= N so that eps_1 <= 1/N; constant-step mode
/// needs C <= 1 / (1/N - p_min) for the same reason.
struct EpsilonSchedule {
  EpsilonMode mode = EpsilonMode::single;
  std::size_t n = 1;
  double c = 1.0;
  double delta = 1.0;
  std::size_t m = 1;
  double p_min = 0.0;

  static EpsilonSchedule single(std::size_t n, double c, double delta = 1.0);
  static EpsilonSchedule minibatch(std::size_t n, double c, std::size_t m, double delta = 1.0);
  // Defaults: p_min = 1/(5N), C = 1 / (1/N - p_min).
  static EpsilonSchedule constant_step(std::size_t n, std::size_t m = 1,
                                       std::optional<double> p_min = std::nullopt,
                                       std::optional<double> c = std::nullopt,
                                       double delta = 1.0);

  // Throws std::invalid_argument on a parameter set violating the invariants.
  void validate() const;
};

double epsilon_at(const EpsilonSchedule& s, std::uint64_t t);

/// First step with eps_t <= 1/(2N), or nullopt if the schedule never gets there.
std::optional<std::uint64_t> t0_of(const EpsilonSchedule& s);

struct PowerDecayStep {
  double e = 1.0;
  double f = 1.0;
  double beta = 1.0;
};

// m / (2 N L + m mu t)
struct ExperimentStep {
  std::size_t m = 1;
  std::size_t n = 1;
  double l = 1.0;
  double mu = 1.0;
};

struct ConstantStep {
  double alpha = 0.01;
};

using StepSchedule = std::variant<PowerDecayStep, ExperimentStep, ConstantStep>;

void validate(const StepSchedule& s);
double alpha_at(const StepSchedule& s, std::uint64_t t);

}  // namespace avare
