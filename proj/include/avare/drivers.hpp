#pragma once

// SGD / SGLD loops with pluggable index samplers and gradient estimators.
//
//   x_{t+1} = x_t - alpha_t ghat_t            (sgd)
//   x_{t+1} = x_t - alpha_t ghat_t + xi_t     (sgld, xi_t ~ N(0, 2 alpha_t I))
//
// The Avare sampler keeps one last-seen gradient norm per example and refreshes
// it for every index it draws.

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "avare/avare_sampler.hpp"
#include "avare/core.hpp"
#include "avare/estimators.hpp"
#include "avare/metrics.hpp"
#include "avare/problems.hpp"
#include "avare/rng.hpp"
#include "avare/schedules.hpp"
#include "avare/without_replacement.hpp"

namespace avare {

enum class SamplerKind { avare, uniform, oracle };
enum class EstimatorKind { single, minibatch_wr, minibatch_wor };
enum class Algorithm { sgd, sgld };
enum class MetricsMode { cheap, full };

// Stream ids under the run seed.
inline constexpr std::uint64_t kSamplerStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;

struct RunConfig {
  SamplerKind sampler = SamplerKind::avare;
  EstimatorKind estimator = EstimatorKind::single;
  std::size_t m = 1;
  std::uint64_t iterations = 0;
  // Present exactly when the sampler is avare.
  std::optional<EpsilonSchedule> epsilon;
  StepSchedule step = ConstantStep{};
  std::uint64_t seed = 0;
  MetricsMode metrics = MetricsMode::cheap;
  Algorithm algorithm = Algorithm::sgd;
  // Initial value of every stored gradient norm.
  double h_init = 0.0;
  // Starting point; zero when empty.
  std::vector<double> x0;
  // Optimal value of f, enables the suboptimality column.
  std::optional<double> f_star;
  double divergence_threshold = 1e12;
  bool record_indices = false;
  std::uint64_t config_digest = 0;
};

// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& config, std::size_t n);

/// Index distribution used at one step. prepare() fixes the distribution for
/// step t; draw/prob/draw_batch then refer to it until the next prepare().
template <typename Scalar>
class StepSampler {
 public:
  virtual ~StepSampler() = default;
  // current_norms holds all N gradient norms at x_t when metrics are full.
  virtual void prepare(std::uint64_t t, const Vector<Scalar>* current_norms) = 0;
  virtual std::size_t draw(RngStream& rng) = 0;
  virtual double prob(std::size_t i) const = 0;
  virtual BatchDraw draw_batch(std::size_t m, RngStream& rng) = 0;
  // Explicit distribution for the current step, O(N).
  virtual Vector<Scalar> distribution() const = 0;
  // Freshly computed gradient norm of a drawn index.
  virtual void observe(std::size_t, Scalar) {}
  // Floor of the current distribution, NaN when not applicable.
  virtual double current_eps() const { return kNaN; }
};

template <typename Scalar>
class UniformSampler final : public StepSampler<Scalar> {
 public:
  explicit UniformSampler(std::size_t n) : n_(n) {
    if (n < 1) throw std::invalid_argument("UniformSampler: N must be positive");
  }
  void prepare(std::uint64_t, const Vector<Scalar>*) override {}
  std::size_t draw(RngStream& rng) override { return static_cast<std::size_t>(rng.index(n_)); }
  double prob(std::size_t) const override { return 1.0 / static_cast<double>(n_); }
  BatchDraw draw_batch(std::size_t m, RngStream& rng) override {
    return draw_without_replacement(
        n_, m, [&](RngStream& g) { return draw(g); }, [&](std::size_t i) { return prob(i); }, rng);
  }
  Vector<Scalar> distribution() const override {
    return Vector<Scalar>::Constant(static_cast<Eigen::Index>(n_),
                                    Scalar(1) / static_cast<Scalar>(n_));
  }

 private:
  std::size_t n_;
};

/// Samples from the per-step optimum p_i proportional to the current gradient
/// norms; needs all N norms every step (full metrics).
template <typename Scalar>
class OracleSampler final : public StepSampler<Scalar> {
 public:
  explicit OracleSampler(std::size_t n) : n_(n) {
    if (n < 1) throw std::invalid_argument("OracleSampler: N must be positive");
  }
  void prepare(std::uint64_t, const Vector<Scalar>* current_norms) override {
    if (current_norms == nullptr) {
      throw std::logic_error("OracleSampler: needs all gradient norms (full metrics mode)");
    }
    const auto& a = *current_norms;
    if (static_cast<std::size_t>(a.size()) != n_) {
      throw std::invalid_argument("OracleSampler: one norm per example expected");
    }
    const double total = static_cast<double>(a.sum());
    p_.resize(n_);
    cdf_.resize(n_);
    double acc = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      p_[i] = total > 0 ? static_cast<double>(a(static_cast<Eigen::Index>(i))) / total
                        : 1.0 / static_cast<double>(n_);
      acc += p_[i];
      cdf_[i] = acc;
    }
  }
  std::size_t draw(RngStream& rng) override {
    const double u = rng.uniform_open_closed() * cdf_.back();
    std::size_t i = static_cast<std::size_t>(std::lower_bound(cdf_.begin(), cdf_.end(), u) -
                                             cdf_.begin());
    if (i >= n_) i = n_ - 1;
    // Step over zero-probability indices that share a cdf value.
    while (p_[i] <= 0 && i + 1 < n_) ++i;
    return i;
  }
  double prob(std::size_t i) const override { return p_[i]; }
  BatchDraw draw_batch(std::size_t m, RngStream& rng) override {
    return draw_without_replacement(
        n_, m, [&](RngStream& g) { return draw(g); }, [&](std::size_t i) { return prob(i); }, rng);
  }
  Vector<Scalar> distribution() const override {
    Vector<Scalar> out(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) out(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(p_[i]);
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> p_;
  std::vector<double> cdf_;
};

template <typename Scalar>
class AvareSampler final : public StepSampler<Scalar> {
 public:
  AvareSampler(std::size_t n, EpsilonSchedule schedule, Scalar h_init)
      : table_(Vector<Scalar>::Constant(static_cast<Eigen::Index>(n), h_init)),
        schedule_(schedule) {
    schedule_.validate();
    if (schedule_.n != n) throw std::invalid_argument("AvareSampler: schedule built for another N");
  }
  void prepare(std::uint64_t t, const Vector<Scalar>*) override {
    eps_ = static_cast<Scalar>(epsilon_at(schedule_, t));
    if (eps_ * static_cast<Scalar>(table_.size()) > Scalar(1) + Scalar(1e-12)) {
      throw std::logic_error("AvareSampler: eps_t above 1/N");
    }
    rl_ = table_.find_rho(eps_);
    if (rl_.degenerate) throw std::domain_error("AvareSampler: all stored norms zero with eps = 0");
  }
  std::size_t draw(RngStream& rng) override { return table_.sample(rl_, eps_, rng); }
  double prob(std::size_t i) const override {
    return static_cast<double>(table_.probability(i, rl_, eps_));
  }
  BatchDraw draw_batch(std::size_t m, RngStream& rng) override {
    return draw_without_replacement(
        table_.size(), m, [&](RngStream& g) { return draw(g); },
        [&](std::size_t i) { return prob(i); }, rng);
  }
  Vector<Scalar> distribution() const override { return table_.probabilities(eps_); }
  void observe(std::size_t i, Scalar norm) override { table_.update(i, norm); }
  double current_eps() const override { return static_cast<double>(eps_); }

  const WeightTable<Scalar>& table() const noexcept { return table_; }

 private:
  WeightTable<Scalar> table_;
  EpsilonSchedule schedule_;
  Scalar eps_ = 0;
  RhoLambda<Scalar> rl_;
};

template <typename Scalar>
std::unique_ptr<StepSampler<Scalar>> make_sampler(const RunConfig& config, std::size_t n) {
  switch (config.sampler) {
    case SamplerKind::uniform:
      return std::make_unique<UniformSampler<Scalar>>(n);
    case SamplerKind::oracle:
      return std::make_unique<OracleSampler<Scalar>>(n);
    case SamplerKind::avare:
      return std::make_unique<AvareSampler<Scalar>>(n, *config.epsilon,
                                                    static_cast<Scalar>(config.h_init));
  }
  throw std::invalid_argument("make_sampler: unknown sampler kind");
}

template <typename Scalar>
struct GradientStep {
  Vector<Scalar> ghat;
  std::vector<std::size_t> indices;
  // Gradient norm of each drawn index at the evaluation point.
  std::vector<Scalar> norms;
};

/// One estimate of grad f(x) from a prepared sampler. Only the drawn examples'
/// gradients are evaluated.
template <typename Scalar>
GradientStep<Scalar> estimate_gradient(const FiniteSumProblem<Scalar>& prob, const Vector<Scalar>& x,
                                       StepSampler<Scalar>& sampler, EstimatorKind kind,
                                       std::size_t m, RngStream& rng) {
  const auto dim = static_cast<Eigen::Index>(prob.dim());
  GradientSample<Scalar> batch;
  if (kind == EstimatorKind::minibatch_wor) {
    BatchDraw draw = sampler.draw_batch(m, rng);
    batch.indices = std::move(draw.indices);
    batch.weights.resize(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      batch.weights(static_cast<Eigen::Index>(j)) = static_cast<Scalar>(draw.weights[j]);
    }
  } else {
    const std::size_t count = kind == EstimatorKind::single ? 1 : m;
    batch.indices.resize(count);
    batch.weights.resize(static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) {
      batch.indices[j] = sampler.draw(rng);
      batch.weights(static_cast<Eigen::Index>(j)) = static_cast<Scalar>(sampler.prob(batch.indices[j]));
    }
  }
  const auto count = static_cast<Eigen::Index>(batch.indices.size());
  batch.gradients.resize(count, dim);
  GradientStep<Scalar> out;
  out.norms.resize(batch.indices.size());
  Vector<Scalar> g(dim);
  for (Eigen::Index j = 0; j < count; ++j) {
    prob.gradient_into(x, batch.indices[static_cast<std::size_t>(j)], g);
    batch.gradients.row(j) = g.transpose();
    out.norms[static_cast<std::size_t>(j)] = g.norm();
  }
  switch (kind) {
    case EstimatorKind::single:
      out.ghat = single_estimate(batch.gradients.row(0).transpose(), batch.weights(0));
      break;
    case EstimatorKind::minibatch_wr:
      out.ghat = minibatch_wr_estimate(batch);
      break;
    case EstimatorKind::minibatch_wor:
      out.ghat = minibatch_wor_estimate(batch);
      break;
  }
  out.indices = std::move(batch.indices);
  return out;
}

/// Executes config.iterations steps and returns the per-step trace. Throws
/// DivergenceError if the iterate becomes non-finite or leaves the ball of
/// radius divergence_threshold.
template <typename Scalar>
RunRecord run(const FiniteSumProblem<Scalar>& prob, const RunConfig& config) {
  const std::size_t n = prob.size();
  validate(config, n);
  const auto started = std::chrono::steady_clock::now();
  const bool full = config.metrics == MetricsMode::full;
  const auto dim = static_cast<Eigen::Index>(prob.dim());

  RunRecord rec;
  rec.seed = config.seed;
  rec.config_digest = config.config_digest;
  rec.n = n;
  rec.batch = config.estimator == EstimatorKind::single ? 1 : config.m;
  rec.full_metrics = full;
  rec.reserve(config.iterations);

  Vector<Scalar> x = Vector<Scalar>::Zero(dim);
  if (!config.x0.empty()) {
    if (static_cast<Eigen::Index>(config.x0.size()) != dim) {
      throw std::invalid_argument("run: x0 has the wrong dimension");
    }
    for (Eigen::Index k = 0; k < dim; ++k) x(k) = static_cast<Scalar>(config.x0[static_cast<std::size_t>(k)]);
  }

  auto sampler = make_sampler<Scalar>(config, n);
  RngStream sample_rng(config.seed, kSamplerStream);
  RngStream noise_rng(config.seed, kNoiseStream);
  Vector<Scalar> norms;
  double regret = 0;

  for (std::uint64_t t = 1; t <= config.iterations; ++t) {
    const double alpha = alpha_at(config.step, t);
    if (full) norms = prob.gradient_norms(x);
    sampler->prepare(t, full ? &norms : nullptr);

    rec.t.push_back(t);
    rec.alpha.push_back(alpha);
    rec.eps.push_back(sampler->current_eps());
    if (full) {
      const double c = static_cast<double>(cost(sampler->distribution(), norms));
      const double s = static_cast<double>(norms.sum());
      const double opt = s * s;
      regret += c - opt;
      rec.cost.push_back(c);
      rec.opt_cost.push_back(opt);
      rec.cum_regret.push_back(regret);
      rec.rel_err.push_back(opt > 0 ? (c - opt) / opt : kNaN);
    } else {
      rec.cost.push_back(kNaN);
      rec.opt_cost.push_back(kNaN);
      rec.cum_regret.push_back(kNaN);
      rec.rel_err.push_back(kNaN);
    }
    rec.subopt.push_back(config.f_star ? static_cast<double>(prob.full_loss(x)) - *config.f_star
                                       : kNaN);

    GradientStep<Scalar> step =
        estimate_gradient(prob, x, *sampler, config.estimator, config.m, sample_rng);
    for (std::size_t j = 0; j < step.indices.size(); ++j) sampler->observe(step.indices[j], step.norms[j]);
    if (config.record_indices) {
      for (std::size_t i : step.indices) rec.indices.push_back(static_cast<std::uint32_t>(i));
    }

    Vector<Scalar> dx = -static_cast<Scalar>(alpha) * step.ghat;
    if (config.algorithm == Algorithm::sgld) {
      const double sd = std::sqrt(2.0 * alpha);
      for (Eigen::Index k = 0; k < dim; ++k) dx(k) += static_cast<Scalar>(noise_rng.normal(0.0, sd));
    }
    x += dx;
    rec.dx_norm.push_back(static_cast<double>(dx.norm()));

    const double xn = static_cast<double>(x.norm());
    if (!std::isfinite(xn) || xn > config.divergence_threshold) {
      std::ostringstream msg;
      msg << "run diverged at step " << t << " (|x| = " << xn << ")";
      throw DivergenceError(msg.str(), t);
    }
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

struct DecayFit {
  // E|x_{t+1} - x_t| ~ a_hat t^{-delta_hat}
  double a_hat = 0;
  double delta_hat = 0;
  std::size_t points = 0;
};

/// Log-log fit of a step-length series indexed t = 1, 2, ..., skipping the
/// first burn_in fraction. Throws with fewer than 10 usable points.
DecayFit contraction_diagnostic(const std::vector<double>& mean_dx, double burn_in = 0.0);
DecayFit contraction_diagnostic(const AggregateTrace& trace, double burn_in = 0.0);

}  // namespace avare
