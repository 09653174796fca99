#include "avare/drivers.hpp"

namespace avare {

void validate(const RunConfig& config, std::size_t n) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("RunConfig: " + msg); };
  if (n < 1) fail("problem has no examples");
  if (config.iterations < 1) fail("iterations must be positive");
  if (config.m < 1 || config.m > n) fail("m must lie in [1, N]");
  if (config.estimator == EstimatorKind::single && config.m != 1) {
    fail("m must be 1 for the single estimator");
  }
  if ((config.sampler == SamplerKind::avare) != config.epsilon.has_value()) {
    fail("an epsilon schedule is required for avare and only for avare");
  }
  if (config.epsilon) {
    config.epsilon->validate();
    if (config.epsilon->n != n) fail("epsilon schedule N differs from the problem size");
  }
  if (config.sampler == SamplerKind::oracle && config.metrics != MetricsMode::full) {
    fail("the oracle sampler needs full metrics");
  }
  if (!(config.h_init >= 0) || !std::isfinite(config.h_init)) fail("h_init must be finite and >= 0");
  if (!(config.divergence_threshold > 0)) fail("divergence_threshold must be positive");
  validate(config.step);
}

DecayFit contraction_diagnostic(const std::vector<double>& mean_dx, double burn_in) {
  if (!(burn_in >= 0 && burn_in < 1)) {
    throw std::invalid_argument("contraction_diagnostic: burn_in in [0, 1)");
  }
  const auto start = static_cast<std::size_t>(burn_in * static_cast<double>(mean_dx.size()));
  std::vector<double> x, y;
  for (std::size_t k = start; k < mean_dx.size(); ++k) {
    x.push_back(static_cast<double>(k + 1));
    y.push_back(mean_dx[k]);
  }
  const LineFit fit = loglog_fit(x, y);
  if (fit.points < 10 || !fit.defined) {
    throw std::invalid_argument("contraction_diagnostic: fewer than 10 usable points");
  }
  DecayFit out;
  out.a_hat = std::exp(fit.intercept);
  out.delta_hat = -fit.slope;
  out.points = fit.points;
  return out;
}

DecayFit contraction_diagnostic(const AggregateTrace& trace, double burn_in) {
  return contraction_diagnostic(trace.dx_norm.mean, burn_in);
}

}  // namespace avare
