#include "avare/metrics.hpp"

#include <cmath>

namespace avare {

void RunRecord::reserve(std::size_t steps) {
  t.reserve(steps);
  for (auto* col : {&alpha, &eps, &cost, &opt_cost, &cum_regret, &subopt, &rel_err, &dx_norm}) {
    col->reserve(steps);
  }
}

std::vector<double> dynamic_regret(const RunRecord& record) {
  if (!record.full_metrics) {
    throw std::invalid_argument("dynamic_regret: record was produced without full metrics");
  }
  std::vector<double> out(record.steps());
  double acc = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    acc += record.cost[k] - record.opt_cost[k];
    out[k] = acc;
  }
  return out;
}

std::vector<std::optional<double>> relative_error(const RunRecord& record) {
  if (!record.full_metrics) {
    throw std::invalid_argument("relative_error: record was produced without full metrics");
  }
  std::vector<std::optional<double>> out(record.steps());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (record.opt_cost[k] > 0) out[k] = (record.cost[k] - record.opt_cost[k]) / record.opt_cost[k];
  }
  return out;
}

LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("loglog_fit: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  LineFit fit;
  fit.points = k;
  if (k < 2) return fit;
  const double kn = static_cast<double>(k);
  const double den = kn * sxx - sx * sx;
  if (!(den > 0)) return fit;
  fit.slope = (kn * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / kn;
  fit.defined = true;
  return fit;
}

LineFit regret_slope(const std::vector<std::uint64_t>& t, const std::vector<double>& cum_regret,
                     double burn_in) {
  if (t.size() != cum_regret.size()) throw std::invalid_argument("regret_slope: size mismatch");
  if (!(burn_in >= 0 && burn_in < 1)) throw std::invalid_argument("regret_slope: burn_in in [0, 1)");
  const auto start = static_cast<std::size_t>(burn_in * static_cast<double>(t.size()));
  if (t.size() - start < 100) {
    throw std::invalid_argument("regret_slope: fewer than 100 points after burn-in");
  }
  std::vector<double> x, y;
  for (std::size_t k = start; k < t.size(); ++k) {
    x.push_back(static_cast<double>(t[k]));
    y.push_back(cum_regret[k]);
  }
  LineFit fit = loglog_fit(x, y);
  if (fit.points < 100) fit.defined = false;
  return fit;
}

LineFit regret_slope(const RunRecord& record, double burn_in) {
  if (!record.full_metrics) {
    throw std::invalid_argument("regret_slope: record was produced without full metrics");
  }
  return regret_slope(record.t, record.cum_regret, burn_in);
}

namespace {

AggregateColumn aggregate_column(const std::vector<RunRecord>& records,
                                 std::vector<double> RunRecord::*column) {
  const std::size_t steps = records.front().steps();
  AggregateColumn out;
  out.mean.assign(steps, kNaN);
  out.std.assign(steps, kNaN);
  for (std::size_t k = 0; k < steps; ++k) {
    double sum = 0;
    std::size_t count = 0;
    for (const auto& r : records) {
      const double v = (r.*column)[k];
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double ss = 0;
    for (const auto& r : records) {
      const double v = (r.*column)[k];
      if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    out.mean[k] = mean;
    out.std[k] = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
  }
  return out;
}

}  // namespace

AggregateTrace aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  const auto& first = records.front();
  for (const auto& r : records) {
    if (r.steps() != first.steps() || r.n != first.n || r.batch != first.batch) {
      throw std::invalid_argument("aggregate: records differ in length or shape");
    }
  }
  AggregateTrace out;
  out.seeds = records.size();
  out.t = first.t;
  out.passes.resize(out.t.size());
  for (std::size_t k = 0; k < out.t.size(); ++k) {
    out.passes[k] = static_cast<double>(out.t[k]) * static_cast<double>(first.batch) /
                    static_cast<double>(first.n);
  }
  out.alpha = aggregate_column(records, &RunRecord::alpha);
  out.eps = aggregate_column(records, &RunRecord::eps);
  out.cost = aggregate_column(records, &RunRecord::cost);
  out.opt_cost = aggregate_column(records, &RunRecord::opt_cost);
  out.cum_regret = aggregate_column(records, &RunRecord::cum_regret);
  out.subopt = aggregate_column(records, &RunRecord::subopt);
  out.rel_err = aggregate_column(records, &RunRecord::rel_err);
  out.dx_norm = aggregate_column(records, &RunRecord::dx_norm);
  return out;
}

}  // namespace avare
