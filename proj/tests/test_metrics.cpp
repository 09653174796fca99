#include <doctest.h>

#include <cmath>

#include "avare/avare_sampler.hpp"
#include "avare/metrics.hpp"
#include "support.hpp"

using namespace avare;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Record of a sampler held at p against frozen gradient norms a for T steps.
RunRecord frozen_record(const VectorXd& a, const VectorXd& p, std::size_t steps) {
  RunRecord r;
  r.n = static_cast<std::size_t>(a.size());
  r.full_metrics = true;
  const double c = cost(p, a);
  const double opt = optimal_cost_full_simplex(a);
  for (std::size_t k = 0; k < steps; ++k) {
    r.t.push_back(k + 1);
    r.cost.push_back(c);
    r.opt_cost.push_back(opt);
    for (auto* col : {&r.alpha, &r.eps, &r.cum_regret, &r.subopt, &r.rel_err, &r.dx_norm}) col->push_back(kNaN);
  }
  r.cum_regret = dynamic_regret(r);
  return r;
}

}  // namespace

TEST_CASE("cost") {
  CHECK(cost(vec({1.0 / 3, 2.0 / 3}), vec({1, 2})) == doctest::Approx(9).epsilon(1e-15));
  const VectorXd a = vec({0.5, 3, 0, 1.25});
  CHECK(cost(a / a.sum(), a) == doctest::Approx(optimal_cost_full_simplex(a)).epsilon(1e-14));
  CHECK(cost(VectorXd::Constant(4, 0.25), a) == doctest::Approx(4 * a.squaredNorm()).epsilon(1e-14));
  CHECK_THROWS_AS(cost(vec({1, 0}), vec({1, 1})), std::domain_error);
  CHECK(cost(vec({1, 0}), vec({1, 0})) == 1);
  CHECK_THROWS_AS(cost(vec({1}), vec({1, 0})), std::invalid_argument);
}

TEST_CASE("restricted optimum beats random points of the restricted simplex") {
  RngStream rng(12, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(30);
    const VectorXd a = testing::random_weights(rng, n, 0.1, 0.1);
    const double eps = testing::random_eps(rng, n);
    WeightTable<double> table(a);
    const double best = cost(table.probabilities(eps), a);
    const VectorXd q = testing::random_feasible(rng, n, eps);
    if (eps == 0 && (q.array() == 0).any()) continue;
    REQUIRE(best <= cost(q, a) * (1 + 1e-12));
    REQUIRE(best >= optimal_cost_full_simplex(a) * (1 - 1e-12));
  }
}

TEST_CASE("regret and relative error") {
  const VectorXd a = vec({1, 2, 0.5, 4});
  SUBCASE("uniform on frozen norms grows linearly") {
    const std::size_t steps = 500;
    const auto r = frozen_record(a, VectorXd::Constant(4, 0.25), steps);
    const double per_step = 4 * a.squaredNorm() - a.sum() * a.sum();
    CHECK(r.cum_regret.back() == doctest::Approx(double(steps) * per_step).epsilon(1e-12));
    for (std::size_t k = 1; k < steps; ++k) CHECK(r.cum_regret[k] >= r.cum_regret[k - 1]);
    const auto fit = regret_slope(r, 0.1);
    CHECK(fit.defined);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("oracle has zero regret and no slope") {
    const auto r = frozen_record(a, a / a.sum(), 300);
    for (double v : r.cum_regret) CHECK(std::abs(v) <= 1e-9);
    RunRecord exact = r;
    exact.cost = exact.opt_cost;
    exact.cum_regret = dynamic_regret(exact);
    for (double v : exact.cum_regret) CHECK(v == 0);
    CHECK_FALSE(regret_slope(exact, 0.0).defined);
    for (const auto& e : relative_error(exact)) CHECK(*e == 0);
  }
  SUBCASE("N = 1") {
    const auto r = frozen_record(vec({3}), vec({1}), 10);
    for (double v : r.cum_regret) CHECK(v == 0);
  }
  SUBCASE("relative error of uniform against a single active index") {
    VectorXd one = VectorXd::Zero(10);
    one(0) = 1;
    const auto r = frozen_record(one, VectorXd::Constant(10, 0.1), 3);
    for (const auto& e : relative_error(r)) CHECK(*e == doctest::Approx(9));
    const auto eq = frozen_record(VectorXd::Constant(5, 2.0), VectorXd::Constant(5, 0.2), 3);
    for (const auto& e : relative_error(eq)) CHECK(std::abs(*e) <= 1e-15);
    const auto zero = frozen_record(VectorXd::Zero(3), VectorXd::Constant(3, 1.0 / 3), 3);
    for (const auto& e : relative_error(zero)) CHECK_FALSE(e.has_value());
  }
  SUBCASE("cheap records are rejected") {
    RunRecord r = frozen_record(a, VectorXd::Constant(4, 0.25), 200);
    r.full_metrics = false;
    CHECK_THROWS_AS(dynamic_regret(r), std::invalid_argument);
    CHECK_THROWS_AS(relative_error(r), std::invalid_argument);
    CHECK_THROWS_AS(regret_slope(r, 0.1), std::invalid_argument);
  }
}

TEST_CASE("log-log fits") {
  std::vector<std::uint64_t> t;
  std::vector<double> y;
  for (std::uint64_t k = 1; k <= 1000; ++k) {
    t.push_back(k);
    y.push_back(3.5 * std::pow(double(k), 2.0 / 3));
  }
  const auto fit = regret_slope(t, y, 0.2);
  CHECK(fit.defined);
  CHECK(fit.points == 800);
  CHECK(fit.slope == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.5).epsilon(1e-10));

  CHECK_THROWS_AS(regret_slope(std::vector<std::uint64_t>(t.begin(), t.begin() + 99),
                               std::vector<double>(y.begin(), y.begin() + 99), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(regret_slope(t, y, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(regret_slope(t, y, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(regret_slope(t, std::vector<double>(3), 0.0), std::invalid_argument);

  const auto bare = loglog_fit({1, 2, 4}, {0, -1, 5});
  CHECK_FALSE(bare.defined);
  CHECK(bare.points == 1);
}

TEST_CASE("smoothness and variance ratios") {
  Dataset<double> data;
  data.features.resize(4, 2);
  data.features << 1, 0, 0, 1, -1, 0, 0, -1;
  data.labels = {0, 1, 1, 0};
  const FiniteSumProblem<double> prob(data, ModelKind::logistic, 1.0);
  const auto r = table1_ratios_at(prob, VectorXd(VectorXd::Zero(2)));
  CHECK(r.smoothness == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.variance == doctest::Approx(1.0).epsilon(1e-15));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FiniteSumProblem<double> p(make_synthetic(100, 10, seed), ModelKind::logistic, 1.0);
    const auto t = table1_ratios(p);
    CHECK(t.smoothness >= 1.0);
    CHECK(t.variance >= 1.0);
    // Direct recomputation.
    const VectorXd x = solve_minimizer(p);
    const VectorXd l = p.smoothness_all();
    const VectorXd g = p.gradient_norms(x);
    CHECK(t.smoothness == doctest::Approx(100 * l.maxCoeff() / l.sum()));
    CHECK(t.variance == doctest::Approx(100 * g.squaredNorm() / (g.sum() * g.sum())));
  }
}

TEST_CASE("aggregation over seeds") {
  std::vector<RunRecord> rs(3);
  const double vals[3][2] = {{1, kNaN}, {2, kNaN}, {6, 4}};
  for (int s = 0; s < 3; ++s) {
    auto& r = rs[static_cast<std::size_t>(s)];
    r.n = 10;
    r.batch = 2;
    r.t = {1, 2};
    r.cost = {vals[s][0], vals[s][1]};
    for (auto* col : {&r.alpha, &r.eps, &r.opt_cost, &r.cum_regret, &r.subopt, &r.rel_err, &r.dx_norm})
      *col = {kNaN, kNaN};
  }
  const auto agg = aggregate(rs);
  CHECK(agg.seeds == 3);
  CHECK(agg.passes == std::vector<double>{0.2, 0.4});
  CHECK(agg.cost.mean[0] == 3);
  CHECK(agg.cost.std[0] == doctest::Approx(std::sqrt(7.0)));
  CHECK(agg.cost.mean[1] == 4);
  CHECK(agg.cost.std[1] == 0);
  CHECK(std::isnan(agg.alpha.mean[0]));

  rs[1].t.push_back(3);
  CHECK_THROWS_AS(aggregate(rs), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}
