#include <doctest.h>

#include <cmath>

#include "safebo/problems.hpp"

using namespace safebo;

TEST_CASE("toy_1d start point is strictly feasible") {
  const SyntheticProblem p = toy_1d();
  for (const auto& c : p.constraints) CHECK(c(p.x0) > 0.0);
}

TEST_CASE("toy_1d safe optimum matches an independent dense scan") {
  const SyntheticProblem p = toy_1d();
  // Independent verification: scan the connected feasible interval
  // around 0 directly (1-D, so the component is an interval).
  double lo = 0.0, hi = 0.0;
  const double step = 1e-4;
  for (double x = 0.0; x >= -5.0; x -= step) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(1, x);
    if (!p.feasible(v)) break;
    lo = x;
  }
  for (double x = 0.0; x <= 5.0; x += step) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(1, x);
    if (!p.feasible(v)) break;
    hi = x;
  }
  CHECK(lo < -1.5);
  CHECK(hi > 0.5);
  double best = std::numeric_limits<double>::infinity();
  double best_x = 0.0;
  for (double x = lo; x <= hi; x += step) {
    const double f = p.cost(Eigen::VectorXd::Constant(1, x));
    if (f < best) {
      best = f;
      best_x = x;
    }
  }
  CHECK(p.optimum_cost == doctest::Approx(best).epsilon(1e-6));
  CHECK(p.optimum_x[0] == doctest::Approx(best_x).epsilon(1e-3));
  CHECK(p.safe_cost_range > 0.0);
}

TEST_CASE("toy_1d feasible set is disjoint") {
  const SyntheticProblem p = toy_1d();
  int components = 0;
  bool inside = false;
  for (double x = -5.0; x <= 5.0; x += 1e-3) {
    const bool f = p.feasible(Eigen::VectorXd::Constant(1, x));
    if (f && !inside) ++components;
    inside = f;
  }
  CHECK(components >= 2);
}

TEST_CASE("toy_2d constructs with a verified interior optimum") {
  const SyntheticProblem p = toy_2d();
  CHECK(p.dim == 2);
  for (const auto& c : p.constraints) CHECK(c(p.x0) > 0.0);
  CHECK(p.feasible(p.optimum_x));
  CHECK(p.cost(p.optimum_x) == doctest::Approx(p.optimum_cost));
}

TEST_CASE("noiseless queries are pure; out-of-domain queries throw") {
  const SyntheticProblem p = toy_1d(0.0);
  ProblemOracle oracle(p, 5);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
  const auto a = oracle.query(x);
  const auto b = oracle.query(x);
  CHECK(a == b);
  CHECK(a == *oracle.truth(x));
  CHECK_THROWS_AS(oracle.query(Eigen::VectorXd::Constant(1, 9.0)), std::invalid_argument);
}

TEST_CASE("fixed seeds reproduce the noise sequence") {
  const SyntheticProblem p = toy_1d(0.5);
  ProblemOracle a(p, 123), b(p, 123), c(p, 124);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -0.7);
  const auto qa = a.query(x);
  CHECK(qa == b.query(x));
  CHECK(qa != c.query(x));
}

TEST_CASE("query noise averages out (CLT check)") {
  const double noise = 0.5;
  const SyntheticProblem p = toy_1d(noise);
  ProblemOracle oracle(p, 99);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.2);
  const auto truth = *oracle.truth(x);
  const int reps = 10000;
  std::vector<double> sums(truth.size(), 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto obs = oracle.query(x);
    for (std::size_t i = 0; i < obs.size(); ++i) sums[i] += obs[i];
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    CHECK(std::abs(sums[i] / reps - truth[i]) < 3.0 * noise / 100.0);
  }
}

TEST_CASE("regret metrics") {
  const SyntheticProblem p = toy_1d();

  SUBCASE("history containing the optimum has zero regret") {
    ExperimentRecord rec;
    rec.x = p.optimum_x;
    const RegretMetrics m = regret_metrics({rec}, p);
    CHECK(m.simple_regret == doctest::Approx(0.0));
    CHECK(m.violations == 0);
  }

  SUBCASE("all-infeasible history reports +inf regret and full violations") {
    ExperimentRecord rec;
    rec.x = Eigen::VectorXd::Constant(1, 2.5);  // between the feasible bands
    REQUIRE(!p.feasible(rec.x));
    const RegretMetrics m = regret_metrics({rec, rec, rec}, p);
    CHECK(m.violations == 3);
    CHECK(std::isinf(m.simple_regret));
  }

  SUBCASE("hand-built three-point history") {
    std::vector<ExperimentRecord> hist(3);
    hist[0].x = Eigen::VectorXd::Constant(1, 0.0);
    hist[1].x = Eigen::VectorXd::Constant(1, -0.5);
    hist[2].x = Eigen::VectorXd::Constant(1, 2.5);  // infeasible
    const RegretMetrics m = regret_metrics(hist, p);
    CHECK(m.violations == 1);
    const double best = std::min(p.cost(hist[0].x), p.cost(hist[1].x));
    CHECK(m.simple_regret == doctest::Approx(best - p.optimum_cost));
    CHECK(m.simple_regret >= 0.0);
  }
}
