#include <doctest.h>

#include <cmath>

#include "safebo/problems.hpp"
#include "safebo/safe_loop.hpp"

using namespace safebo;

namespace {

// Fixed-output oracle for plumbing tests.
class StubOracle : public Oracle {
 public:
  StubOracle(int dim, std::vector<double> outputs) : dim_(dim), outputs_(std::move(outputs)) {}

  int input_dim() const override { return dim_; }
  int num_constraints() const override { return static_cast<int>(outputs_.size()) - 1; }
  std::vector<double> query(const Eigen::VectorXd&) override {
    ++queries;
    return outputs_;
  }

  int queries = 0;

 private:
  int dim_;
  std::vector<double> outputs_;
};

LoopConfig toy_config(const SyntheticProblem& prob, std::uint64_t seed, int budget = 5) {
  LoopConfig lc;
  lc.domain = prob.domain;
  lc.domain.grid_points_per_dim = 201;
  lc.x0 = prob.x0;
  lc.cost_kernel = rbf(0.5, 80.0);
  lc.constraint_kernels.assign(prob.constraints.size(), rbf(0.5, 80.0));
  lc.cost_noise_std = 0.1;
  lc.constraint_noise_std.assign(prob.constraints.size(), 0.1);
  lc.budget = budget;
  lc.seed = seed;
  lc.acq.safety = SafetyMode::Barrier;
  lc.acq.tau = 1e-3;
  return lc;
}

}  // namespace

TEST_CASE("domain invariants") {
  CHECK_THROWS_AS(Domain({{1.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(Domain({{2.0, 1.0}}), std::invalid_argument);
  Domain big({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, 99, 2);
  big.grid_points_per_dim = 1001;  // 1e9 points, beyond the cap
  CHECK_THROWS_AS(big.validate(), std::invalid_argument);

  const Domain d({{-1.0, 3.0}}, 5, 0);
  const Grid g = make_grid(d);
  CHECK(g.size() == 5);
  CHECK(g.points(0, 0) == -1.0);
  CHECK(g.points(4, 0) == 3.0);
  CHECK(g.points(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("init queries once and conditions every gp") {
  StubOracle oracle(1, {1.0, 2.0, 3.0});
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 11, 0);
  lc.x0 = Eigen::VectorXd::Zero(1);
  lc.constraint_kernels = {rbf(1.0, 1.0), rbf(1.0, 1.0)};
  lc.constraint_noise_std = {0.1, 0.1};
  const SafeBoState state = init(oracle, lc);
  CHECK(oracle.queries == 1);
  CHECK(state.n == 1);
  CHECK(state.cost_gp.size() == 1);
  CHECK(state.constraint_gps[0].size() == 1);
  CHECK(state.constraint_gps[1].size() == 1);
  CHECK(state.history.size() == 1);
  CHECK(state.warnings.empty());
}

TEST_CASE("init rejects x0 outside the bounds before any query") {
  StubOracle oracle(1, {1.0, 2.0});
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 11, 0);
  lc.x0 = Eigen::VectorXd::Constant(1, 5.0);
  lc.constraint_kernels = {rbf(1.0, 1.0)};
  CHECK_THROWS_AS(init(oracle, lc), std::invalid_argument);
  CHECK(oracle.queries == 0);
}

TEST_CASE("init warns when the observed start point looks unsafe") {
  StubOracle oracle(1, {1.0, -2.0});
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 11, 0);
  lc.x0 = Eigen::VectorXd::Zero(1);
  lc.constraint_kernels = {rbf(1.0, 1.0)};
  lc.constraint_noise_std = {0.1};
  const SafeBoState state = init(oracle, lc);
  REQUIRE(state.warnings.size() == 1);
  CHECK(state.warnings[0].find("unsafe") != std::string::npos);
}

TEST_CASE("safe set is empty under a zero-mean prior with boundary data") {
  StubOracle oracle(1, {0.0, 0.0});  // constraint observed exactly at the boundary
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 101, 0);
  lc.x0 = Eigen::VectorXd::Zero(1);
  lc.constraint_kernels = {rbf(0.3, 4.0)};
  lc.constraint_noise_std = {0.1};
  const SafeBoState state = init(oracle, lc);
  const SafeSetReport report = safe_set(state);
  CHECK(report.fraction_safe == 0.0);
}

TEST_CASE("safe set membership via a degenerate linear posterior") {
  // One noiseless observation of a linear-kernel GP pins the posterior to
  // mean(x) = x with zero variance, so membership is exactly x > 0. The
  // 100-point grid on [-1, 1] does not contain 0, leaving 50 of 100
  // members regardless of beta.
  StubOracle oracle(1, {0.0, 1.0});
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 100, 0);
  lc.x0 = Eigen::VectorXd::Ones(1);
  lc.constraint_kernels = {linear(1.0, 0.0)};
  lc.constraint_noise_std = {0.0};
  lc.acq.beta_constraint = fixed_beta(1e-30);
  SafeBoState state = init(oracle, lc);
  const SafeSetReport report = safe_set(state);
  CHECK(report.fraction_safe == doctest::Approx(0.5));
}

TEST_CASE("conditioning on a noiseless feasible point makes it a member") {
  const SyntheticProblem prob = toy_1d(0.0);
  ProblemOracle oracle(prob, 3);
  LoopConfig lc = toy_config(prob, 3);
  lc.cost_noise_std = 0.0;
  lc.constraint_noise_std = {0.0, 0.0};
  const SafeBoState state = init(oracle, lc);
  const SafeSetReport report = safe_set(state);
  const Grid grid = make_grid(state.domain);
  // x0 = 0 lies on the odd grid exactly
  Eigen::Index x0_idx = -1;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (grid.points(i, 0) == 0.0) x0_idx = i;
  }
  REQUIRE(x0_idx >= 0);
  CHECK(report.member_mask[x0_idx]);
}

TEST_CASE("propose stays inside a constructed safe window") {
  // Constraint GP: noiseless observation at 2.5 with a narrow RBF makes
  // the revealed safe set a window around 2.5; cost GP: linear kernel
  // with a noiseless observation gives mean -x with zero variance, so
  // the base acquisition strictly decreases to the right.
  LoopConfig lc;
  lc.domain = Domain({{0.0, 5.0}}, 501, 0);
  lc.x0 = Eigen::VectorXd::Constant(1, 2.5);
  lc.cost_kernel = linear(1.0, 0.0);
  lc.cost_noise_std = 0.0;
  lc.constraint_kernels = {rbf(0.25, 4.0)};
  lc.constraint_noise_std = {0.0};
  lc.acq.safety = SafetyMode::Barrier;
  lc.acq.tau = 1e-3;
  StubOracle oracle(1, {-2.5, 1.9});
  const SafeBoState state = init(oracle, lc);
  const Proposal prop = propose(state);
  CHECK(!prop.fallback);
  CHECK(prop.min_constraint_lcb > 0.0);
  CHECK(prop.x[0] > 2.5);
  CHECK(prop.x[0] < 3.1);  // window shuts before the rbf correlation dies
}

TEST_CASE("with full-domain safety and tiny tau the proposal is the unconstrained argmin") {
  const SyntheticProblem prob = toy_1d(0.0);
  ProblemOracle oracle(prob, 5);
  LoopConfig lc = toy_config(prob, 5);
  lc.domain.refinement_iters = 0;
  lc.constraint_prior_mean = 100.0;  // everything safe under a tiny-variance prior
  lc.constraint_kernels = {rbf(0.5, 1e-6), rbf(0.5, 1e-6)};
  lc.acq.tau = 1e-300;
  SafeBoState state = init(oracle, lc);

  const Proposal prop = propose(state);
  // brute-force the unconstrained base acquisition on the same grid
  const Grid grid = make_grid(state.domain);
  Eigen::VectorXd mean, var;
  state.cost_gp.posterior_batch(grid.points, mean, var);
  Eigen::Index best = 0;
  double best_score = kPosInf;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double s = lcb(Posterior{mean[i], var[i]}, 4.0);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  CHECK(prop.x[0] == grid.points(best, 0));
}

TEST_CASE("pf picks the single grid point with positive improvement") {
  // Linear-kernel cost GP with one noiseless observation: mean -x,
  // variance 0, best observed -2 at x = 2. EI is positive only beyond
  // x = 2, and the grid has exactly one such point.
  LoopConfig lc;
  lc.domain = Domain({{0.0, 2.02}}, 102, 0);
  lc.x0 = Eigen::VectorXd::Constant(1, 2.0);
  lc.cost_kernel = linear(1.0, 0.0);
  lc.cost_noise_std = 0.0;
  lc.constraint_kernels = {rbf(1.0, 1e-6)};
  lc.constraint_noise_std = {0.0};
  lc.constraint_prior_mean = 1.0;
  lc.acq.safety = SafetyMode::Pf;
  lc.acq.base = BaseAcquisition::Ei;
  StubOracle oracle(1, {-2.0, 1.0});
  const SafeBoState state = init(oracle, lc);
  const Proposal prop = propose(state);
  CHECK(prop.x[0] == doctest::Approx(2.02));
}

TEST_CASE("empty safe set falls back to the safest grid point, flagged") {
  StubOracle oracle(1, {1.0, -5.0});  // constraint observed deeply unsafe
  LoopConfig lc;
  lc.domain = Domain({{-1.0, 1.0}}, 101, 1);
  lc.x0 = Eigen::VectorXd::Zero(1);
  lc.constraint_kernels = {rbf(0.3, 4.0)};
  lc.constraint_noise_std = {0.1};
  lc.acq.safety = SafetyMode::Barrier;
  const SafeBoState state = init(oracle, lc);
  REQUIRE(safe_set(state).fraction_safe == 0.0);
  const Proposal prop = propose(state);
  CHECK(prop.fallback);
  // the safest point maximizes the constraint LCB: far from the bad
  // observation at 0, i.e. one of the domain edges; ties break low
  CHECK(prop.x[0] == -1.0);
  auto [next, rec] = step(state, oracle);
  CHECK(rec.fallback);
}

TEST_CASE("barrier steps keep every proposal strictly LCB-feasible") {
  const SyntheticProblem prob = toy_1d(0.1);
  ProblemOracle oracle(prob, 11);
  LoopConfig lc = toy_config(prob, 11, 8);
  SafeBoState state = init(oracle, lc);
  for (int k = 0; k < 8; ++k) {
    auto [next, rec] = step(state, oracle);
    state = next;
    CHECK(!rec.fallback);
    CHECK(rec.min_constraint_lcb > 0.0);
  }
  CHECK(state.history.size() == 9);
  CHECK(state.n == 9);
}

TEST_CASE("run produces budget + 1 records and is deterministic") {
  const SyntheticProblem prob = toy_1d(0.1);
  LoopConfig lc = toy_config(prob, 21, 6);

  ProblemOracle o1(prob, 21);
  const auto r1 = run_loop(o1, lc);
  CHECK(r1.size() == 7);

  ProblemOracle o2(prob, 21);
  const auto r2 = run_loop(o2, lc);
  REQUIRE(r2.size() == r1.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].x == r2[i].x);
    CHECK(r1[i].observed == r2[i].observed);
    CHECK(r1[i].safe_set_fraction == r2[i].safe_set_fraction);
    CHECK(r1[i].fallback == r2[i].fallback);
  }

  // budget 0 keeps only the seed observation
  ProblemOracle o3(prob, 21);
  LoopConfig lc0 = lc;
  lc0.budget = 0;
  CHECK(run_loop(o3, lc0).size() == 1);
}

TEST_CASE("grid-only proposal equals an exhaustive argmin over the same grid") {
  const SyntheticProblem prob = toy_1d(0.1);
  ProblemOracle oracle(prob, 9);
  LoopConfig lc = toy_config(prob, 9, 2);
  lc.domain.refinement_iters = 0;
  SafeBoState state = init(oracle, lc);
  state = step(state, oracle).first;

  const Proposal prop = propose(state);
  REQUIRE(!prop.fallback);

  // independent brute force through the public acquisition functions
  const Grid grid = make_grid(state.domain);
  Eigen::VectorXd cm, cv, m1, v1, m2, v2;
  state.cost_gp.posterior_batch(grid.points, cm, cv);
  state.constraint_gps[0].posterior_batch(grid.points, m1, v1);
  state.constraint_gps[1].posterior_batch(grid.points, m2, v2);
  Eigen::Index best = -1;
  double best_score = kPosInf;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const std::vector<double> terms = {barrier_term(Posterior{m1[i], v1[i]}, 4.0),
                                       barrier_term(Posterior{m2[i], v2[i]}, 4.0)};
    const double s =
        barrier_acquisition(lcb(Posterior{cm[i], cv[i]}, 4.0), terms, state.tau_current);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  CHECK(prop.x[0] == grid.points(best, 0));
  CHECK(prop.score == doctest::Approx(best_score).epsilon(1e-12));
}

TEST_CASE("theoretical beta schedules drive the loop through information gain") {
  const SyntheticProblem prob = toy_1d(0.1);
  ProblemOracle oracle(prob, 17);
  LoopConfig lc = toy_config(prob, 17, 6);
  lc.acq.beta_cost = theoretical_beta(1.0, 0.1, 0.05);
  lc.acq.beta_constraint = theoretical_beta(1.0, 0.1, 0.05);
  SafeBoState state = init(oracle, lc);
  double prev_gain = -1.0;
  for (int k = 0; k < 6; ++k) {
    auto [next, rec] = step(state, oracle);
    state = next;
    CHECK(rec.min_constraint_lcb > 0.0);
    // beta grows with the data, so the realized gain must be nondecreasing
    const double gain = state.constraint_gps[0].information_gain();
    CHECK(gain >= prev_gain);
    prev_gain = gain;
  }
  CHECK(state.history.size() == 7);
}

TEST_CASE("best_feasible_observation prefers feasible rows") {
  std::vector<ExperimentRecord> history(3);
  history[0].observed = {5.0, 1.0};
  history[1].observed = {1.0, -0.5};  // infeasible, better cost
  history[2].observed = {3.0, 0.2};
  CHECK(best_feasible_observation(history) == 3.0);
  history[0].observed[1] = -1.0;
  history[2].observed[1] = -1.0;  // nothing feasible -> overall best
  CHECK(best_feasible_observation(history) == 1.0);
}
