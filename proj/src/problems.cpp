#include "safebo/problems.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace safebo {

std::vector<double> SyntheticProblem::true_values(const Eigen::VectorXd& x) const {
  std::vector<double> out;
  out.reserve(1 + constraints.size());
  out.push_back(cost(x));
  for (const auto& c : constraints) out.push_back(c(x));
  return out;
}

bool SyntheticProblem::feasible(const Eigen::VectorXd& x) const {
  for (const auto& c : constraints) {
    if (!(c(x) > 0.0)) return false;
  }
  return true;
}

namespace {

// Brute-force safe optimum: scan a dense grid, flood-fill the feasible
// component containing x0, take the argmin of the cost over it. Also
// records the cost range over that component.
void verify_problem(SyntheticProblem& p, int scan_points_per_dim) {
  if (!p.feasible(p.x0)) {
    throw std::logic_error(p.name + ": x0 does not strictly satisfy all constraints");
  }

  Domain scan = p.domain;
  scan.grid_points_per_dim = scan_points_per_dim;
  scan.max_grid_size = std::max<std::int64_t>(scan.grid_size(), scan.max_grid_size);
  const Grid grid = make_grid(scan);
  const Eigen::Index total = grid.size();

  std::vector<bool> feas(total);
  for (Eigen::Index i = 0; i < total; ++i) feas[i] = p.feasible(grid.points.row(i));

  // Index of the grid point nearest to x0.
  Eigen::Index start = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < total; ++i) {
    const double d = (grid.points.row(i).transpose() - p.x0).squaredNorm();
    if (d < best_d) {
      best_d = d;
      start = i;
    }
  }
  if (!feas[start]) {
    throw std::logic_error(p.name + ": grid point nearest x0 is infeasible; refine the scan");
  }

  // Flood fill over axis neighbors.
  std::vector<std::int64_t> strides(p.dim, 1);
  for (int d = p.dim - 2; d >= 0; --d) strides[d] = strides[d + 1] * scan_points_per_dim;
  std::vector<bool> in_component(total, false);
  std::deque<Eigen::Index> frontier{start};
  in_component[start] = true;
  while (!frontier.empty()) {
    const Eigen::Index i = frontier.front();
    frontier.pop_front();
    for (int d = 0; d < p.dim; ++d) {
      const std::int64_t coord = (i / strides[d]) % scan_points_per_dim;
      for (int dir : {-1, 1}) {
        const std::int64_t nc = coord + dir;
        if (nc < 0 || nc >= scan_points_per_dim) continue;
        const Eigen::Index j = i + dir * strides[d];
        if (!in_component[j] && feas[j]) {
          in_component[j] = true;
          frontier.push_back(j);
        }
      }
    }
  }

  Eigen::Index arg = -1;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < total; ++i) {
    if (!in_component[i]) continue;
    const double f = p.cost(grid.points.row(i));
    if (f < lo) {
      lo = f;
      arg = i;
    }
    hi = std::max(hi, f);
  }
  if (arg < 0) throw std::logic_error(p.name + ": empty safe component");
  p.optimum_x = grid.points.row(arg);
  p.optimum_cost = lo;
  p.safe_cost_range = hi - lo;
}

}  // namespace

SyntheticProblem toy_1d(double noise_std) {
  SyntheticProblem p;
  p.name = "toy1d";
  p.dim = 1;
  p.cost = [](const Eigen::VectorXd& x) { return 2.0 * std::sin(1.5 * x[0]) + 0.3 * x[0] * x[0]; };
  p.constraints = {
      [](const Eigen::VectorXd& x) { return 2.5 + 3.5 * std::cos(1.2 * x[0]); },
      [](const Eigen::VectorXd& x) { return 3.0 - 3.5 * std::sin(1.1 * (x[0] - 0.1)); },
  };
  p.noise_std = {noise_std, noise_std, noise_std};
  p.domain = Domain({{-5.0, 5.0}}, 1001, 2);
  p.x0 = Eigen::VectorXd::Zero(1);
  verify_problem(p, 100001);
  return p;
}

SyntheticProblem toy_2d(double noise_std) {
  SyntheticProblem p;
  p.name = "toy2d";
  p.dim = 2;
  p.cost = [](const Eigen::VectorXd& x) {
    return x.squaredNorm() + 2.0 * std::sin(1.3 * x[0]) * std::sin(1.1 * x[1]) - 1.5 * x[0];
  };
  p.constraints = {
      [](const Eigen::VectorXd& x) { return 5.0 - x.squaredNorm(); },
      [](const Eigen::VectorXd& x) { return 1.5 + 2.0 * std::sin(1.2 * (x[0] - x[1])); },
  };
  p.noise_std = {noise_std, noise_std, noise_std};
  p.domain = Domain({{-3.0, 3.0}, {-3.0, 3.0}}, 101, 2);
  p.x0 = Eigen::VectorXd::Zero(2);
  verify_problem(p, 401);
  return p;
}

std::vector<double> ProblemOracle::query(const Eigen::VectorXd& x) {
  if (!problem_.domain.contains(x)) {
    throw std::invalid_argument(problem_.name + ": query point outside the domain");
  }
  std::vector<double> out = problem_.true_values(x);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = problem_.noise_std[i];
    if (s > 0.0) out[i] += rng_.normal(0.0, s);
  }
  return out;
}

std::optional<std::vector<double>> ProblemOracle::truth(const Eigen::VectorXd& x) const {
  return problem_.true_values(x);
}

RegretMetrics regret_metrics(const std::vector<ExperimentRecord>& history,
                             const SyntheticProblem& problem) {
  RegretMetrics out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : history) {
    bool feasible = true;
    for (const auto& c : problem.constraints) {
      if (c(rec.x) < 0.0) feasible = false;
    }
    if (!feasible) ++out.violations;
    if (feasible) best = std::min(best, problem.cost(rec.x));
  }
  out.simple_regret = std::isfinite(best) ? best - problem.optimum_cost
                                          : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace safebo
