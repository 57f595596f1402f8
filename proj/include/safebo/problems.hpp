#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "safebo/domain.hpp"
#include "safebo/oracle.hpp"
#include "safebo/record.hpp"
#include "safebo/rng.hpp"

namespace safebo {

/// Closed-form benchmark with exposed ground truth. Construction
/// verifies that x0 strictly satisfies every constraint and locates the
/// safe optimum by dense-grid brute force restricted to the connected
/// feasible component containing x0.
struct SyntheticProblem {
  using Fn = std::function<double(const Eigen::VectorXd&)>;

  std::string name;
  int dim = 1;
  Fn cost;
  std::vector<Fn> constraints;
  std::vector<double> noise_std;  // cost first, then constraints
  Domain domain;
  Eigen::VectorXd x0;
  Eigen::VectorXd optimum_x;
  double optimum_cost = 0.0;
  double safe_cost_range = 0.0;  // max - min of the cost over the safe component

  std::vector<double> true_values(const Eigen::VectorXd& x) const;
  bool feasible(const Eigen::VectorXd& x) const;
};

/// 1-D benchmark on [-5, 5] with a multimodal cost and two nonconvex
/// constraints whose conjunction is a disjoint feasible set containing
/// x0 = 0. The safe optimum comes from a 1e5-point scan at construction.
SyntheticProblem toy_1d(double noise_std = 0.1);

/// 2-D benchmark on [-3, 3]^2 with two smooth constraints; exercises the
/// multi-dimensional grid paths.
SyntheticProblem toy_2d(double noise_std = 0.1);

/// Oracle over a synthetic problem: truth plus independent Gaussian
/// noise per output from the oracle's own stream.
class ProblemOracle : public Oracle {
 public:
  ProblemOracle(const SyntheticProblem& problem, std::uint64_t seed)
      : problem_(problem), rng_(Rng::derive(seed, 0x70726f62)) {}

  int input_dim() const override { return problem_.dim; }
  int num_constraints() const override { return static_cast<int>(problem_.constraints.size()); }
  std::vector<double> query(const Eigen::VectorXd& x) override;
  std::optional<std::vector<double>> truth(const Eigen::VectorXd& x) const override;

 private:
  const SyntheticProblem& problem_;
  Rng rng_;
};

struct RegretMetrics {
  double simple_regret = 0.0;  // +inf when no queried point was feasible
  int violations = 0;
};

/// Best true cost among feasible queried points minus the safe optimum,
/// plus the count of queries violating any true constraint.
RegretMetrics regret_metrics(const std::vector<ExperimentRecord>& history,
                             const SyntheticProblem& problem);

}  // namespace safebo
