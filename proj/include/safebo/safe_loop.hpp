#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "safebo/acquisition.hpp"
#include "safebo/domain.hpp"
#include "safebo/gp.hpp"
#include "safebo/oracle.hpp"
#include "safebo/record.hpp"

namespace safebo {

/// Everything needed to run one sequential optimization: GP priors for
/// the cost and each constraint, the search domain, the acquisition and
/// the query budget. The loop queries the oracle once at `x0` during
/// initialization, then `budget` more times.
struct LoopConfig {
  Domain domain;
  Eigen::VectorXd x0;
  KernelSpec cost_kernel = RbfKernel{0.5, 80.0};
  std::vector<KernelSpec> constraint_kernels;
  double cost_prior_mean = 0.0;
  double constraint_prior_mean = 0.0;
  double cost_noise_std = 0.1;
  std::vector<double> constraint_noise_std;  // one per constraint
  // Model the cost GP on ln(1 + y) instead of y. Only valid for
  // nonnegative costs; monotone, so the acquisition argmin is unchanged
  // while heavy-tailed costs stop dominating the kernel scale. Records
  // always keep the raw observations.
  bool cost_log_transform = false;
  AcquisitionSpec acq;
  int budget = 25;
  std::uint64_t seed = 0;
  std::string run_id = "run";
};

/// Target value fed to the cost GP for an observed cost.
double cost_model_target(bool log_transform, double observed_cost);

/// Membership of each grid point in the partially revealed safe set
/// (every constraint LCB strictly positive).
struct SafeSetReport {
  std::vector<bool> member_mask;
  double fraction_safe = 0.0;
};

/// Outcome of one acquisition minimization.
struct Proposal {
  Eigen::VectorXd x;
  double score = 0.0;
  double min_constraint_lcb = 0.0;
  bool fallback = false;
};

/// Sequential decision state: conditioned GPs, the domain, the
/// acquisition configuration and the full observation history. Treat a
/// state as a value; `step` returns a new one.
struct SafeBoState {
  GpModel cost_gp;
  std::vector<GpModel> constraint_gps;
  Domain domain;
  AcquisitionSpec acq;
  double tau_current = 0.0;
  int n = 0;  // iterations completed, counting the seed observation
  std::vector<ExperimentRecord> history;
  std::uint64_t rng_seed = 0;
  std::string run_id;
  std::vector<std::string> warnings;
  bool cost_log_transform = false;

  int num_constraints() const { return static_cast<int>(constraint_gps.size()); }
};

/// Query the oracle at the known-safe start point and condition every GP
/// on that single observation. Throws if x0 lies outside the domain
/// (before any query). If the observed constraints already look unsafe a
/// warning is recorded and the loop proceeds.
SafeBoState init(Oracle& oracle, const LoopConfig& config);

/// Constraint-LCB membership over the domain grid.
SafeSetReport safe_set(const SafeBoState& state);

/// Minimize the configured acquisition over the grid with nested
/// refinement. Deterministic; grid ties break toward the lowest index.
/// With no feasible candidate the safest grid point (argmax of the
/// minimum constraint LCB) is returned with `fallback` set.
Proposal propose(const SafeBoState& state);

/// One propose -> query -> append -> recondition cycle.
std::pair<SafeBoState, ExperimentRecord> step(const SafeBoState& state, Oracle& oracle);

/// Full run: init plus `budget` steps; returns budget + 1 records.
std::vector<ExperimentRecord> run_loop(Oracle& oracle, const LoopConfig& config);

/// run_loop variant that also exposes the final state (for reporting).
std::pair<std::vector<ExperimentRecord>, SafeBoState> run_loop_with_state(Oracle& oracle,
                                                                          const LoopConfig& config);

/// Best observed cost among history rows whose observed constraints are
/// all nonnegative; falls back to the overall best observation when no
/// row qualifies. Reference point for EI/PI.
double best_feasible_observation(const std::vector<ExperimentRecord>& history);

}  // namespace safebo
