#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace safebo {

inline constexpr int kRecordSchemaVersion = 1;

/// One row per oracle query. `observed` holds the noisy cost followed by
/// the noisy constraints; `truth` is parallel and empty when the oracle
/// does not expose noiseless values. `min_constraint_lcb` is the
/// smallest constraint lower confidence bound at the proposal (NaN for
/// the seed observation, where nothing was proposed).
struct ExperimentRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  int iteration = 0;
  Eigen::VectorXd x;
  std::vector<double> observed;
  std::vector<double> truth;
  double safe_set_fraction = 0.0;
  double min_constraint_lcb = std::numeric_limits<double>::quiet_NaN();
  bool fallback = false;
  bool violation = false;
  double wall_time_ms = 0.0;  // diagnostic only; never serialized
};

}  // namespace safebo
