#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safebo/glucose.hpp"
#include "safebo/problems.hpp"
#include "safebo/safe_loop.hpp"

namespace safebo {

/// Aggregated configuration failure: every violation found, not just
/// the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// One experiment configuration: a problem, one or more methods, and the
/// loop settings. Unset values are filled with per-problem defaults
/// (toy: budget 25, tau 1e-3; glucose: budget 15, tau 0.1, dose domain
/// [0, 20] U).
struct RunConfig {
  std::string problem;                         // toy1d | toy2d | glucose
  std::vector<std::string> methods;            // barrier | pf | pourmohamad | safeopt_rule
  std::string base_acquisition = "lcb";        // lcb | ei | pi
  double tau = -1.0;                           // filled by problem default when unset
  double tau_decay = 1.0;
  // Filled per problem when unset: toy uses Fixed(4) for both; glucose
  // uses Fixed(2) for the cost and Fixed(4) for the constraints.
  std::optional<BetaSchedule> beta_cost;
  std::optional<BetaSchedule> beta_constraint;
  int budget = -1;                             // filled by problem default when unset
  std::vector<std::uint64_t> seeds = {0};
  int grid_points_per_dim = 0;                 // filled by problem default when 0
  int refinement_iters = 2;
  double noise_std = 0.1;                      // toy observation noise
  double cgm_noise_std = -1.0;                 // glucose; patient default when unset
  int cohort_size = 10;                        // glucose without a patient file
  std::string patient_file;                    // glucose cohort JSON
  std::uint64_t cohort_seed = 7;
  std::string output_dir = "out";
  std::vector<int> log_iters;                  // filled with {2, 5, 25, budget} clipped
};

/// Parse and validate a config file. Unknown keys are errors; all
/// violations are reported together via ConfigError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

/// Result of one (method, seed[, patient]) cell.
struct CellResult {
  std::string run_id;
  std::string method;
  std::uint64_t seed = 0;
  int patient_index = -1;  // glucose only
  std::vector<ExperimentRecord> records;
  std::vector<std::string> warnings;
  std::string error;  // nonempty when the cell failed
  double wall_time_ms = 0.0;
};

struct ExecutionResult {
  std::filesystem::path output_dir;
  std::filesystem::path summary_file;
  std::string summary_json;
  std::vector<CellResult> cells;
};

/// Run every (method x seed [x patient]) cell, write one records CSV per
/// cell plus summary.json. Cells run in parallel with independent random
/// streams; identical configs produce identical record files. Per-cell
/// failures are recorded in the summary without aborting other cells.
ExecutionResult execute(const RunConfig& config);

/// Generate plot-ready files and report.txt from an existing summary:
/// GP mean/CI and barrier grids at the logged iterations, CGM traces,
/// time-in-range tables and normalized dose series (glucose), and
/// per-method violation totals.
void report(const std::filesystem::path& summary_file);

/// Records CSV round-trip (schema safebo-records-v1; column order is
/// documented in the README).
void write_records_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path);

/// Serialize a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace safebo
