#include "safebo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace safebo {

namespace {

using nlohmann::json;

constexpr const char* kRecordsSchema = "# safebo-records v1";

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fixed GP hyperparameters for the dose-guidance problem; chosen once
// against the surrogate cohort and never re-optimized during a run.
// The cost GP models ln(1 + GPI); raw GPI spans three orders of
// magnitude and its enormous hyperglycemia wall biases a stationary
// kernel, dragging the posterior minimum toward overdosing.
struct GlucoseGpDefaults {
  KernelSpec cost_kernel = rbf(1.0, 16.0);
  KernelSpec constraint_kernel = sum({rbf(3.0, 400.0), linear(2.25, 0.0)});
  double cost_noise_std = 0.10;
  double constraint_noise_std = 1.2;
};

const std::set<std::string> kKnownKeys = {
    "problem",        "method",     "methods",          "base_acquisition",
    "tau",            "tau_decay",  "beta_cost",        "beta_constraint",
    "budget",         "seeds",      "grid_points_per_dim", "refinement_iters",
    "noise_std",      "cgm_noise_std", "cohort",        "patient_file",
    "cohort_seed",    "output_dir", "log_iters"};

bool parse_beta(const json& j, std::optional<BetaSchedule>& out, const std::string& name,
                std::vector<std::string>& violations) {
  if (!j.is_object() || !j.contains("mode")) {
    violations.push_back(name + ": expected an object with a \"mode\" key");
    return false;
  }
  const std::string mode = j.at("mode").get<std::string>();
  try {
    if (mode == "fixed") {
      out.emplace(fixed_beta(j.at("value").get<double>()));
    } else if (mode == "theoretical") {
      out.emplace(theoretical_beta(j.at("B").get<double>(), j.at("v").get<double>(),
                                   j.at("delta").get<double>()));
    } else {
      violations.push_back(name + ": unknown mode \"" + mode + "\"");
      return false;
    }
  } catch (const std::exception& e) {
    violations.push_back(name + ": " + e.what());
    return false;
  }
  return true;
}

json beta_to_json(const BetaSchedule& s) {
  if (const auto* f = std::get_if<FixedBeta>(&s)) {
    return json{{"mode", "fixed"}, {"value", f->value}};
  }
  const auto& t = std::get<TheoreticalBeta>(s);
  return json{{"mode", "theoretical"}, {"B", t.rkhs_bound}, {"v", t.noise}, {"delta", t.delta}};
}

// Fill per-problem defaults and collect every violation.
std::vector<std::string> finalize_config(RunConfig& c) {
  std::vector<std::string> violations;
  const bool glucose = c.problem == "glucose";
  const bool toy = c.problem == "toy1d" || c.problem == "toy2d";
  if (!glucose && !toy) {
    violations.push_back("problem: must be one of toy1d, toy2d, glucose");
  }
  if (c.methods.empty()) c.methods = {"barrier"};
  for (const auto& m : c.methods) {
    if (m != "barrier" && m != "pf" && m != "pourmohamad" && m != "safeopt_rule") {
      violations.push_back("methods: unknown method \"" + m + "\"");
    }
  }
  if (c.base_acquisition != "lcb" && c.base_acquisition != "ei" && c.base_acquisition != "pi") {
    violations.push_back("base_acquisition: must be lcb, ei or pi");
  }
  if (c.budget == -1) c.budget = glucose ? 15 : 25;
  if (c.budget < 1) violations.push_back("budget: must be >= 1");
  if (!c.beta_cost) c.beta_cost = fixed_beta(glucose ? 1.0 : 4.0);
  if (!c.beta_constraint) c.beta_constraint = fixed_beta(4.0);
  if (c.tau == -1.0) c.tau = glucose ? 0.1 : 1e-3;
  const bool has_barrier =
      std::find(c.methods.begin(), c.methods.end(), "barrier") != c.methods.end();
  if (has_barrier && !(c.tau > 0.0)) violations.push_back("tau: must be > 0 for the barrier method");
  if (!(c.tau_decay > 0.0 && c.tau_decay <= 1.0)) {
    violations.push_back("tau_decay: must lie in (0, 1]");
  }
  if (c.seeds.empty()) violations.push_back("seeds: at least one seed required");
  if (c.grid_points_per_dim == 0) c.grid_points_per_dim = (c.problem == "toy2d") ? 101 : 1001;
  if (c.grid_points_per_dim < 2) violations.push_back("grid_points_per_dim: must be >= 2");
  if (c.refinement_iters < 0) violations.push_back("refinement_iters: must be >= 0");
  if (c.noise_std < 0.0) violations.push_back("noise_std: must be >= 0");
  if (glucose) {
    if (c.patient_file.empty() && c.cohort_size < 1) {
      violations.push_back("cohort: must be >= 1 when no patient_file is given");
    }
  } else {
    if (!c.patient_file.empty()) violations.push_back("patient_file: only valid for glucose");
    if (c.cgm_noise_std >= 0.0) violations.push_back("cgm_noise_std: only valid for glucose");
  }
  if (c.output_dir.empty()) violations.push_back("output_dir: must be nonempty");

  if (c.log_iters.empty()) {
    for (int candidate : {2, 5, 25}) {
      if (candidate <= c.budget) c.log_iters.push_back(candidate);
    }
    if (std::find(c.log_iters.begin(), c.log_iters.end(), c.budget) == c.log_iters.end()) {
      c.log_iters.push_back(c.budget);
    }
  }
  std::sort(c.log_iters.begin(), c.log_iters.end());
  c.log_iters.erase(std::unique(c.log_iters.begin(), c.log_iters.end()), c.log_iters.end());
  for (int n : c.log_iters) {
    if (n < 0 || n > c.budget) violations.push_back("log_iters: entries must lie in [0, budget]");
  }

  // Grid-size cap, checked through Domain validation.
  if (violations.empty()) {
    const int dim = (c.problem == "toy2d") ? 2 : 1;
    try {
      Domain probe(std::vector<Domain::Bound>(dim, {0.0, 1.0}), c.grid_points_per_dim,
                   c.refinement_iters);
    } catch (const std::exception& e) {
      violations.push_back(std::string("grid: ") + e.what());
    }
  }
  return violations;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["methods"] = c.methods;
  j["base_acquisition"] = c.base_acquisition;
  j["tau"] = c.tau;
  j["tau_decay"] = c.tau_decay;
  j["beta_cost"] = beta_to_json(c.beta_cost.value());
  j["beta_constraint"] = beta_to_json(c.beta_constraint.value());
  j["budget"] = c.budget;
  j["seeds"] = c.seeds;
  j["grid_points_per_dim"] = c.grid_points_per_dim;
  j["refinement_iters"] = c.refinement_iters;
  j["noise_std"] = c.noise_std;
  if (c.problem == "glucose") {
    if (c.cgm_noise_std >= 0.0) j["cgm_noise_std"] = c.cgm_noise_std;
    j["cohort"] = c.cohort_size;
    if (!c.patient_file.empty()) j["patient_file"] = c.patient_file;
    j["cohort_seed"] = c.cohort_seed;
  }
  j["output_dir"] = c.output_dir;
  j["log_iters"] = c.log_iters;
  return j;
}

RunConfig config_from_json(const json& j, std::vector<std::string>& violations) {
  RunConfig c;
  for (const auto& item : j.items()) {
    if (!kKnownKeys.count(item.key())) violations.push_back("unknown key: " + item.key());
  }
  try {
    c.problem = j.value("problem", "");
    if (j.contains("method") && j.contains("methods")) {
      violations.push_back("method/methods: give exactly one of the two");
    }
    if (j.contains("method")) c.methods = {j.at("method").get<std::string>()};
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    c.base_acquisition = j.value("base_acquisition", std::string("lcb"));
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("tau_decay")) c.tau_decay = j.at("tau_decay").get<double>();
    if (j.contains("beta_cost")) parse_beta(j.at("beta_cost"), c.beta_cost, "beta_cost", violations);
    if (j.contains("beta_constraint")) {
      parse_beta(j.at("beta_constraint"), c.beta_constraint, "beta_constraint", violations);
    }
    if (j.contains("budget")) c.budget = j.at("budget").get<int>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("grid_points_per_dim")) {
      c.grid_points_per_dim = j.at("grid_points_per_dim").get<int>();
    }
    if (j.contains("refinement_iters")) c.refinement_iters = j.at("refinement_iters").get<int>();
    if (j.contains("noise_std")) c.noise_std = j.at("noise_std").get<double>();
    if (j.contains("cgm_noise_std")) {
      c.cgm_noise_std = j.at("cgm_noise_std").get<double>();
      if (c.cgm_noise_std < 0.0) violations.push_back("cgm_noise_std: must be >= 0");
    }
    if (j.contains("cohort")) c.cohort_size = j.at("cohort").get<int>();
    if (j.contains("patient_file")) c.patient_file = j.at("patient_file").get<std::string>();
    if (j.contains("cohort_seed")) c.cohort_seed = j.at("cohort_seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("log_iters")) c.log_iters = j.at("log_iters").get<std::vector<int>>();
  } catch (const std::exception& e) {
    violations.push_back(std::string("config: ") + e.what());
  }
  return c;
}

// Problem assets shared by every cell.
struct Resolved {
  std::shared_ptr<SyntheticProblem> toy;
  std::vector<PatientModel> patients;
  std::vector<double> optimal_dose;
};

Resolved resolve_problem(const RunConfig& c) {
  Resolved res;
  if (c.problem == "toy1d") {
    res.toy = std::make_shared<SyntheticProblem>(toy_1d(c.noise_std));
  } else if (c.problem == "toy2d") {
    res.toy = std::make_shared<SyntheticProblem>(toy_2d(c.noise_std));
  } else {
    if (!c.patient_file.empty()) {
      std::ifstream in(c.patient_file);
      if (!in) throw std::runtime_error("cannot open patient file: " + c.patient_file);
      std::stringstream buf;
      buf << in.rdbuf();
      res.patients = cohort_from_json(buf.str());
    } else {
      Rng rng(c.cohort_seed);
      res.patients = cohort(c.cohort_size, rng);
    }
    for (auto& p : res.patients) {
      if (c.cgm_noise_std >= 0.0) p.cgm_noise_std = c.cgm_noise_std;
      res.optimal_dose.push_back(brute_force_optimal_dose(p));
    }
  }
  return res;
}

struct CellSpec {
  std::string method;
  std::uint64_t seed = 0;
  int patient_index = -1;

  std::string run_id() const {
    std::string id = method;
    if (patient_index >= 0) id += "_patient" + std::to_string(patient_index);
    id += "_seed" + std::to_string(seed);
    return id;
  }
};

std::vector<CellSpec> enumerate_cells(const RunConfig& c, const Resolved& res) {
  std::vector<CellSpec> cells;
  for (const auto& method : c.methods) {
    for (std::uint64_t seed : c.seeds) {
      if (c.problem == "glucose") {
        for (int p = 0; p < static_cast<int>(res.patients.size()); ++p) {
          cells.push_back({method, seed, p});
        }
      } else {
        cells.push_back({method, seed, -1});
      }
    }
  }
  return cells;
}

AcquisitionSpec make_acq(const RunConfig& c, const std::string& method) {
  AcquisitionSpec acq;
  acq.base = c.base_acquisition == "ei"   ? BaseAcquisition::Ei
             : c.base_acquisition == "pi" ? BaseAcquisition::Pi
                                          : BaseAcquisition::Lcb;
  if (method == "barrier") {
    acq.safety = SafetyMode::Barrier;
  } else if (method == "pf") {
    acq.safety = SafetyMode::Pf;
    // feasibility scaling needs a nonnegative improvement-based score
    if (acq.base == BaseAcquisition::Lcb) acq.base = BaseAcquisition::Ei;
  } else if (method == "pourmohamad") {
    acq.safety = SafetyMode::Pourmohamad;
  } else if (method == "safeopt_rule") {
    acq.safety = SafetyMode::SafeOptRule;
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }
  acq.beta_cost = c.beta_cost.value();
  acq.beta_constraint = c.beta_constraint.value();
  acq.tau = c.tau;
  acq.tau_decay = c.tau_decay;
  return acq;
}

LoopConfig make_loop_config(const RunConfig& c, const Resolved& res, const CellSpec& cell) {
  LoopConfig lc;
  lc.acq = make_acq(c, cell.method);
  lc.budget = c.budget;
  lc.seed = cell.seed;
  lc.run_id = cell.run_id();
  if (c.problem == "glucose") {
    const GlucoseGpDefaults gp;
    lc.domain = Domain({{0.0, DoseOracle::kMaxBolus}}, c.grid_points_per_dim, c.refinement_iters);
    lc.x0 = Eigen::VectorXd::Constant(1, 0.5);
    lc.cost_kernel = gp.cost_kernel;
    lc.constraint_kernels = {gp.constraint_kernel};
    lc.cost_noise_std = gp.cost_noise_std;
    lc.constraint_noise_std = {gp.constraint_noise_std};
    lc.cost_log_transform = true;
  } else {
    const auto& p = *res.toy;
    lc.domain = p.domain;
    lc.domain.grid_points_per_dim = c.grid_points_per_dim;
    lc.domain.refinement_iters = c.refinement_iters;
    lc.x0 = p.x0;
    lc.cost_kernel = rbf(0.5, 80.0);
    lc.constraint_kernels.assign(p.constraints.size(), rbf(0.5, 80.0));
    lc.cost_noise_std = std::max(c.noise_std, 1e-4);
    lc.constraint_noise_std.assign(p.constraints.size(), std::max(c.noise_std, 1e-4));
  }
  return lc;
}

std::unique_ptr<Oracle> make_oracle(const RunConfig& c, const Resolved& res, const CellSpec& cell) {
  if (c.problem == "glucose") {
    return std::make_unique<DoseOracle>(res.patients[cell.patient_index], 80.0,
                                        mix_seed(cell.seed, cell.patient_index));
  }
  return std::make_unique<ProblemOracle>(*res.toy, cell.seed);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers =
      std::min(n, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid config: " +
                         [&] {
                           std::string joined;
                           for (const auto& v : violations) {
                             if (!joined.empty()) joined += "; ";
                             joined += v;
                           }
                           return joined;
                         }()),
      violations_(std::move(violations)) {}

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  std::vector<std::string> violations;
  RunConfig c = config_from_json(j, violations);
  auto more = finalize_config(c);
  violations.insert(violations.end(), more.begin(), more.end());
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path.string()});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw std::invalid_argument("write_records_csv: no records");
  const int dim = static_cast<int>(records.front().x.size());
  const int outputs = static_cast<int>(records.front().observed.size());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kRecordsSchema << "\n";
  out << "run_id,seed,iteration";
  for (int d = 0; d < dim; ++d) out << ",x" << d;
  for (int k = 0; k < outputs; ++k) out << ",obs" << k;
  for (int k = 0; k < outputs; ++k) out << ",true" << k;
  out << ",safe_set_fraction,min_constraint_lcb,fallback,violation\n";
  for (const auto& r : records) {
    out << r.run_id << "," << r.seed << "," << r.iteration;
    for (int d = 0; d < dim; ++d) out << "," << format_double(r.x[d]);
    for (int k = 0; k < outputs; ++k) out << "," << format_double(r.observed[k]);
    for (int k = 0; k < outputs; ++k) {
      out << ",";
      if (!r.truth.empty()) out << format_double(r.truth[k]);
    }
    out << "," << format_double(r.safe_set_fraction) << "," << format_double(r.min_constraint_lcb)
        << "," << (r.fallback ? 1 : 0) << "," << (r.violation ? 1 : 0) << "\n";
  }
}

std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kRecordsSchema) throw std::runtime_error(path.string() + ": unknown records schema");
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) header.push_back(col);
  }
  int dim = 0, outputs = 0;
  for (const auto& col : header) {
    if (col.rfind("x", 0) == 0 && col.size() > 1 && std::isdigit(col[1])) ++dim;
    if (col.rfind("obs", 0) == 0) ++outputs;
  }

  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < header.size()) cells.push_back("");  // trailing empties
    ExperimentRecord r;
    int i = 0;
    r.run_id = cells[i++];
    r.seed = std::stoull(cells[i++]);
    r.iteration = std::stoi(cells[i++]);
    r.x.resize(dim);
    for (int d = 0; d < dim; ++d) r.x[d] = std::strtod(cells[i++].c_str(), nullptr);
    r.observed.resize(outputs);
    for (int k = 0; k < outputs; ++k) r.observed[k] = std::strtod(cells[i++].c_str(), nullptr);
    bool has_truth = !cells[i].empty();
    if (has_truth) r.truth.resize(outputs);
    for (int k = 0; k < outputs; ++k) {
      if (has_truth) r.truth[k] = std::strtod(cells[i].c_str(), nullptr);
      ++i;
    }
    r.safe_set_fraction = std::strtod(cells[i++].c_str(), nullptr);
    r.min_constraint_lcb = std::strtod(cells[i++].c_str(), nullptr);
    r.fallback = cells[i++] == "1";
    r.violation = cells[i++] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

json cell_summary(const RunConfig& c, const Resolved& res, const CellSpec& spec,
                  const CellResult& cell) {
  json j;
  j["run_id"] = cell.run_id;
  j["method"] = cell.method;
  j["seed"] = cell.seed;
  if (spec.patient_index >= 0) j["patient"] = spec.patient_index;
  j["records_file"] = "records_" + cell.run_id + ".csv";
  j["n_records"] = cell.records.size();
  j["warnings"] = cell.warnings;
  j["error"] = cell.error;
  if (!cell.error.empty()) return j;

  int violations = 0, fallbacks = 0;
  for (const auto& r : cell.records) {
    violations += r.violation ? 1 : 0;
    fallbacks += r.fallback ? 1 : 0;
  }
  j["violations"] = violations;
  j["fallbacks"] = fallbacks;
  j["best_feasible_observed_cost"] = best_feasible_observation(cell.records);

  if (res.toy) {
    const RegretMetrics m = regret_metrics(cell.records, *res.toy);
    j["simple_regret"] = std::isfinite(m.simple_regret) ? json(m.simple_regret) : json("inf");
    j["true_violations"] = m.violations;
  } else {
    const PatientModel& patient = res.patients[spec.patient_index];
    const double optimal = res.optimal_dose[spec.patient_index];
    std::vector<double> doses;
    double min_true_bg = std::numeric_limits<double>::infinity();
    for (const auto& r : cell.records) {
      doses.push_back(r.x[0]);
      const CgmTrace t = simulate_noiseless(patient, MealScenario{80.0, r.x[0], 6.0});
      for (double bg : t.true_bg) min_true_bg = std::min(min_true_bg, bg);
    }
    j["doses"] = doses;
    j["final_dose"] = doses.back();
    j["optimal_dose"] = optimal;
    j["final_dose_pct_of_optimal"] = optimal > 0.0 ? 100.0 * doses.back() / optimal : 0.0;
    j["min_true_bg"] = min_true_bg;
  }
  return j;
}

}  // namespace

ExecutionResult execute(const RunConfig& config_in) {
  RunConfig config = config_in;
  auto violations = finalize_config(config);
  if (!violations.empty()) throw ConfigError(std::move(violations));

  const Resolved res = resolve_problem(config);
  const std::vector<CellSpec> specs = enumerate_cells(config, res);

  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path outdir(config.output_dir);

  std::vector<CellResult> cells(specs.size());
  parallel_for(static_cast<int>(specs.size()), [&](int i) {
    const CellSpec& spec = specs[i];
    CellResult& cell = cells[i];
    cell.run_id = spec.run_id();
    cell.method = spec.method;
    cell.seed = spec.seed;
    cell.patient_index = spec.patient_index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const LoopConfig lc = make_loop_config(config, res, spec);
      auto oracle = make_oracle(config, res, spec);
      auto [records, state] = run_loop_with_state(*oracle, lc);
      cell.records = std::move(records);
      cell.warnings = state.warnings;
      write_records_csv(outdir / ("records_" + cell.run_id + ".csv"), cell.records);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cell.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  json summary;
  summary["schema_version"] = 1;
  summary["config"] = config_to_json(config);

  json problem;
  problem["name"] = config.problem;
  if (res.toy) {
    problem["optimum_x"] = std::vector<double>(res.toy->optimum_x.begin(), res.toy->optimum_x.end());
    problem["optimum_cost"] = res.toy->optimum_cost;
    problem["safe_cost_range"] = res.toy->safe_cost_range;
  } else {
    const std::string patients_file = "patients.json";
    std::ofstream pf(outdir / patients_file);
    pf << cohort_to_json(res.patients) << "\n";
    problem["patients_file"] = patients_file;
    problem["optimal_dose"] = res.optimal_dose;
  }
  summary["problem"] = problem;

  json cell_array = json::array();
  std::map<std::string, std::pair<int, int>> per_method;  // violations, fallbacks
  std::map<std::string, int> per_method_cells;
  double total_ms = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    json cj = cell_summary(config, res, specs[i], cells[i]);
    total_ms += cells[i].wall_time_ms;
    if (cells[i].error.empty()) {
      per_method[cells[i].method].first += cj["violations"].get<int>();
      per_method[cells[i].method].second += cj["fallbacks"].get<int>();
    }
    per_method_cells[cells[i].method] += 1;
    cell_array.push_back(std::move(cj));
  }
  summary["cells"] = std::move(cell_array);

  json methods;
  for (const auto& [name, counts] : per_method) {
    methods[name] = json{{"cells", per_method_cells[name]},
                         {"violations", counts.first},
                         {"fallbacks", counts.second}};
  }
  summary["methods"] = methods;
  summary["timing"] = json{{"total_cell_wall_time_ms", total_ms}};

  ExecutionResult result;
  result.output_dir = outdir;
  result.summary_file = outdir / "summary.json";
  result.summary_json = summary.dump(2);
  result.cells = std::move(cells);
  std::ofstream sf(result.summary_file);
  sf << result.summary_json << "\n";
  return result;
}

namespace {

// Condition fresh GPs on the first `upto + 1` records (no oracle).
SafeBoState replay_state(const LoopConfig& lc, const std::vector<ExperimentRecord>& records,
                         int upto) {
  const int dim = lc.domain.dim();
  const int m = static_cast<int>(lc.constraint_kernels.size());
  Eigen::MatrixXd X(upto + 1, dim);
  Eigen::VectorXd y0(upto + 1);
  std::vector<Eigen::VectorXd> yc(m, Eigen::VectorXd(upto + 1));
  for (int i = 0; i <= upto; ++i) {
    X.row(i) = records[i].x.transpose();
    y0[i] = cost_model_target(lc.cost_log_transform, records[i].observed[0]);
    for (int c = 0; c < m; ++c) yc[c][i] = records[i].observed[c + 1];
  }
  SafeBoState st{GpModel(lc.cost_kernel, lc.cost_prior_mean, lc.cost_noise_std, dim),
                 {},
                 lc.domain,
                 lc.acq,
                 lc.acq.tau * std::pow(lc.acq.tau_decay, upto),
                 upto + 1,
                 {records.begin(), records.begin() + upto + 1},
                 lc.seed,
                 lc.run_id,
                 {},
                 lc.cost_log_transform};
  st.cost_gp = st.cost_gp.with_data(X, y0).conditioned();
  for (int c = 0; c < m; ++c) {
    const double noise = lc.constraint_noise_std.empty() ? lc.cost_noise_std
                                                         : lc.constraint_noise_std[c];
    GpModel gp(lc.constraint_kernels[c], lc.constraint_prior_mean, noise, dim);
    st.constraint_gps.push_back(gp.with_data(X, yc[c]).conditioned());
  }
  return st;
}

void emit_grid_file(const std::filesystem::path& path, const SafeBoState& st) {
  const Grid grid = make_grid(st.domain);
  const int m = st.num_constraints();
  const int n = std::max(st.n, 1);

  const bool cost_theoretical = std::holds_alternative<TheoreticalBeta>(st.acq.beta_cost);
  const double beta0 = beta_value(st.acq.beta_cost, n,
                                  cost_theoretical ? st.cost_gp.information_gain() : 0.0);
  const bool con_theoretical = std::holds_alternative<TheoreticalBeta>(st.acq.beta_constraint);
  std::vector<double> beta_con(m);
  for (int c = 0; c < m; ++c) {
    beta_con[c] = beta_value(st.acq.beta_constraint, n,
                             con_theoretical ? st.constraint_gps[c].information_gain() : 0.0);
  }

  Eigen::VectorXd cost_mean, cost_var;
  st.cost_gp.posterior_batch(grid.points, cost_mean, cost_var);
  std::vector<Eigen::VectorXd> con_mean(m), con_var(m);
  for (int c = 0; c < m; ++c) {
    st.constraint_gps[c].posterior_batch(grid.points, con_mean[c], con_var[c]);
  }

  std::ofstream out(path);
  out << "# safebo-grid v1\n";
  for (int d = 0; d < st.domain.dim(); ++d) out << (d ? "," : "") << "x" << d;
  out << ",cost_mean,cost_sd,cost_lcb";
  for (int c = 0; c < m; ++c) {
    out << ",con" << c << "_mean,con" << c << "_sd,con" << c << "_lcb";
  }
  out << ",barrier_sum,safe_member\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    for (int d = 0; d < st.domain.dim(); ++d) out << (d ? "," : "") << format_double(grid.points(i, d));
    const double sd0 = std::sqrt(cost_var[i]);
    out << "," << format_double(cost_mean[i]) << "," << format_double(sd0) << ","
        << format_double(cost_mean[i] - std::sqrt(beta0) * sd0);
    double barrier_sum = 0.0;
    bool safe = m > 0;
    for (int c = 0; c < m; ++c) {
      const double sd = std::sqrt(con_var[c][i]);
      const double lcb_c = con_mean[c][i] - std::sqrt(beta_con[c]) * sd;
      out << "," << format_double(con_mean[c][i]) << "," << format_double(sd) << ","
          << format_double(lcb_c);
      const double b = barrier_term(Posterior{con_mean[c][i], con_var[c][i]}, beta_con[c]);
      if (b == kNegInf) safe = false;
      barrier_sum += b;
    }
    out << "," << format_double(barrier_sum) << "," << (safe ? 1 : 0) << "\n";
  }
}

struct DoseSeries {
  std::vector<double> pct;  // per meal, one entry per record
};

}  // namespace

void report(const std::filesystem::path& summary_file) {
  std::ifstream in(summary_file);
  if (!in) throw std::runtime_error("report: cannot open " + summary_file.string());
  json summary = json::parse(in);
  const std::filesystem::path dir = summary_file.parent_path();

  std::vector<std::string> violations;
  RunConfig config = config_from_json(summary.at("config"), violations);
  if (!violations.empty()) throw ConfigError(std::move(violations));
  auto more = finalize_config(config);
  if (!more.empty()) throw ConfigError(std::move(more));

  Resolved res;
  const bool glucose = config.problem == "glucose";
  if (glucose) {
    std::ifstream pf(dir / summary.at("problem").at("patients_file").get<std::string>());
    std::stringstream buf;
    buf << pf.rdbuf();
    res.patients = cohort_from_json(buf.str());
    res.optimal_dose = summary.at("problem").at("optimal_dose").get<std::vector<double>>();
  } else if (config.problem == "toy1d") {
    res.toy = std::make_shared<SyntheticProblem>(toy_1d(config.noise_std));
  } else {
    res.toy = std::make_shared<SyntheticProblem>(toy_2d(config.noise_std));
  }

  std::ofstream rep(dir / "report.txt");
  rep << "problem: " << config.problem << "\n";
  rep << "methods:\n";
  for (const auto& item : summary.at("methods").items()) {
    rep << "  " << item.key() << ": cells=" << item.value().at("cells")
        << " violations=" << item.value().at("violations")
        << " fallbacks=" << item.value().at("fallbacks") << "\n";
  }
  rep << "\n";

  // Per-method dose convergence across patients (glucose).
  std::map<std::string, std::vector<DoseSeries>> dose_by_method;
  std::map<std::string, std::vector<std::vector<TirMetrics>>> tir_by_method;

  for (const auto& cj : summary.at("cells")) {
    const std::string run_id = cj.at("run_id").get<std::string>();
    if (!cj.at("error").get<std::string>().empty()) {
      rep << run_id << ": FAILED (" << cj.at("error").get<std::string>() << ")\n";
      continue;
    }
    const auto records = read_records_csv(dir / cj.at("records_file").get<std::string>());
    const CellSpec spec{cj.at("method").get<std::string>(), cj.at("seed").get<std::uint64_t>(),
                        cj.contains("patient") ? cj.at("patient").get<int>() : -1};
    const LoopConfig lc = make_loop_config(config, res, spec);

    for (int iter : config.log_iters) {
      if (iter >= static_cast<int>(records.size())) continue;
      const SafeBoState st = replay_state(lc, records, iter);
      emit_grid_file(dir / ("grid_" + run_id + "_iter" + std::to_string(iter) + ".csv"), st);
    }

    rep << run_id << ": records=" << records.size()
        << " violations=" << cj.at("violations").get<int>();
    if (cj.contains("simple_regret")) rep << " simple_regret=" << cj.at("simple_regret").dump();
    if (cj.contains("final_dose")) {
      rep << " final_dose=" << cj.at("final_dose").get<double>() << " ("
          << cj.at("final_dose_pct_of_optimal").get<double>() << "% of optimal)";
    }
    rep << "\n";

    if (glucose) {
      // Re-simulate the meals with the cell's oracle stream to recover
      // the exact CGM traces.
      DoseOracle oracle(res.patients[spec.patient_index], 80.0,
                        mix_seed(spec.seed, spec.patient_index));
      for (const auto& r : records) oracle.query(r.x);
      const auto& traces = oracle.traces();

      std::ofstream tir_out(dir / ("tir_" + run_id + ".csv"));
      tir_out << "meal,tir_cgm,tar_cgm,tbr_cgm,tir_true,tar_true,tbr_true\n";
      std::vector<TirMetrics> cell_tir;
      DoseSeries series;
      const double optimal = res.optimal_dose[spec.patient_index];
      std::ofstream dose_out(dir / ("doses_" + run_id + ".csv"));
      dose_out << "meal,dose,pct_of_optimal\n";
      for (std::size_t k = 0; k < traces.size(); ++k) {
        std::ofstream cgm_out(dir / ("cgm_" + run_id + "_meal" + std::to_string(k) + ".csv"));
        cgm_out << "t_min,cgm,true_bg\n";
        for (std::size_t s = 0; s < traces[k].time_min.size(); ++s) {
          cgm_out << format_double(traces[k].time_min[s]) << "," << format_double(traces[k].cgm[s])
                  << "," << format_double(traces[k].true_bg[s]) << "\n";
        }
        const TirMetrics cgm_tir = tir_metrics(traces[k].cgm);
        const TirMetrics true_tir = tir_metrics(traces[k].true_bg);
        tir_out << k << "," << format_double(cgm_tir.in_range) << ","
                << format_double(cgm_tir.above_range) << "," << format_double(cgm_tir.below_range)
                << "," << format_double(true_tir.in_range) << ","
                << format_double(true_tir.above_range) << ","
                << format_double(true_tir.below_range) << "\n";
        cell_tir.push_back(cgm_tir);
        const double pct = optimal > 0.0 ? 100.0 * records[k].x[0] / optimal : 0.0;
        series.pct.push_back(pct);
        dose_out << k << "," << format_double(records[k].x[0]) << "," << format_double(pct) << "\n";
      }
      dose_by_method[spec.method].push_back(std::move(series));
      tir_by_method[spec.method].push_back(std::move(cell_tir));
    }
  }

  // Cohort aggregates per method.
  for (const auto& [method, all_series] : dose_by_method) {
    std::ofstream out(dir / ("dose_convergence_" + method + ".csv"));
    out << "meal,median_pct,p05_pct,p95_pct\n";
    const std::size_t meals = all_series.front().pct.size();
    for (std::size_t k = 0; k < meals; ++k) {
      std::vector<double> vals;
      for (const auto& s : all_series) {
        if (k < s.pct.size()) vals.push_back(s.pct[k]);
      }
      std::sort(vals.begin(), vals.end());
      const auto pick = [&](double q) {
        const double pos = q * (vals.size() - 1);
        return vals[static_cast<std::size_t>(std::lround(pos))];
      };
      out << k << "," << format_double(pick(0.5)) << "," << format_double(pick(0.05)) << ","
          << format_double(pick(0.95)) << "\n";
    }
  }
  for (const auto& [method, all_tir] : tir_by_method) {
    std::ofstream out(dir / ("tir_by_meal_" + method + ".csv"));
    out << "meal,mean_tir,mean_tar,mean_tbr\n";
    const std::size_t meals = all_tir.front().size();
    for (std::size_t k = 0; k < meals; ++k) {
      double tir = 0.0, tar = 0.0, tbr = 0.0;
      int count = 0;
      for (const auto& cell : all_tir) {
        if (k < cell.size()) {
          tir += cell[k].in_range;
          tar += cell[k].above_range;
          tbr += cell[k].below_range;
          ++count;
        }
      }
      out << k << "," << format_double(tir / count) << "," << format_double(tar / count) << ","
          << format_double(tbr / count) << "\n";
    }
  }
}

}  // namespace safebo
