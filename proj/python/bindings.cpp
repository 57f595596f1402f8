#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "safebo/acquisition.hpp"
#include "safebo/experiment.hpp"
#include "safebo/glucose.hpp"
#include "safebo/gp.hpp"
#include "safebo/kernel.hpp"
#include "safebo/problems.hpp"
#include "safebo/safe_loop.hpp"

namespace py = pybind11;
using namespace safebo;

namespace {

// Run the full loop against a named built-in problem; the heavy lifting
// stays in C++ so python callers only deal with plain records.
std::vector<ExperimentRecord> run_toy(const std::string& problem, const std::string& method,
                                      int budget, std::uint64_t seed, double noise_std,
                                      double tau, double beta, int grid_points_per_dim) {
  SyntheticProblem prob = problem == "toy2d" ? toy_2d(noise_std) : toy_1d(noise_std);
  ProblemOracle oracle(prob, seed);

  LoopConfig lc;
  lc.domain = prob.domain;
  if (grid_points_per_dim > 0) lc.domain.grid_points_per_dim = grid_points_per_dim;
  lc.x0 = prob.x0;
  lc.cost_kernel = rbf(0.5, 80.0);
  lc.constraint_kernels.assign(prob.constraints.size(), rbf(0.5, 80.0));
  lc.cost_noise_std = std::max(noise_std, 1e-4);
  lc.constraint_noise_std.assign(prob.constraints.size(), std::max(noise_std, 1e-4));
  lc.budget = budget;
  lc.seed = seed;
  lc.acq.tau = tau;
  lc.acq.beta_cost = fixed_beta(beta);
  lc.acq.beta_constraint = fixed_beta(beta);
  if (method == "barrier") {
    lc.acq.safety = SafetyMode::Barrier;
  } else if (method == "pf") {
    lc.acq.safety = SafetyMode::Pf;
    lc.acq.base = BaseAcquisition::Ei;
  } else if (method == "pourmohamad") {
    lc.acq.safety = SafetyMode::Pourmohamad;
  } else if (method == "safeopt_rule") {
    lc.acq.safety = SafetyMode::SafeOptRule;
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }
  return run_loop(oracle, lc);
}

}  // namespace

PYBIND11_MODULE(safebo, m) {
  m.doc() = "Safe Bayesian optimization with log-barrier acquisitions";

  py::register_exception<SingularCovarianceError>(m, "SingularCovarianceError");
  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<Posterior>(m, "Posterior")
      .def(py::init<double, double>(), py::arg("mean") = 0.0, py::arg("variance") = 0.0)
      .def_readwrite("mean", &Posterior::mean)
      .def_readwrite("variance", &Posterior::variance)
      .def("__repr__", [](const Posterior& p) {
        return "Posterior(mean=" + std::to_string(p.mean) +
               ", variance=" + std::to_string(p.variance) + ")";
      });

  py::class_<RbfKernel>(m, "RbfKernel")
      .def_readonly("lengthscale", &RbfKernel::lengthscale)
      .def_readonly("variance", &RbfKernel::variance);
  py::class_<LinearKernel>(m, "LinearKernel")
      .def_readonly("variance", &LinearKernel::variance)
      .def_readonly("offset", &LinearKernel::offset);
  py::class_<SumKernel>(m, "SumKernel").def_readonly("terms", &SumKernel::terms);

  m.def("rbf", &rbf, py::arg("lengthscale"), py::arg("variance"));
  m.def("linear", &linear, py::arg("variance"), py::arg("offset") = 0.0);
  m.def("sum_kernel", &sum, py::arg("terms"));
  m.def("kernel_eval", &kernel_eval, py::arg("kernel"), py::arg("x"), py::arg("y"));

  py::class_<GpModel>(m, "GpModel")
      .def(py::init<KernelSpec, double, double, int>(), py::arg("kernel"),
           py::arg("prior_mean") = 0.0, py::arg("noise_std") = 0.1, py::arg("input_dim") = 1)
      .def("with_observation", &GpModel::with_observation, py::arg("x"), py::arg("y"))
      .def("with_data", &GpModel::with_data, py::arg("X"), py::arg("y"))
      .def("conditioned", &GpModel::conditioned)
      .def("posterior", &GpModel::posterior, py::arg("x"))
      .def("information_gain", &GpModel::information_gain)
      .def_property_readonly("size", &GpModel::size)
      .def_property_readonly("input_dim", &GpModel::input_dim);

  py::class_<FixedBeta>(m, "FixedBeta").def_readonly("value", &FixedBeta::value);
  py::class_<TheoreticalBeta>(m, "TheoreticalBeta")
      .def_readonly("rkhs_bound", &TheoreticalBeta::rkhs_bound)
      .def_readonly("noise", &TheoreticalBeta::noise)
      .def_readonly("delta", &TheoreticalBeta::delta);

  m.def("fixed_beta", &fixed_beta, py::arg("value"));
  m.def("theoretical_beta", &theoretical_beta, py::arg("rkhs_bound"), py::arg("noise"),
        py::arg("delta"));
  m.def("beta_value", &beta_value, py::arg("schedule"), py::arg("n"), py::arg("info_gain"));
  m.def("lcb", &lcb, py::arg("cost"), py::arg("beta"));
  m.def("expected_improvement", &expected_improvement, py::arg("cost"), py::arg("best"));
  m.def("probability_of_improvement", &probability_of_improvement, py::arg("cost"),
        py::arg("best"));
  m.def("barrier_term", &barrier_term, py::arg("constraint"), py::arg("beta"));
  m.def("barrier_acquisition", &barrier_acquisition, py::arg("base_value"),
        py::arg("barrier_terms"), py::arg("tau"));
  m.def("pf_acquisition", &pf_acquisition, py::arg("base_ei"), py::arg("constraints"));
  m.def("pourmohamad_acquisition", &pourmohamad_acquisition, py::arg("cost"),
        py::arg("constraints"));
  m.def("safeopt_rule_score", &safeopt_rule_score, py::arg("posteriors"), py::arg("betas"));

  py::class_<ExperimentRecord>(m, "ExperimentRecord")
      .def_readonly("run_id", &ExperimentRecord::run_id)
      .def_readonly("seed", &ExperimentRecord::seed)
      .def_readonly("iteration", &ExperimentRecord::iteration)
      .def_readonly("x", &ExperimentRecord::x)
      .def_readonly("observed", &ExperimentRecord::observed)
      .def_readonly("truth", &ExperimentRecord::truth)
      .def_readonly("safe_set_fraction", &ExperimentRecord::safe_set_fraction)
      .def_readonly("min_constraint_lcb", &ExperimentRecord::min_constraint_lcb)
      .def_readonly("fallback", &ExperimentRecord::fallback)
      .def_readonly("violation", &ExperimentRecord::violation);

  m.def("run_toy", &run_toy, py::arg("problem") = "toy1d", py::arg("method") = "barrier",
        py::arg("budget") = 25, py::arg("seed") = 0, py::arg("noise_std") = 0.1,
        py::arg("tau") = 1e-3, py::arg("beta") = 4.0, py::arg("grid_points_per_dim") = 0);

  py::class_<PatientModel>(m, "PatientModel")
      .def(py::init<>())
      .def_readwrite("body_weight_kg", &PatientModel::body_weight_kg)
      .def_readwrite("basal_glucose", &PatientModel::basal_glucose)
      .def_readwrite("glucose_effectiveness", &PatientModel::glucose_effectiveness)
      .def_readwrite("insulin_action_decay", &PatientModel::insulin_action_decay)
      .def_readwrite("insulin_sensitivity", &PatientModel::insulin_sensitivity)
      .def_readwrite("insulin_clearance", &PatientModel::insulin_clearance)
      .def_readwrite("carb_time_constant", &PatientModel::carb_time_constant)
      .def_readwrite("insulin_time_constant", &PatientModel::insulin_time_constant)
      .def_readwrite("carb_bioavailability", &PatientModel::carb_bioavailability)
      .def_readwrite("glucose_volume_dl_per_kg", &PatientModel::glucose_volume_dl_per_kg)
      .def_readwrite("insulin_volume_l_per_kg", &PatientModel::insulin_volume_l_per_kg)
      .def_readwrite("step_min", &PatientModel::step_min)
      .def_readwrite("cgm_noise_std", &PatientModel::cgm_noise_std)
      .def_readwrite("cgm_sample_period", &PatientModel::cgm_sample_period);

  py::class_<MealScenario>(m, "MealScenario")
      .def(py::init<>())
      .def_readwrite("carbs_g", &MealScenario::carbs_g)
      .def_readwrite("bolus_u", &MealScenario::bolus_u)
      .def_readwrite("horizon_hours", &MealScenario::horizon_hours);

  py::class_<CgmTrace>(m, "CgmTrace")
      .def_readonly("time_min", &CgmTrace::time_min)
      .def_readonly("cgm", &CgmTrace::cgm)
      .def_readonly("true_bg", &CgmTrace::true_bg);

  m.def(
      "simulate",
      [](const PatientModel& p, const MealScenario& s, std::uint64_t seed) {
        Rng rng(seed);
        return simulate(p, s, rng);
      },
      py::arg("patient"), py::arg("scenario"), py::arg("seed") = 0);
  m.def("simulate_noiseless", &simulate_noiseless, py::arg("patient"), py::arg("scenario"));
  m.def("glycemic_penalty", &glycemic_penalty, py::arg("cgm"));
  m.def("gpi", &gpi, py::arg("trace"));
  m.def("hypo_constraint", &hypo_constraint, py::arg("trace"));
  m.def(
      "tir_metrics",
      [](const std::vector<double>& samples) {
        const TirMetrics t = tir_metrics(samples);
        return py::make_tuple(t.in_range, t.above_range, t.below_range);
      },
      py::arg("samples"));
  m.def("brute_force_optimal_dose", &brute_force_optimal_dose, py::arg("patient"),
        py::arg("carbs_g") = 80.0, py::arg("lo") = 0.0, py::arg("hi") = DoseOracle::kMaxBolus,
        py::arg("resolution") = 0.05);
  m.def(
      "cohort",
      [](int n, std::uint64_t seed) {
        Rng rng(seed);
        return cohort(n, rng);
      },
      py::arg("n"), py::arg("seed") = 7);
  m.def("patient_to_json", &patient_to_json, py::arg("patient"));
  m.def("patient_from_json", &patient_from_json, py::arg("text"));

  m.def("parse_config", &parse_config, py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"));
  m.def(
      "run_config_file",
      [](const std::filesystem::path& path, const std::string& out_dir) {
        RunConfig config = parse_config(path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        const ExecutionResult result = execute(config);
        report(result.summary_file);
        return result.summary_file;
      },
      py::arg("path"), py::arg("out_dir") = "");

  py::class_<RunConfig>(m, "RunConfig");

  m.attr("__version__") = "0.1.0";
}
