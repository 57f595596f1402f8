#include "safebo/glucose.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace safebo {

void PatientModel::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("PatientModel: ") + name + " must be > 0");
  };
  positive(body_weight_kg, "body_weight_kg");
  positive(glucose_effectiveness, "glucose_effectiveness");
  positive(insulin_action_decay, "insulin_action_decay");
  positive(insulin_sensitivity, "insulin_sensitivity");
  positive(insulin_clearance, "insulin_clearance");
  positive(carb_time_constant, "carb_time_constant");
  positive(insulin_time_constant, "insulin_time_constant");
  positive(glucose_volume_dl_per_kg, "glucose_volume_dl_per_kg");
  positive(insulin_volume_l_per_kg, "insulin_volume_l_per_kg");
  positive(step_min, "step_min");
  positive(cgm_sample_period, "cgm_sample_period");
  if (!(carb_bioavailability > 0.0 && carb_bioavailability <= 1.0)) {
    throw std::invalid_argument("PatientModel: carb_bioavailability must lie in (0, 1]");
  }
  if (cgm_noise_std < 0.0) throw std::invalid_argument("PatientModel: cgm_noise_std must be >= 0");
  if (basal_glucose < 90.0 || basal_glucose > 160.0) {
    throw std::invalid_argument("PatientModel: basal_glucose must lie in [90, 160] mg/dl");
  }
}

void MealScenario::validate() const {
  if (carbs_g < 0.0) throw std::invalid_argument("MealScenario: carbs_g must be >= 0");
  if (bolus_u < 0.0) throw std::invalid_argument("MealScenario: bolus_u must be >= 0");
  if (!(horizon_hours > 0.0)) throw std::invalid_argument("MealScenario: horizon must be > 0");
}

namespace {

// State layout: G, Xr, Ip, S1, S2, Q1, Q2.
using PatientState = std::array<double, 7>;

PatientState derivatives(const PatientModel& p, const PatientState& s) {
  const double vg = p.glucose_volume_dl_per_kg * p.body_weight_kg;  // dl
  const double vi = p.insulin_volume_l_per_kg * p.body_weight_kg;   // l
  const double g = s[0], xr = s[1], ip = s[2], s1 = s[3], s2 = s[4], q1 = s[5], q2 = s[6];
  PatientState d;
  d[0] = -p.glucose_effectiveness * (g - p.basal_glucose) - xr * g + q2 / (p.carb_time_constant * vg);
  d[1] = -p.insulin_action_decay * xr + p.insulin_sensitivity * ip;
  d[2] = -p.insulin_clearance * ip + 1000.0 * s2 / (p.insulin_time_constant * vi);
  d[3] = -s1 / p.insulin_time_constant;
  d[4] = (s1 - s2) / p.insulin_time_constant;
  d[5] = -q1 / p.carb_time_constant;
  d[6] = (q1 - q2) / p.carb_time_constant;
  return d;
}

PatientState rk4_step(const PatientModel& p, const PatientState& s, double dt) {
  const auto add = [](const PatientState& a, const PatientState& b, double w) {
    PatientState out;
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + w * b[i];
    return out;
  };
  const PatientState k1 = derivatives(p, s);
  const PatientState k2 = derivatives(p, add(s, k1, dt / 2.0));
  const PatientState k3 = derivatives(p, add(s, k2, dt / 2.0));
  const PatientState k4 = derivatives(p, add(s, k3, dt));
  PatientState out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

CgmTrace simulate_impl(const PatientModel& p, const MealScenario& s, Rng* rng) {
  p.validate();
  s.validate();

  PatientState state{p.basal_glucose, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  state[3] = s.bolus_u;                                    // subcutaneous impulse
  state[5] = s.carbs_g * 1000.0 * p.carb_bioavailability;  // mg into the gut

  const double horizon_min = s.horizon_hours * 60.0;
  // The integrator step is snapped so that CGM sample times land exactly
  // on step boundaries.
  const int steps_per_sample = std::max(1, static_cast<int>(std::lround(p.cgm_sample_period / p.step_min)));
  const double dt = p.cgm_sample_period / steps_per_sample;
  const int n_samples = static_cast<int>(std::floor(horizon_min / p.cgm_sample_period + 1e-9)) + 1;

  CgmTrace trace;
  trace.time_min.reserve(n_samples);
  trace.true_bg.reserve(n_samples);
  trace.cgm.reserve(n_samples);

  const auto sample = [&](double t) {
    trace.time_min.push_back(t);
    trace.true_bg.push_back(state[0]);
    const double noise = (rng != nullptr && p.cgm_noise_std > 0.0) ? rng->normal(0.0, p.cgm_noise_std) : 0.0;
    trace.cgm.push_back(state[0] + noise);
  };

  sample(0.0);
  for (int k = 1; k < n_samples; ++k) {
    for (int sub = 0; sub < steps_per_sample; ++sub) {
      state = rk4_step(p, state, dt);
      for (double v : state) {
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "simulate: non-finite state at t = "
              << (k - 1) * p.cgm_sample_period + (sub + 1) * dt << " min";
          throw std::runtime_error(msg.str());
        }
      }
    }
    sample(k * p.cgm_sample_period);
  }
  return trace;
}

}  // namespace

CgmTrace simulate(const PatientModel& patient, const MealScenario& scenario, Rng& rng) {
  return simulate_impl(patient, scenario, &rng);
}

CgmTrace simulate_noiseless(const PatientModel& patient, const MealScenario& scenario) {
  return simulate_impl(patient, scenario, nullptr);
}

double glycemic_penalty(double y) {
  if (y <= 80.0) return 1.0567 * std::pow(80.0 - y, 1.3378);
  if (y <= 140.0) return 0.0;
  if (y <= 300.0) return 0.4607 * std::pow(y - 140.0, 1.0601);
  return 100.0;
}

double gpi(const CgmTrace& trace) {
  if (trace.cgm.empty()) throw std::invalid_argument("gpi: empty trace");
  double total = 0.0;
  for (double y : trace.cgm) total += glycemic_penalty(y);
  return total;
}

double hypo_constraint(const CgmTrace& trace) {
  const auto& y = trace.cgm;
  if (y.empty()) throw std::invalid_argument("hypo_constraint: empty trace");
  const int n = static_cast<int>(y.size());

  // 3-sample centered moving average; shorter window at the ends.
  int peak = 0;
  double peak_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double acc = y[i];
    int count = 1;
    if (i > 0) {
      acc += y[i - 1];
      ++count;
    }
    if (i + 1 < n) {
      acc += y[i + 1];
      ++count;
    }
    const double smoothed = acc / count;
    if (smoothed > peak_value) {
      peak_value = smoothed;
      peak = i;
    }
  }

  double lowest = std::numeric_limits<double>::infinity();
  for (int i = peak; i < n; ++i) lowest = std::min(lowest, y[i]);
  return lowest - 70.0;
}

TirMetrics tir_metrics(const std::vector<double>& samples) {
  if (samples.empty()) throw std::invalid_argument("tir_metrics: empty series");
  TirMetrics out;
  for (double v : samples) {
    if (v > 180.0) {
      out.above_range += 1.0;
    } else if (v > 70.0) {
      out.in_range += 1.0;
    } else {
      out.below_range += 1.0;
    }
  }
  const double n = static_cast<double>(samples.size());
  out.in_range /= n;
  out.above_range /= n;
  out.below_range /= n;
  return out;
}

DoseOracle::DoseOracle(PatientModel patient, double carbs_g, std::uint64_t seed)
    : patient_(std::move(patient)), carbs_g_(carbs_g), rng_(Rng::derive(seed, 0x646f7365)) {
  patient_.validate();
}

std::vector<double> DoseOracle::query(const Eigen::VectorXd& x) {
  if (x.size() != 1 || x[0] < 0.0 || x[0] > kMaxBolus) {
    throw std::invalid_argument("DoseOracle: bolus must lie in [0, 20] U");
  }
  MealScenario meal{carbs_g_, x[0], 6.0};
  CgmTrace trace = simulate(patient_, meal, rng_);
  const double cost = gpi(trace);
  const double constraint = hypo_constraint(trace);
  traces_.push_back(std::move(trace));
  return {cost, constraint};
}

std::optional<std::vector<double>> DoseOracle::truth(const Eigen::VectorXd& x) const {
  if (x.size() != 1 || x[0] < 0.0 || x[0] > kMaxBolus) {
    throw std::invalid_argument("DoseOracle: bolus must lie in [0, 20] U");
  }
  MealScenario meal{carbs_g_, x[0], 6.0};
  const CgmTrace trace = simulate_noiseless(patient_, meal);
  return std::vector<double>{gpi(trace), hypo_constraint(trace)};
}

double brute_force_optimal_dose(const PatientModel& patient, double carbs_g, double lo, double hi,
                                double resolution) {
  double best_dose = lo;
  double best_cost = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround((hi - lo) / resolution));
  for (int i = 0; i <= n; ++i) {
    const double dose = lo + i * resolution;
    const CgmTrace trace = simulate_noiseless(patient, MealScenario{carbs_g, dose, 6.0});
    const double cost = gpi(trace);
    if (cost < best_cost) {
      best_cost = cost;
      best_dose = dose;
    }
  }
  return best_dose;
}

namespace {

bool calibrated(const PatientModel& p) {
  const auto truth_constraint = [&](double dose) {
    return hypo_constraint(simulate_noiseless(p, MealScenario{80.0, dose, 6.0}));
  };
  if (!(truth_constraint(0.5) > 0.0)) return false;   // starting dose must be safe
  if (!(truth_constraint(20.0) < 0.0)) return false;  // overdose must be unsafe

  // Unique interior optimum on the 0.05 U sweep.
  double best_cost = std::numeric_limits<double>::infinity();
  double best_dose = 0.0;
  int ties = 0;
  for (int i = 0; i <= 400; ++i) {
    const double dose = i * 0.05;
    const double cost = gpi(simulate_noiseless(p, MealScenario{80.0, dose, 6.0}));
    if (cost < best_cost) {
      best_cost = cost;
      best_dose = dose;
      ties = 1;
    } else if (cost == best_cost) {
      ++ties;
    }
  }
  return ties == 1 && best_dose > 0.5 && best_dose < 20.0;
}

}  // namespace

std::vector<PatientModel> cohort(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("cohort: n must be >= 1");
  std::vector<PatientModel> patients;
  patients.reserve(n);
  const PatientModel base;
  for (int i = 0; i < n; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      PatientModel p = base;
      p.insulin_sensitivity *= std::exp(rng.normal(0.0, 0.22));
      p.glucose_effectiveness *= std::exp(rng.normal(0.0, 0.18));
      p.carb_time_constant *= std::exp(rng.normal(0.0, 0.12));
      p.insulin_time_constant *= std::exp(rng.normal(0.0, 0.10));
      p.body_weight_kg *= std::exp(rng.normal(0.0, 0.12));
      p.basal_glucose = std::clamp(base.basal_glucose * std::exp(rng.normal(0.0, 0.05)), 100.0, 150.0);
      if (calibrated(p)) {
        patients.push_back(std::move(p));
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw std::runtime_error("cohort: failed to draw a calibrated patient in 100 attempts");
    }
  }
  return patients;
}

namespace {

nlohmann::json patient_json(const PatientModel& p) {
  return nlohmann::json{{"body_weight_kg", p.body_weight_kg},
                        {"basal_glucose", p.basal_glucose},
                        {"glucose_effectiveness", p.glucose_effectiveness},
                        {"insulin_action_decay", p.insulin_action_decay},
                        {"insulin_sensitivity", p.insulin_sensitivity},
                        {"insulin_clearance", p.insulin_clearance},
                        {"carb_time_constant", p.carb_time_constant},
                        {"insulin_time_constant", p.insulin_time_constant},
                        {"carb_bioavailability", p.carb_bioavailability},
                        {"glucose_volume_dl_per_kg", p.glucose_volume_dl_per_kg},
                        {"insulin_volume_l_per_kg", p.insulin_volume_l_per_kg},
                        {"step_min", p.step_min},
                        {"cgm_noise_std", p.cgm_noise_std},
                        {"cgm_sample_period", p.cgm_sample_period}};
}

PatientModel patient_from(const nlohmann::json& j) {
  PatientModel p;
  p.body_weight_kg = j.at("body_weight_kg").get<double>();
  p.basal_glucose = j.at("basal_glucose").get<double>();
  p.glucose_effectiveness = j.at("glucose_effectiveness").get<double>();
  p.insulin_action_decay = j.at("insulin_action_decay").get<double>();
  p.insulin_sensitivity = j.at("insulin_sensitivity").get<double>();
  p.insulin_clearance = j.at("insulin_clearance").get<double>();
  p.carb_time_constant = j.at("carb_time_constant").get<double>();
  p.insulin_time_constant = j.at("insulin_time_constant").get<double>();
  p.carb_bioavailability = j.at("carb_bioavailability").get<double>();
  p.glucose_volume_dl_per_kg = j.at("glucose_volume_dl_per_kg").get<double>();
  p.insulin_volume_l_per_kg = j.at("insulin_volume_l_per_kg").get<double>();
  p.step_min = j.at("step_min").get<double>();
  p.cgm_noise_std = j.at("cgm_noise_std").get<double>();
  p.cgm_sample_period = j.at("cgm_sample_period").get<double>();
  p.validate();
  return p;
}

}  // namespace

std::string patient_to_json(const PatientModel& patient) {
  nlohmann::json j = patient_json(patient);
  j["schema"] = "safebo-patient-v1";
  return j.dump(2);
}

PatientModel patient_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "safebo-patient-v1") {
    throw std::invalid_argument("patient_from_json: unknown schema");
  }
  return patient_from(j);
}

std::string cohort_to_json(const std::vector<PatientModel>& patients) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : patients) arr.push_back(patient_json(p));
  nlohmann::json j{{"schema", "safebo-cohort-v1"}, {"patients", arr}};
  return j.dump(2);
}

std::vector<PatientModel> cohort_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "safebo-cohort-v1") {
    throw std::invalid_argument("cohort_from_json: unknown schema");
  }
  std::vector<PatientModel> out;
  for (const auto& pj : j.at("patients")) out.push_back(patient_from(pj));
  return out;
}

}  // namespace safebo
