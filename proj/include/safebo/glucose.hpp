#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safebo/oracle.hpp"
#include "safebo/rng.hpp"

namespace safebo {

/// Virtual type-1-diabetes patient: a minimal-model glucose core
/// (glucose, remote insulin action) extended with a two-compartment
/// carbohydrate absorption chain and a two-compartment subcutaneous
/// insulin chain. Plasma insulin is modeled as a deviation from basal,
/// so the basal infusion holds the no-meal equilibrium by construction.
///
/// State (units):
///   G   plasma glucose, mg/dl
///   Xr  remote insulin action, 1/min
///   Ip  plasma insulin above basal, mU/l
///   S1, S2  subcutaneous insulin depots, U
///   Q1, Q2  gut carbohydrate compartments, mg
///
/// Dynamics:
///   dG/dt  = -p1 (G - Gb) - Xr G + Q2 / (tmax_g Vg)
///   dXr/dt = -p2 Xr + p3 Ip
///   dIp/dt = -ke Ip + 1000 S2 / (tmax_i Vi)
///   dS1/dt = -S1 / tmax_i                  (S1(0) = bolus)
///   dS2/dt = (S1 - S2) / tmax_i
///   dQ1/dt = -Q1 / tmax_g                  (Q1(0) = bioavailability * carbs)
///   dQ2/dt = (Q1 - Q2) / tmax_g
struct PatientModel {
  double body_weight_kg = 70.0;
  double basal_glucose = 120.0;         // Gb, mg/dl
  double glucose_effectiveness = 0.015;  // p1, 1/min
  double insulin_action_decay = 0.05;   // p2, 1/min
  double insulin_sensitivity = 4.5e-5;  // p3, 1/min^2 per (mU/l)
  double insulin_clearance = 0.14;      // ke, 1/min
  double carb_time_constant = 40.0;     // tmax_g, min
  double insulin_time_constant = 45.0;  // tmax_i, min
  double carb_bioavailability = 0.8;
  double glucose_volume_dl_per_kg = 2.2;  // Vg = this * weight
  double insulin_volume_l_per_kg = 0.12;  // Vi = this * weight
  double step_min = 1.0;                // RK4 integrator step
  double cgm_noise_std = 1.5;           // mg/dl
  double cgm_sample_period = 5.0;       // min

  void validate() const;
};

struct MealScenario {
  double carbs_g = 80.0;
  double bolus_u = 0.0;
  double horizon_hours = 6.0;

  void validate() const;
};

/// CGM samples plus the parallel noiseless series.
struct CgmTrace {
  std::vector<double> time_min;
  std::vector<double> cgm;
  std::vector<double> true_bg;
};

/// Fixed-step RK4 simulation of one meal. The bolus enters the first
/// subcutaneous compartment at t = 0; CGM samples carry i.i.d. Gaussian
/// noise from `rng`. Throws on a non-finite state, naming the step.
CgmTrace simulate(const PatientModel& patient, const MealScenario& scenario, Rng& rng);

/// Noiseless variant: the trace's cgm equals true_bg.
CgmTrace simulate_noiseless(const PatientModel& patient, const MealScenario& scenario);

/// Asymmetric per-sample glycemic penalty.
double glycemic_penalty(double cgm);

/// Cumulative glycemic penalty index: sum of the penalty over all CGM
/// samples in the trace.
double gpi(const CgmTrace& trace);

/// Lowest CGM value recorded after the (smoothed) meal peak, minus the
/// 70 mg/dl hypoglycemia limit. Peak detection uses a 3-sample centered
/// moving average with earliest-index tie-breaking.
double hypo_constraint(const CgmTrace& trace);

struct TirMetrics {
  double in_range = 0.0;    // 70 < value <= 180
  double above_range = 0.0;  // value > 180
  double below_range = 0.0;  // value <= 70
};

TirMetrics tir_metrics(const std::vector<double>& samples);

/// Dose-guidance oracle: query(x) runs one standardized meal with bolus
/// x and returns (gpi, hypo constraint) from the noisy CGM trace; truth
/// uses a zero-noise simulation. Keeps the simulated traces for
/// reporting.
class DoseOracle : public Oracle {
 public:
  DoseOracle(PatientModel patient, double carbs_g, std::uint64_t seed);

  int input_dim() const override { return 1; }
  int num_constraints() const override { return 1; }
  std::vector<double> query(const Eigen::VectorXd& x) override;
  std::optional<std::vector<double>> truth(const Eigen::VectorXd& x) const override;

  const PatientModel& patient() const { return patient_; }
  const std::vector<CgmTrace>& traces() const { return traces_; }

  static constexpr double kMaxBolus = 20.0;

 private:
  PatientModel patient_;
  double carbs_g_;
  Rng rng_;
  std::vector<CgmTrace> traces_;
};

/// Noiseless dose sweep over [lo, hi] at `resolution` U; returns the
/// dose minimizing the true GPI.
double brute_force_optimal_dose(const PatientModel& patient, double carbs_g = 80.0,
                                double lo = 0.0, double hi = DoseOracle::kMaxBolus,
                                double resolution = 0.05);

/// Draw `n` patients around the default parameter set (log-normal
/// factors). Every returned patient is calibrated: 0.5 U is safe, 20 U
/// is unsafe, and the optimal dose is unique and interior. Draws failing
/// calibration are rejected and resampled (at most 100 attempts each).
std::vector<PatientModel> cohort(int n, Rng& rng);

/// JSON (de)serialization for sharable cohorts; schema documented in the
/// README.
std::string patient_to_json(const PatientModel& patient);
PatientModel patient_from_json(const std::string& text);
std::string cohort_to_json(const std::vector<PatientModel>& patients);
std::vector<PatientModel> cohort_from_json(const std::string& text);

}  // namespace safebo
