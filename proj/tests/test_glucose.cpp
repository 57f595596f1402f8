#include <doctest.h>

#include <cmath>

#include "safebo/glucose.hpp"

using namespace safebo;

TEST_CASE("no meal, no bolus: glucose holds the basal equilibrium") {
  const PatientModel p;
  const CgmTrace t = simulate_noiseless(p, MealScenario{0.0, 0.0, 6.0});
  for (double g : t.true_bg) CHECK(std::abs(g - p.basal_glucose) <= 1.0);
}

TEST_CASE("a meal without insulin rises, peaks and decays") {
  const PatientModel p;
  const CgmTrace t = simulate_noiseless(p, MealScenario{80.0, 0.0, 6.0});
  const auto peak = std::max_element(t.true_bg.begin(), t.true_bg.end());
  CHECK(*peak > p.basal_glucose + 50.0);
  // single peak: nondecreasing before, nonincreasing after (tolerance for
  // the flat start)
  const std::size_t pk = peak - t.true_bg.begin();
  for (std::size_t i = 1; i <= pk; ++i) CHECK(t.true_bg[i] >= t.true_bg[i - 1] - 1e-6);
  for (std::size_t i = pk + 1; i < t.true_bg.size(); ++i) {
    CHECK(t.true_bg[i] <= t.true_bg[i - 1] + 1e-6);
  }
}

TEST_CASE("a 20 U overdose drives the default patient hypoglycemic") {
  const PatientModel p;
  const CgmTrace t = simulate_noiseless(p, MealScenario{80.0, 20.0, 6.0});
  CHECK(*std::min_element(t.true_bg.begin(), t.true_bg.end()) < 70.0);
}

TEST_CASE("halving the integrator step changes the trace imperceptibly") {
  PatientModel fine;
  fine.step_min = 0.5;
  const PatientModel coarse;
  const MealScenario meal{80.0, 6.0, 6.0};
  const CgmTrace a = simulate_noiseless(coarse, meal);
  const CgmTrace b = simulate_noiseless(fine, meal);
  REQUIRE(a.true_bg.size() == b.true_bg.size());
  for (std::size_t i = 0; i < a.true_bg.size(); ++i) {
    CHECK(std::abs(a.true_bg[i] - b.true_bg[i]) < 0.1);
  }
}

TEST_CASE("glycemic penalty bands") {
  CHECK(glycemic_penalty(80.0) == 0.0);
  CHECK(glycemic_penalty(110.0) == 0.0);
  CHECK(glycemic_penalty(140.0) == 0.0);
  CHECK(std::abs(glycemic_penalty(300.0) - 100.0) < 0.1);  // near-continuity at the cap
  CHECK(glycemic_penalty(301.0) == 100.0);
  CHECK(glycemic_penalty(60.0) == doctest::Approx(1.0567 * std::pow(20.0, 1.3378)));
  CHECK(glycemic_penalty(200.0) == doctest::Approx(0.4607 * std::pow(60.0, 1.0601)));
}

TEST_CASE("gpi is zero exactly when every sample is inside the zero band") {
  CgmTrace t;
  t.time_min = {0, 5, 10};
  t.cgm = {110.0, 95.0, 139.9};
  t.true_bg = t.cgm;
  CHECK(gpi(t) == 0.0);
  t.cgm[1] = 79.9;
  CHECK(gpi(t) > 0.0);
  t.cgm[1] = 140.1;
  CHECK(gpi(t) > 0.0);

  Rng rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    CgmTrace r;
    bool all_in_band = true;
    for (int i = 0; i < 12; ++i) {
      r.time_min.push_back(5.0 * i);
      const double y = rng.uniform(40.0, 320.0);
      r.cgm.push_back(y);
      all_in_band = all_in_band && y > 80.0 && y <= 140.0;
    }
    r.true_bg = r.cgm;
    CHECK((gpi(r) == 0.0) == all_in_band);
  }
}

TEST_CASE("hypo constraint on a monotone-decreasing trace") {
  CgmTrace t;
  for (int i = 0; i < 20; ++i) {
    t.time_min.push_back(5.0 * i);
    t.cgm.push_back(180.0 - 90.0 * i / 19.0);  // ends at 90
  }
  t.true_bg = t.cgm;
  CHECK(hypo_constraint(t) == doctest::Approx(20.0));
}

TEST_CASE("hypo constraint flags a dip below 70 after the peak") {
  CgmTrace t;
  t.time_min = {0, 5, 10, 15, 20, 25};
  t.cgm = {120.0, 160.0, 150.0, 100.0, 65.0, 90.0};
  t.true_bg = t.cgm;
  CHECK(hypo_constraint(t) == doctest::Approx(-5.0));
}

TEST_CASE("hypo constraint uses the smoothed peak on a noisy trace") {
  // Raw argmax is the lone spike at index 1 (210), which would start the
  // window at the dip to 95 and give 25. The 3-sample moving average
  // peaks at index 5 instead, so the constraint is min{110..} - 70 = 40.
  CgmTrace t;
  t.time_min = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45};
  t.cgm = {100.0, 210.0, 100.0, 95.0, 150.0, 170.0, 160.0, 140.0, 120.0, 110.0};
  t.true_bg = t.cgm;
  CHECK(hypo_constraint(t) == doctest::Approx(40.0));
}

TEST_CASE("tir fractions count samples and sum to one") {
  CHECK(tir_metrics({110.0, 110.0}).in_range == 1.0);
  CHECK(tir_metrics({200.0}).above_range == 1.0);
  const TirMetrics half = tir_metrics({110.0, 60.0, 110.0, 60.0});
  CHECK(half.in_range == doctest::Approx(0.5));
  CHECK(half.below_range == doctest::Approx(0.5));
  CHECK(half.above_range == 0.0);
  const TirMetrics mix = tir_metrics({50.0, 70.0, 70.1, 180.0, 180.1, 300.0});
  CHECK(mix.in_range + mix.above_range + mix.below_range == doctest::Approx(1.0));
  CHECK(mix.below_range == doctest::Approx(2.0 / 6.0));  // 70 counts as below
  CHECK(mix.above_range == doctest::Approx(2.0 / 6.0));  // 180 counts as in range
}

TEST_CASE("dose oracle: starting dose safe, truth deterministic, bounds enforced") {
  DoseOracle oracle(PatientModel{}, 80.0, 4);
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(1, 0.5);
  const auto t1 = *oracle.truth(start);
  const auto t2 = *oracle.truth(start);
  CHECK(t1 == t2);
  CHECK(t1[1] > 0.0);  // hypo constraint at the 0.5 U starting dose
  CHECK_THROWS_AS(oracle.query(Eigen::VectorXd::Constant(1, 20.5)), std::invalid_argument);
  CHECK_THROWS_AS(oracle.query(Eigen::VectorXd::Constant(1, -0.1)), std::invalid_argument);
  const auto obs = oracle.query(start);
  CHECK(obs.size() == 2);
  CHECK(oracle.traces().size() == 1);
}

TEST_CASE("dose response: optimum beats the extremes; hypo risk is monotone") {
  const PatientModel p;
  const double opt = brute_force_optimal_dose(p);
  CHECK(opt > 0.5);
  CHECK(opt < 20.0);
  const auto truth_at = [&](double dose) {
    const CgmTrace t = simulate_noiseless(p, MealScenario{80.0, dose, 6.0});
    return std::pair{gpi(t), hypo_constraint(t)};
  };
  CHECK(truth_at(opt).first <= truth_at(0.0).first);
  CHECK(truth_at(opt).first <= truth_at(20.0).first);

  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const double h = truth_at(i * 0.1).second;
    CHECK(h <= prev + 1e-9);
    prev = h;
  }
}

TEST_CASE("cohort draws are reproducible, calibrated and personalized") {
  Rng r1(7), r2(7);
  const auto a = cohort(3, r1);
  const auto b = cohort(3, r2);
  REQUIRE(a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].insulin_sensitivity == b[i].insulin_sensitivity);
    CHECK(a[i].body_weight_kg == b[i].body_weight_kg);
    // starting dose safe, overdose unsafe
    const CgmTrace safe = simulate_noiseless(a[i], MealScenario{80.0, 0.5, 6.0});
    CHECK(hypo_constraint(safe) > 0.0);
    const CgmTrace unsafe = simulate_noiseless(a[i], MealScenario{80.0, 20.0, 6.0});
    CHECK(hypo_constraint(unsafe) < 0.0);
  }
  const double d0 = brute_force_optimal_dose(a[0]);
  const double d1 = brute_force_optimal_dose(a[1]);
  const double d2 = brute_force_optimal_dose(a[2]);
  CHECK(d0 != d1);
  CHECK(d1 != d2);
}

TEST_CASE("patient json round-trips and rejects unknown schemas") {
  PatientModel p;
  p.insulin_sensitivity *= 1.3;
  p.basal_glucose = 132.0;
  const PatientModel q = patient_from_json(patient_to_json(p));
  CHECK(q.insulin_sensitivity == p.insulin_sensitivity);
  CHECK(q.basal_glucose == p.basal_glucose);
  CHECK(q.carb_time_constant == p.carb_time_constant);
  CHECK_THROWS_AS(patient_from_json("{\"schema\":\"other\"}"), std::invalid_argument);

  Rng rng(5);
  auto patients = cohort(2, rng);
  const auto back = cohort_from_json(cohort_to_json(patients));
  REQUIRE(back.size() == 2);
  CHECK(back[1].insulin_sensitivity == patients[1].insulin_sensitivity);
}

TEST_CASE("patient invariants") {
  PatientModel p;
  p.basal_glucose = 80.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PatientModel{};
  p.carb_time_constant = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PatientModel{};
  p.carb_bioavailability = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("cgm noise is reproducible per seed") {
  const PatientModel p;
  Rng r1(42), r2(42);
  const CgmTrace a = simulate(p, MealScenario{80.0, 3.0, 6.0}, r1);
  const CgmTrace b = simulate(p, MealScenario{80.0, 3.0, 6.0}, r2);
  CHECK(a.cgm == b.cgm);
  CHECK(a.true_bg == b.true_bg);
  for (std::size_t i = 0; i < a.cgm.size(); ++i) CHECK(a.cgm[i] != a.true_bg[i]);
}
