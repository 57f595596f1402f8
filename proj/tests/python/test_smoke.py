"""Smoke tests for the python module: the bindings exist and agree with
independent numpy computations on small cases."""

import math

import numpy as np
import pytest

import safebo


def test_kernel_eval_matches_closed_form():
    k = safebo.rbf(0.5, 80.0)
    x = np.array([0.0])
    y = np.array([0.5])
    assert safebo.kernel_eval(k, x, y) == pytest.approx(80.0 * math.exp(-0.5), rel=1e-12)
    assert safebo.kernel_eval(k, x, x) == pytest.approx(80.0)

    lin = safebo.linear(2.0, 1.0)
    assert safebo.kernel_eval(lin, np.array([2.0]), np.array([3.0])) == pytest.approx(4.0)


def test_gp_posterior_matches_numpy_dense_inversion():
    rng = np.random.default_rng(0)
    X = rng.uniform(-2.0, 2.0, size=(8, 1))
    y = rng.normal(size=8)
    noise = 0.1

    gp = safebo.GpModel(safebo.rbf(0.8, 4.0), 0.0, noise, 1)
    gp = gp.with_data(X, y).conditioned()

    def k(a, b):
        return 4.0 * np.exp(-np.sum((a - b) ** 2) / (2 * 0.8**2))

    K = np.array([[k(X[i], X[j]) for j in range(8)] for i in range(8)])
    A = K + (noise**2 + 1e-10 * np.mean(np.diag(K) + noise**2)) * np.eye(8)

    for xs in ([0.3], [-1.7], [1.1]):
        xs = np.array(xs)
        ks = np.array([k(X[i], xs) for i in range(8)])
        want_mean = ks @ np.linalg.solve(A, y)
        want_var = k(xs, xs) - ks @ np.linalg.solve(A, ks)
        post = gp.posterior(xs)
        assert post.mean == pytest.approx(want_mean, abs=1e-7)
        assert post.variance == pytest.approx(want_var, abs=1e-7)


def test_beta_value_matches_numpy():
    sched = safebo.theoretical_beta(1.0, 0.1, 0.05)
    want = (1.0 + 0.1 * math.sqrt(2.0 * (0.7 + 1.0 + math.log(20.0)))) ** 2
    assert safebo.beta_value(sched, 3, 0.7) == pytest.approx(want, abs=1e-12)
    assert safebo.beta_value(safebo.fixed_beta(4.0), 9, 123.0) == 4.0


def test_barrier_acquisition_values():
    assert safebo.barrier_acquisition(5.0, [1.0, 2.0], 0.1) == pytest.approx(4.7)
    assert safebo.barrier_acquisition(5.0, [float("-inf")], 0.1) == float("inf")
    post = safebo.Posterior(2.0, 0.25)
    assert safebo.barrier_term(post, 4.0) == pytest.approx(0.0)


def test_toy_run_is_safe_and_deterministic():
    a = safebo.run_toy(problem="toy1d", method="barrier", budget=4, seed=3,
                       grid_points_per_dim=201)
    b = safebo.run_toy(problem="toy1d", method="barrier", budget=4, seed=3,
                       grid_points_per_dim=201)
    assert len(a) == 5
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.x, rb.x)
        assert ra.observed == rb.observed
    # every proposal stayed inside the revealed safe set and was truly safe
    for rec in a[1:]:
        assert rec.min_constraint_lcb > 0.0
        assert not rec.violation
        assert not rec.fallback


def test_glucose_simulation_basics():
    patient = safebo.PatientModel()
    meal = safebo.MealScenario()
    meal.carbs_g = 0.0
    meal.bolus_u = 0.0
    trace = safebo.simulate_noiseless(patient, meal)
    assert max(abs(g - patient.basal_glucose) for g in trace.true_bg) <= 1.0

    assert safebo.glycemic_penalty(110.0) == 0.0
    assert safebo.glycemic_penalty(80.0) == 0.0
    assert abs(safebo.glycemic_penalty(300.0) - 100.0) < 0.1

    in_band = safebo.simulate_noiseless(patient, meal)
    assert safebo.gpi(in_band) == 0.0

    tir, tar, tbr = safebo.tir_metrics([110.0, 60.0, 200.0, 120.0])
    assert tir + tar + tbr == pytest.approx(1.0)
    assert tir == pytest.approx(0.5)


def test_config_validation_reports_all_violations():
    with pytest.raises(safebo.ConfigError):
        safebo.parse_config_text('{"problem": "toy1d", "budget": 0}')
    cfg = safebo.parse_config_text('{"problem": "toy1d"}')
    assert cfg is not None
