import math

import numpy as np
import pytest

from conftest import complex_normal
from src.modules.array_model import Scenario, steering, synthesize
from src.modules.baselines import exhaustive_search, ml_estimate, ml_grid, relax, relax_cycles
from src.modules.doa_errors import BudgetExceeded
from src.modules.estimate_report import (
    EstimateReport,
    EstimatorOptions,
    Method,
    Status,
    power_of_two_below,
    record_lambda,
)
from src.modules.estimators import METHODS, get_estimator, run_estimator
from src.modules.newton_core import NewtonOptions


def noisy_two_sources(seed: int) -> np.ndarray:
    scenario = Scenario(m=15, doas=(0.0, 4 * math.pi / 15), amplitudes=(1.0, 0.8j), noise_std=0.1, seed=seed)
    return synthesize(scenario).x


# ============================================================
# ML
# ============================================================

def test_ml_single_source_is_exact(model15):
    x = (0.6 - 0.3j) * steering(model15, 0.7)
    report = ml_estimate(model15, x, EstimatorOptions(n=1))
    assert report.status is Status.CONVERGED
    assert report.doas[0] == pytest.approx(0.7, abs=1e-9)
    assert report.amplitudes[0] == pytest.approx(0.6 - 0.3j, abs=1e-10)
    assert report.report_lambda is None


def test_ml_solution_satisfies_kkt(model15):
    x = noisy_two_sources(seed=3)
    report = ml_estimate(model15, x, EstimatorOptions(n=2))
    A, D, _ = model15.derivative_matrices(report.doas)
    s = np.asarray(report.amplitudes)
    n_hat = x - A @ s
    bound = 1e-9 * np.linalg.norm(x)
    assert np.max(np.abs(A.conj().T @ n_hat)) <= bound
    assert np.max(np.abs(np.real(np.conj(s) * (D.conj().T @ n_hat)))) <= bound


def test_exhaustive_search_finds_grid_sources(model15):
    grid = ml_grid(model15)
    x = model15.matrix([grid[3], grid[20]]) @ np.array([1.0, 2.0])
    doas, s, cost = exhaustive_search(model15, x, 2)
    assert sorted(doas) == pytest.approx(sorted([grid[3], grid[20]]))
    assert cost == pytest.approx(0.0, abs=1e-9)


def test_ml_order_budget(model15):
    x = noisy_two_sources(seed=1)
    with pytest.raises(BudgetExceeded):
        exhaustive_search(model15, x, 4)
    report = run_estimator(Method.ML, model15, x, EstimatorOptions(n=4))
    assert report.status is Status.FAILED
    assert "BudgetExceeded" in report.message


# ============================================================
# RELAX
# ============================================================

def test_relax_costs_never_increase(model15):
    x = noisy_two_sources(seed=4)
    result = relax_cycles(model15, x, 2, guard=0.05 * 2 * math.pi / 15)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(result.costs, result.costs[1:]))
    assert result.cycles >= 1
    assert len(result.doas) == 2


def test_relax_single_source_equals_ml(model15, rng):
    x = steering(model15, -1.1) + 0.1 * complex_normal(rng, 15)
    a = relax(model15, x, EstimatorOptions(n=1))
    b = ml_estimate(model15, x, EstimatorOptions(n=1))
    assert a.doas[0] == pytest.approx(b.doas[0], abs=1e-8)
    assert a.amplitudes[0] == pytest.approx(b.amplitudes[0], abs=1e-8)


def test_relax_recovers_well_separated_sources(model15):
    x = model15.matrix([-1.0, 1.0]) @ np.array([1.0, 0.5])
    report = relax(model15, x, EstimatorOptions(n=2))
    assert sorted(report.doas) == pytest.approx([-1.0, 1.0], abs=1e-5)


@pytest.mark.parametrize("estimator", [ml_estimate, relax])
def test_baselines_are_scale_and_phase_invariant(model15, estimator):
    x = noisy_two_sources(seed=6)
    base = estimator(model15, x, EstimatorOptions(n=2))
    scaled = estimator(model15, 8.0 * x, EstimatorOptions(n=2))
    assert scaled.doas == base.doas
    rotated = estimator(model15, np.exp(0.4j) * x, EstimatorOptions(n=2))
    np.testing.assert_allclose(rotated.doas, base.doas, atol=1e-9)
    np.testing.assert_allclose(rotated.amplitudes, np.exp(0.4j) * np.asarray(base.amplitudes), atol=1e-9)


# ============================================================
# dispatcher
# ============================================================

def test_every_method_is_registered():
    assert set(METHODS) == set(Method)
    assert get_estimator("classo_h") is METHODS[Method.CLASSO_H]
    with pytest.raises(ValueError):
        get_estimator("music")


def test_run_estimator_maps_errors_to_failed(model15):
    report = run_estimator(Method.CLASSO, model15, np.zeros(15, dtype=complex), EstimatorOptions(n=1))
    assert report.status is Status.FAILED
    assert report.doas == ()
    assert report.message.startswith("NoPeak")

    report = run_estimator("relax", model15, np.ones(8, dtype=complex), EstimatorOptions(n=1))
    assert report.status is Status.FAILED
    assert "DimensionMismatch" in report.message

    report = run_estimator("ml", model15, np.array([np.nan] * 15, dtype=complex), EstimatorOptions(n=1))
    assert report.status is Status.FAILED


def test_expired_deadline_fails_the_run(model15):
    x = noisy_two_sources(seed=7)
    opts = EstimatorOptions(n=2, deadline=0.0)
    report = run_estimator(Method.CLASSO_H, model15, x, opts)
    assert report.status is Status.FAILED
    assert "TrialTimeout" in report.message


# ============================================================
# report and options
# ============================================================

def test_report_dict_round_trip(model15):
    report = run_estimator(Method.CLASSO, model15, noisy_two_sources(seed=8), EstimatorOptions(n=2))
    again = EstimateReport.from_dict(report.to_dict())
    assert again == report
    payload = report.to_dict()
    assert set(payload) >= {"method", "status", "doas", "amplitudes", "lambda_path", "lambda", "iterations", "wall_time"}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n": 0},
        {"n": 1, "mu": 1.0},
        {"n": 1, "mu": 0.0},
        {"n": 1, "report_lambda_factor": 0.0},
        {"n": 1, "report_lambda_factor": 1.5},
        {"n": 1, "stop_lambda": -1.0},
        {"n": 1, "guard": -0.1},
        {"n": 1, "time_budget_s": 0.0},
    ],
)
def test_invalid_options(kwargs):
    with pytest.raises(ValueError):
        EstimatorOptions(**kwargs)


def test_invalid_newton_options():
    with pytest.raises(ValueError):
        NewtonOptions(tol=0.0)
    with pytest.raises(ValueError):
        NewtonOptions(backtrack_ratio=1.0)


def test_record_lambda_keeps_path_strictly_decreasing():
    path = []
    record_lambda(path, 10.0, 1)
    record_lambda(path, 8.0, 2)
    record_lambda(path, 8.0, 1)
    record_lambda(path, 9.0, 3)
    assert path == [(10.0, 1), (8.0, 3)]


def test_power_of_two_below():
    assert power_of_two_below(3.87) == 2.0
    assert power_of_two_below(4.0) == 4.0
    assert power_of_two_below(0.3) == 0.25
    assert power_of_two_below(0.0) == 1.0
