import math

import numpy as np
import pytest

from src.modules.array_model import Scenario, circular_distance, steering, synthesize
from src.modules.doa_errors import NoPeak
from src.modules.estimate_report import EstimatorOptions, Method, Status
from src.modules import solver_rules as R
from src.modules.lasso_path import HomotopyPath, classo, classo_h, final_polish, sps_lasso
from src.modules.newton_core import attractor_F
from src.modules.spectrum_search import global_peak, grid_point
from scripts.validation.audit_certificate import audit_report


def two_source_snapshot(seed: int = 5, snr_db: float = 20.0) -> np.ndarray:
    sigma = 10.0 ** (-snr_db / 20.0)
    scenario = Scenario(m=15, doas=(0.0, 4 * math.pi / 15), amplitudes=(1.0, 1.0), noise_std=sigma, seed=seed)
    return synthesize(scenario).x


# ============================================================
# single source
# ============================================================

@pytest.mark.parametrize("estimator", [classo, classo_h])
def test_single_source_shrinks_by_report_lambda(model15, estimator):
    x = steering(model15, 0.7)
    report = estimator(model15, x, EstimatorOptions(n=1))

    assert report.status is Status.CONVERGED
    assert report.doas[0] == pytest.approx(0.7, abs=1e-8)
    assert report.report_lambda == pytest.approx(7.5, rel=1e-12)
    assert abs(report.amplitudes[0]) == pytest.approx(1.0 - report.report_lambda / 15, abs=1e-8)
    assert report.lambda_path[0] == pytest.approx((15.0, 1))


@pytest.mark.parametrize("factor", [1.0, 0.75, 0.5, 0.25])
def test_report_lambda_factor_sets_shrinkage(model15, factor):
    x = steering(model15, 0.7)
    report = classo(model15, x, EstimatorOptions(n=1, report_lambda_factor=factor))
    assert abs(report.amplitudes[0]) == pytest.approx(1.0 - factor, abs=1e-8)


def test_stop_lambda_overrides_factor(model15):
    x = 4.0 * steering(model15, 0.7)
    report = classo(model15, x, EstimatorOptions(n=1, stop_lambda=30.0))
    assert report.report_lambda == pytest.approx(30.0, rel=1e-12)
    assert abs(report.amplitudes[0]) == pytest.approx(4.0 - 2.0, abs=1e-8)


# ============================================================
# path structure
# ============================================================

@pytest.mark.parametrize("estimator", [classo, classo_h])
def test_lambda_path_is_strictly_decreasing(model15, estimator):
    x = two_source_snapshot()
    report = estimator(model15, x, EstimatorOptions(n=2))

    assert report.status is Status.CONVERGED
    lams = [lam for lam, _ in report.lambda_path]
    assert all(b < a for a, b in zip(lams, lams[1:]))
    assert lams[0] == pytest.approx(global_peak(model15, x).p, rel=1e-12)
    assert report.lambda_path[0][1] == 1
    assert max(k for _, k in report.lambda_path) == 2
    assert len(report.doas) == 2


def test_classo_and_classo_h_agree(model15):
    x = two_source_snapshot(seed=11)
    jump = classo(model15, x, EstimatorOptions(n=2))
    descent = classo_h(model15, x, EstimatorOptions(n=2))
    assert sorted(jump.doas) == pytest.approx(sorted(descent.doas), abs=1e-4)


def test_classo_h_mu_changes_iterations_not_support(model15):
    x = two_source_snapshot(seed=12)
    coarse = classo_h(model15, x, EstimatorOptions(n=2, mu=0.8))
    fine = classo_h(model15, x, EstimatorOptions(n=2, mu=0.99))
    assert fine.iterations > coarse.iterations
    assert sorted(fine.doas) == pytest.approx(sorted(coarse.doas), abs=1e-5)


def test_newborn_amplitude_is_zero_without_polish(model15):
    x = two_source_snapshot(seed=13)
    report = classo(model15, x, EstimatorOptions(n=2, report_lambda_factor=1.0))
    assert report.status is Status.CONVERGED
    assert abs(report.amplitudes[-1]) == 0.0


@pytest.mark.parametrize("estimator", [classo, classo_h])
def test_reported_state_passes_certificate(model15, estimator):
    x = two_source_snapshot(seed=14)
    report = estimator(model15, x, EstimatorOptions(n=2))
    result = audit_report(report, x)
    assert result.passed, result


@pytest.mark.parametrize("estimator", [classo, classo_h])
def test_coincident_sources_are_undefined(model15, estimator):
    x = 2.0 * steering(model15, 0.5)
    report = estimator(model15, x, EstimatorOptions(n=2))
    assert report.status is Status.UNDEFINED
    assert len(report.doas) == 1
    assert report.doas[0] == pytest.approx(0.5, abs=1e-8)
    assert report.message


def test_flat_snapshot_raises(model15):
    path = HomotopyPath(model15, np.zeros(15, dtype=complex), EstimatorOptions(n=1))
    with pytest.raises(NoPeak):
        path.run(jump=True)


# ============================================================
# invariances
# ============================================================

@pytest.mark.parametrize("estimator", [classo, classo_h])
def test_power_of_two_scaling_is_exact(model15, estimator):
    x = two_source_snapshot(seed=21)
    base = estimator(model15, x, EstimatorOptions(n=2))
    scaled = estimator(model15, 4.0 * x, EstimatorOptions(n=2))
    assert scaled.doas == base.doas
    np.testing.assert_allclose(scaled.amplitudes, 4.0 * np.asarray(base.amplitudes), rtol=1e-12)
    assert scaled.report_lambda == pytest.approx(4.0 * base.report_lambda, rel=1e-12)


def test_global_phase_rotates_amplitudes(model15):
    x = two_source_snapshot(seed=22)
    base = classo(model15, x, EstimatorOptions(n=2))
    rotated = classo(model15, 1j * x, EstimatorOptions(n=2))
    np.testing.assert_allclose(rotated.doas, base.doas, atol=1e-9)
    np.testing.assert_allclose(rotated.amplitudes, 1j * np.asarray(base.amplitudes), atol=1e-9)


# ============================================================
# SPS
# ============================================================

def test_sps_on_grid_source_is_exact(model15):
    phi = grid_point(700, 1024)
    report = sps_lasso(model15, steering(model15, phi), EstimatorOptions(n=1, grid_size=1024))
    assert report.status is Status.CONVERGED
    assert report.doas[0] == pytest.approx(phi, abs=1e-12)
    assert abs(report.amplitudes[0]) == pytest.approx(0.5, abs=1e-8)


def test_sps_off_grid_error_is_at_least_half_a_cell(model15):
    cell = 2 * math.pi / 1024
    phi = grid_point(700, 1024) + 0.5 * cell
    report = sps_lasso(model15, steering(model15, phi), EstimatorOptions(n=1, grid_size=1024))
    assert circular_distance(report.doas[0], phi) >= 0.5 * cell * (1 - 1e-9)
    assert circular_distance(report.doas[0], phi) <= 0.5 * cell * (1 + 1e-9)


def test_sps_rejects_coarse_grid(model15):
    with pytest.raises(ValueError):
        sps_lasso(model15, steering(model15, 0.7), EstimatorOptions(n=1, grid_size=16))


def test_sps_and_classo_agree_within_a_cell(model8):
    cell = 2 * math.pi / 4096
    x = steering(model8, 0.3123)
    grid = sps_lasso(model8, x, EstimatorOptions(n=1, grid_size=4096))
    gridless = classo(model8, x, EstimatorOptions(n=1))
    assert circular_distance(grid.doas[0], gridless.doas[0]) <= cell


def test_sps_two_sources_stay_on_grid(model15):
    x = two_source_snapshot(seed=31)
    report = sps_lasso(model15, x, EstimatorOptions(n=2, grid_size=1024))
    assert report.status is Status.CONVERGED
    cell = 2 * math.pi / 1024
    for phi in report.doas:
        k = (phi + math.pi) / cell
        assert abs(k - round(k)) < 1e-6


# ============================================================
# final polish
# ============================================================

def test_final_polish_from_a_converged_state(model15):
    x = steering(model15, 0.7)
    path = HomotopyPath(model15, x, EstimatorOptions(n=1))
    path.start()
    out = final_polish(model15, x, path.state, EstimatorOptions(n=1, report_lambda_factor=0.2))
    assert out.lam == pytest.approx(0.2 * 15.0, rel=1e-12)
    assert out.r[0] == pytest.approx(0.8, abs=1e-8)


def test_report_method_tags(model15):
    x = steering(model15, 0.7)
    assert classo(model15, x, EstimatorOptions(n=1)).method is Method.CLASSO
    assert classo_h(model15, x, EstimatorOptions(n=1)).method is Method.CLASSO_H
    assert sps_lasso(model15, x, EstimatorOptions(n=1)).method is Method.SPS


def test_jump_reports_the_angle_it_solved_at(model15, monkeypatch):
    x = 2.0 * steering(model15, 0.0) + 0.6 * steering(model15, 1.3)
    path = HomotopyPath(model15, x, EstimatorOptions(n=2))
    path.start()
    path.state = path._h(path.state, 0.8 * path.lambda0)
    peak = path.off_support_peak()
    phi = peak.phi + 0.02

    # one refinement round: the refined angle is never solved for
    monkeypatch.setattr(R, "PROBE_REFINE_MAX", 1)
    before = path.state
    state, lam, angle = path._marginal(phi)

    assert angle == phi
    expected_state, expected_lam = attractor_F(model15, x, before, phi, path.opts.newton, lambda_ceiling=before.lam)
    assert lam == expected_lam
    np.testing.assert_array_equal(state.support, expected_state.support)
