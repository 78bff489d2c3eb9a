"""
Baselines
=========

Reference estimators the LASSO family is compared against.

ml_estimate
- exhaustive search over distinct DOA tuples of a 4m-point grid (n <= 3),
  amplitudes by least squares per tuple (batched normal equations)
- Newton refinement of the best tuple on the ML KKT system

relax
- sequential peak-pick / subtract initialisation
- cyclic single-source NLLS re-estimation until the cost stalls
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.modules import solver_rules as R
from src.modules.array_model import SteeringModel, steering
from src.modules.doa_errors import BudgetExceeded, MaxCyclesExceeded, TrialTimeout
from src.modules.estimate_report import EstimateReport, EstimatorOptions, Method, Status, scale_free
from src.modules.newton_core import SupportState, SystemKind, damped_newton
from src.modules.spectrum_search import global_peak

logger = logging.getLogger(__name__)


# ============================================================
# ML
# ============================================================

def ml_grid(model: SteeringModel) -> np.ndarray:
    count = R.ML_GRID_FACTOR * model.m
    return -math.pi + 2.0 * math.pi * np.arange(count) / count


def exhaustive_search(model: SteeringModel, x: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Best (doas, amplitudes, cost) over all n-subsets of the ML grid.

    cost = ||x - A s||^2 = ||x||^2 - Re(b^H s) with b = A^H x and s = (A^H A)^{-1} b.
    """
    if n > R.ML_MAX_ORDER:
        raise BudgetExceeded(f"Exhaustive ML initialisation supports n <= {R.ML_MAX_ORDER}, got n={n}")
    grid = ml_grid(model)
    count = math.comb(grid.shape[0], n)
    if count > R.ML_EVAL_BUDGET:
        raise BudgetExceeded(f"{count} DOA tuples exceed the evaluation budget {R.ML_EVAL_BUDGET}")

    A = model.matrix(grid)
    gram = A.conj().T @ A
    b = A.conj().T @ x
    energy = float(np.vdot(x, x).real)

    tuples = np.array(list(itertools.combinations(range(grid.shape[0]), n)), dtype=int).reshape(-1, n)
    best_cost = math.inf
    best_idx: Optional[np.ndarray] = None
    best_s: Optional[np.ndarray] = None

    for lo in range(0, tuples.shape[0], R.ML_BATCH):
        idx = tuples[lo:lo + R.ML_BATCH]
        G = gram[idx[:, :, None], idx[:, None, :]]
        rhs = b[idx]
        s = np.linalg.solve(G, rhs[..., None])[..., 0]
        cost = energy - np.real(np.sum(np.conj(rhs) * s, axis=1))
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost, best_idx, best_s = float(cost[k]), idx[k], s[k]

    return grid[best_idx], best_s, best_cost


@scale_free
def ml_estimate(model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    """Deterministic ML: exhaustive grid initialisation then Newton on the ML KKT system."""
    doas, s, cost = exhaustive_search(model, x, opts.n)
    logger.debug("ML grid start: doas=%s cost=%.6g", np.round(doas, 6).tolist(), cost)

    start = SupportState(tuple(doas), tuple(np.abs(s)), tuple(np.angle(s)), 0.0)
    run = damped_newton(SystemKind.ML, model, x, start, None, opts.newton, deadline=opts.deadline)
    state = run.state
    return EstimateReport(
        method=Method.ML,
        doas=state.support,
        amplitudes=tuple(complex(v) for v in state.amplitudes),
        iterations=run.iterations,
        status=Status.CONVERGED,
    )


# ============================================================
# RELAX
# ============================================================

@dataclass(frozen=True)
class RelaxResult:
    doas: Tuple[float, ...]
    amplitudes: Tuple[complex, ...]
    costs: Tuple[float, ...]          # squared error after initialisation and after each cycle
    cycles: int


def _fit_single(model: SteeringModel, target: np.ndarray, exclusions: Sequence[float], guard: float) -> Tuple[float, complex]:
    """Single-source continuous NLLS: phi at the spectrum peak, s = a^H target / m."""
    peak = global_peak(model, target, exclusions, guard)
    s = complex(np.vdot(steering(model, peak.phi), target)) / model.m
    return peak.phi, s


def _cost(model: SteeringModel, x: np.ndarray, doas: Sequence[float], amps: Sequence[complex]) -> float:
    res = x - model.matrix(doas) @ np.asarray(amps, dtype=complex)
    return float(np.vdot(res, res).real)


def relax_cycles(
    model: SteeringModel,
    x: np.ndarray,
    n: int,
    guard: float,
    deadline: Optional[float] = None,
) -> RelaxResult:
    x = np.asarray(x, dtype=complex).reshape(-1)
    doas: List[float] = []
    amps: List[complex] = []
    res = x.copy()
    for _ in range(n):
        phi, s = _fit_single(model, res, doas, guard)
        doas.append(phi)
        amps.append(s)
        res = res - steering(model, phi) * s

    costs = [_cost(model, x, doas, amps)]
    tol = R.RELAX_REL_COST_TOL * float(np.vdot(x, x).real)

    for cycle in range(1, R.RELAX_MAX_CYCLES + 1):
        if deadline is not None and time.monotonic() > deadline:
            raise TrialTimeout(f"RELAX time budget exhausted after {cycle - 1} cycles")
        for i in range(n):
            other_doas = [doas[j] for j in range(n) if j != i]
            other_amps = [amps[j] for j in range(n) if j != i]
            target = x
            if other_doas:
                target = x - model.matrix(other_doas) @ np.asarray(other_amps, dtype=complex)
            phi, s = _fit_single(model, target, other_doas, guard)
            old = (doas[i], amps[i])
            before = _cost(model, x, doas, amps)
            doas[i], amps[i] = phi, s
            # keep the previous source when the constrained peak is worse
            if _cost(model, x, doas, amps) > before:
                doas[i], amps[i] = old

        costs.append(_cost(model, x, doas, amps))
        if costs[-2] - costs[-1] < tol:
            return RelaxResult(tuple(doas), tuple(amps), tuple(costs), cycle)

    raise MaxCyclesExceeded(f"RELAX did not settle within {R.RELAX_MAX_CYCLES} cycles")


@scale_free
def relax(model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    result = relax_cycles(model, x, opts.n, opts.guard_for(model.m), opts.deadline)
    return EstimateReport(
        method=Method.RELAX,
        doas=result.doas,
        amplitudes=result.amplitudes,
        iterations=result.cycles,
        status=Status.CONVERGED,
    )
