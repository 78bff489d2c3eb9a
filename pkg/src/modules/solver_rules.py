"""
solver_rules.py

Single source of truth for every numerical default of the DOA toolkit.
All tolerances, search densities, iteration limits and experiment constants
MUST be defined here. No estimator, harness or CLI command may hardcode them.

Environment configuration (read on demand, never at import time):
- DOA_THREADS    worker cap for benchmark sweeps (default 1)
- DOA_LOG_LEVEL  logging level name for the CLI (default WARNING)
"""

from __future__ import annotations

import math
import os


# ============================================================
# SPECTRUM SEARCH
# ============================================================

SCAN_DENSITY = 16                 # scan points per sensor (grid of ceil(K*m) points)
GUARD_FRACTION = 0.05             # guard radius as a fraction of 2*pi/m
PEAK_REFINE_MAX_ITER = 60
PEAK_REFINE_XTOL = 1e-13


# ============================================================
# NEWTON SOLVER
# ============================================================

NEWTON_REL_TOL = 1e-10            # infinity-norm tolerance, relative to ||x||
NEWTON_MAX_ITER = 100
NEWTON_BACKTRACK_RATIO = 0.5
NEWTON_MIN_STEP = 1e-12
NEWTON_COND_LIMIT = 1e12

# A line search that cannot improve a residual already within this multiple
# of tol is at the round-off floor and is accepted as converged.
NEWTON_ROUNDOFF_SLACK = 1e3


# ============================================================
# HOMOTOPY PATH (C-LASSO / C-LASSO_h / SPS-LASSO)
# ============================================================

DEFAULT_MU = 0.8
DEFAULT_REPORT_LAMBDA_FACTOR = 0.5
BIRTH_TOL = 1e-6                  # birth when lambda - p <= BIRTH_TOL * lambda
OVERSHOOT_REL_TOL = 1e-6          # overshoot when an off-support peak exceeds lambda * (1 + tol)
LAMBDA_FLOOR_REL = 1e-9           # relative to lambda_0; below it the path is Undefined
STALL_WINDOW = 10
STALL_REL_DECREASE = 1e-14
BISECTION_MAX_ITER = 60
STEP_HALVING_MAX = 20
PROBE_REFINE_MAX = 20
PROBE_REFINE_TOL = 1e-10
MAX_PATH_EVENTS_FACTOR = 4        # births + deaths allowed: factor * n + 10

DEFAULT_SPS_GRID_SIZE = 1024


# ============================================================
# BASELINES (ML / RELAX)
# ============================================================

ML_GRID_FACTOR = 4                # exhaustive-search points per axis = factor * m
ML_MAX_ORDER = 3
ML_EVAL_BUDGET = 200_000          # DOA tuples evaluated by the exhaustive search
ML_BATCH = 4096

RELAX_MAX_CYCLES = 200
RELAX_REL_COST_TOL = 1e-12        # relative to ||x||^2, per full cycle


# ============================================================
# OPTIMALITY CERTIFICATE
# ============================================================

CERT_SPECTRUM_REL_TOL = 1e-6      # off-support spectrum <= lambda * (1 + tol)
CERT_SUPPORT_REL_TOL = 1e-8       # |a^H n - lambda e^{j alpha}| <= tol * ||x||
AUDIT_FFT_SIZE = 1 << 16


# ============================================================
# BENCHMARK
# ============================================================

TRIAL_TIME_BUDGET_S = 30.0
MATCHED_MSE_MAX_ORDER = 6
BENCH_SENSORS = 15
BENCH_TRIALS = 100


# ============================================================
# PURE HELPERS
# ============================================================

class RuleError(ValueError):
    pass


def default_guard(m: int) -> float:
    """Guard radius around existing support: GUARD_FRACTION * (2*pi/m)."""
    return GUARD_FRACTION * 2.0 * math.pi / int(m)


def threads_from_env() -> int:
    """
    Worker cap for sweeps (DOA_THREADS). Missing or invalid values mean 1.
    """
    raw = os.environ.get("DOA_THREADS", "1")
    try:
        n = int(raw)
    except (TypeError, ValueError):
        return 1
    return max(1, n)


def log_level_from_env() -> str:
    return os.environ.get("DOA_LOG_LEVEL", "WARNING").upper()


def validate_all_rules() -> None:
    """
    Call once at CLI startup to fail fast if a default was mistyped.
    """
    positive = {
        "SCAN_DENSITY": SCAN_DENSITY,
        "GUARD_FRACTION": GUARD_FRACTION,
        "NEWTON_REL_TOL": NEWTON_REL_TOL,
        "NEWTON_MAX_ITER": NEWTON_MAX_ITER,
        "NEWTON_MIN_STEP": NEWTON_MIN_STEP,
        "NEWTON_COND_LIMIT": NEWTON_COND_LIMIT,
        "BIRTH_TOL": BIRTH_TOL,
        "LAMBDA_FLOOR_REL": LAMBDA_FLOOR_REL,
        "DEFAULT_SPS_GRID_SIZE": DEFAULT_SPS_GRID_SIZE,
        "ML_GRID_FACTOR": ML_GRID_FACTOR,
        "ML_EVAL_BUDGET": ML_EVAL_BUDGET,
        "RELAX_MAX_CYCLES": RELAX_MAX_CYCLES,
        "TRIAL_TIME_BUDGET_S": TRIAL_TIME_BUDGET_S,
    }
    for name, value in positive.items():
        if not value > 0:
            raise RuleError(f"{name} must be > 0, got {value!r}")

    if not 0.0 < NEWTON_BACKTRACK_RATIO < 1.0:
        raise RuleError(f"NEWTON_BACKTRACK_RATIO must be in (0,1), got {NEWTON_BACKTRACK_RATIO}")

    if not 0.0 < DEFAULT_MU < 1.0:
        raise RuleError(f"DEFAULT_MU must be in (0,1), got {DEFAULT_MU}")

    if not 0.0 < DEFAULT_REPORT_LAMBDA_FACTOR <= 1.0:
        raise RuleError(f"DEFAULT_REPORT_LAMBDA_FACTOR must be in (0,1], got {DEFAULT_REPORT_LAMBDA_FACTOR}")

    if SCAN_DENSITY < 2:
        # fewer than ~2m points cannot bracket every local maximum
        raise RuleError("SCAN_DENSITY must be >= 2")
