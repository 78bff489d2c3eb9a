"""
Estimate report
===============

Types shared by every estimator: method/status enums, EstimatorOptions and the
EstimateReport returned to callers, plus the `scale_free` decorator that
normalises the snapshot before an estimator runs.

Scale normalisation:
- x is divided by the power of two at or below ||x|| (exact in floating point)
- amplitudes, lambda values and stop_lambda are mapped back on output
So x and 2^k * x produce bit-identical DOAs.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.modules import solver_rules as R
from src.modules.array_model import SteeringModel
from src.modules.doa_errors import DimensionMismatch, DoaError
from src.modules.newton_core import NewtonOptions


class Method(str, Enum):
    CLASSO = "classo"
    CLASSO_H = "classo_h"
    SPS = "sps"
    ML = "ml"
    RELAX = "relax"

    @property
    def is_lasso(self) -> bool:
        return self in (Method.CLASSO, Method.CLASSO_H, Method.SPS)


class Status(str, Enum):
    CONVERGED = "Converged"
    UNDEFINED = "Undefined"
    FAILED = "Failed"


# ============================================================
# OPTIONS
# ============================================================

@dataclass(frozen=True)
class EstimatorOptions:
    n: int
    mu: float = R.DEFAULT_MU
    report_lambda_factor: float = R.DEFAULT_REPORT_LAMBDA_FACTOR
    newton: NewtonOptions = field(default_factory=NewtonOptions)
    grid_size: int = R.DEFAULT_SPS_GRID_SIZE
    guard: Optional[float] = None               # None -> 0.05 * 2*pi/m
    stop_lambda: Optional[float] = None         # fixed reporting lambda (overrides the factor)
    birth_tol: float = R.BIRTH_TOL
    scan_density: int = R.SCAN_DENSITY
    time_budget_s: Optional[float] = None
    deadline: Optional[float] = None            # time.monotonic() value, set at run start

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"model order n must be an integer >= 1, got {self.n!r}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must be in (0,1), got {self.mu}")
        if not 0.0 < self.report_lambda_factor <= 1.0:
            raise ValueError(f"report_lambda_factor must be in (0,1], got {self.report_lambda_factor}")
        if self.guard is not None and self.guard < 0.0:
            raise ValueError(f"guard must be >= 0, got {self.guard}")
        if self.stop_lambda is not None and not self.stop_lambda > 0.0:
            raise ValueError(f"stop_lambda must be > 0, got {self.stop_lambda}")
        if self.grid_size < 2:
            raise ValueError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.time_budget_s is not None and not self.time_budget_s > 0.0:
            raise ValueError(f"time_budget_s must be > 0, got {self.time_budget_s}")

    def guard_for(self, m: int) -> float:
        return R.default_guard(m) if self.guard is None else float(self.guard)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "mu": self.mu,
            "report_lambda_factor": self.report_lambda_factor,
            "grid_size": self.grid_size,
            "guard": self.guard,
            "stop_lambda": self.stop_lambda,
            "birth_tol": self.birth_tol,
            "scan_density": self.scan_density,
            "newton": {
                "tol": self.newton.tol,
                "max_iter": self.newton.max_iter,
                "backtrack_ratio": self.newton.backtrack_ratio,
                "min_step": self.newton.min_step,
                "cond_limit": self.newton.cond_limit,
            },
        }


# ============================================================
# REPORT
# ============================================================

@dataclass(frozen=True)
class EstimateReport:
    method: Method
    doas: Tuple[float, ...]
    amplitudes: Tuple[complex, ...]
    lambda_path: Tuple[Tuple[float, int], ...] = ()
    iterations: int = 0
    status: Status = Status.CONVERGED
    wall_time: float = 0.0
    report_lambda: Optional[float] = None
    message: str = ""

    @classmethod
    def failed(cls, method: Method, message: str, wall_time: float = 0.0) -> "EstimateReport":
        return cls(Method(method), (), (), status=Status.FAILED, wall_time=wall_time, message=message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "status": self.status.value,
            "doas": [float(d) for d in self.doas],
            "amplitudes": [[float(s.real), float(s.imag)] for s in self.amplitudes],
            "lambda_path": [[float(lam), int(k)] for lam, k in self.lambda_path],
            "lambda": self.report_lambda,
            "iterations": int(self.iterations),
            "wall_time": float(self.wall_time),
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "EstimateReport":
        lam = payload.get("lambda")
        return cls(
            method=Method(payload["method"]),
            doas=tuple(float(d) for d in payload.get("doas", [])),
            amplitudes=tuple(complex(re, im) for re, im in payload.get("amplitudes", [])),
            lambda_path=tuple((float(lam_i), int(k)) for lam_i, k in payload.get("lambda_path", [])),
            iterations=int(payload.get("iterations", 0)),
            status=Status(payload.get("status", Status.CONVERGED.value)),
            wall_time=float(payload.get("wall_time", 0.0)),
            report_lambda=None if lam is None else float(lam),
            message=str(payload.get("message", "")),
        )


def record_lambda(path: List[Tuple[float, int]], lam: float, size: int) -> None:
    """Append (lam, size) keeping lambda strictly decreasing; an equal lambda updates the size."""
    if path and lam >= path[-1][0]:
        path[-1] = (path[-1][0], size)
        return
    path.append((float(lam), int(size)))


# ============================================================
# SCALE NORMALISATION
# ============================================================

def power_of_two_below(value: float) -> float:
    """Largest power of two <= value (1.0 for zero)."""
    if value <= 0.0 or not math.isfinite(value):
        return 1.0
    return math.ldexp(1.0, math.frexp(value)[1] - 1)


def scale_free(estimator: Callable[[SteeringModel, np.ndarray, EstimatorOptions], EstimateReport]):
    """
    Run `estimator` on x / 2^e (2^e <= ||x|| < 2^(e+1)) and map the report back.

    Also validates the snapshot, starts the per-call deadline and stamps wall_time.
    """

    @functools.wraps(estimator)
    def wrapper(model: SteeringModel, x, opts: EstimatorOptions) -> EstimateReport:
        started = time.perf_counter()
        x = np.asarray(x, dtype=complex).reshape(-1)
        if x.shape[0] != model.m:
            raise DimensionMismatch(f"Snapshot length {x.shape[0]} does not match m={model.m}")
        if not np.all(np.isfinite(x)):
            raise DoaError("Snapshot contains non-finite entries")

        scale = power_of_two_below(float(np.linalg.norm(x)))
        if opts.stop_lambda is not None:
            opts = replace(opts, stop_lambda=opts.stop_lambda / scale)
        if opts.deadline is None and opts.time_budget_s is not None:
            opts = replace(opts, deadline=time.monotonic() + opts.time_budget_s)

        report = estimator(model, x / scale, opts)
        return replace(
            report,
            amplitudes=tuple(complex(s) * scale for s in report.amplitudes),
            lambda_path=tuple((lam * scale, k) for lam, k in report.lambda_path),
            report_lambda=None if report.report_lambda is None else report.report_lambda * scale,
            wall_time=time.perf_counter() - started,
        )

    return wrapper
