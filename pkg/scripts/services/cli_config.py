#!/usr/bin/env python3
"""
CLI configuration
=================

One frozen CliConfig per invocation, built by app.py from argparse and handed to
the subcommand services. Flag consistency is checked here, once.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from src.modules import solver_rules as R
from src.modules.estimate_report import EstimatorOptions, Method
from src.modules.newton_core import NewtonOptions


class Subcommand(str, Enum):
    ESTIMATE = "estimate"
    BENCH = "bench"
    SYNTH = "synth"
    AUDIT = "audit"


class CliConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CliConfig:
    subcommand: Subcommand
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    snapshot_path: Optional[str] = None           # audit: snapshot the report was computed from
    method: Method = Method.CLASSO
    n: int = 1
    mu: Optional[float] = None
    seed: int = 0
    trials: Optional[int] = None
    scenario: Optional[str] = None
    grid_size: int = R.DEFAULT_SPS_GRID_SIZE
    report_lambda_factor: float = R.DEFAULT_REPORT_LAMBDA_FACTOR
    stop_lambda: Optional[float] = None
    newton_tol: float = R.NEWTON_REL_TOL
    newton_max_iter: int = R.NEWTON_MAX_ITER
    plot_path: Optional[str] = None
    xlsx_path: Optional[str] = None
    timing: bool = False
    degrees_physical: bool = False
    verbose: bool = False
    # synth
    m: Optional[int] = None
    doas: Tuple[float, ...] = ()
    amplitudes: Tuple[complex, ...] = ()
    snr_db: Optional[float] = None
    noise_std: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "subcommand", Subcommand(self.subcommand))
        object.__setattr__(self, "method", Method(self.method))
        if self.subcommand is Subcommand.ESTIMATE and self.mu is not None and self.method is not Method.CLASSO_H:
            raise CliConfigError("--mu is only meaningful with --method classo_h")
        if self.mu is not None and not 0.0 < self.mu < 1.0:
            raise CliConfigError(f"--mu must be in (0,1), got {self.mu}")
        if self.n < 1:
            raise CliConfigError(f"--n must be >= 1, got {self.n}")
        if self.seed < 0:
            raise CliConfigError(f"--seed must be unsigned, got {self.seed}")
        if self.trials is not None and self.trials < 1:
            raise CliConfigError(f"--trials must be >= 1, got {self.trials}")
        if not 0.0 < self.report_lambda_factor <= 1.0:
            raise CliConfigError(f"--report-lambda-factor must be in (0,1], got {self.report_lambda_factor}")
        if self.snr_db is not None and self.noise_std is not None:
            raise CliConfigError("use either --snr or --noise-std, not both")
        if self.subcommand in (Subcommand.ESTIMATE, Subcommand.AUDIT) and not self.input_path:
            raise CliConfigError(f"{self.subcommand.value} needs --in")
        if self.subcommand is Subcommand.AUDIT and not self.snapshot_path:
            raise CliConfigError("audit needs --snapshot")
        if self.subcommand is Subcommand.BENCH and not self.scenario:
            raise CliConfigError("bench needs --scenario (builtin name or sweep JSON)")

    def estimator_options(self) -> EstimatorOptions:
        return EstimatorOptions(
            n=self.n,
            mu=R.DEFAULT_MU if self.mu is None else self.mu,
            report_lambda_factor=self.report_lambda_factor,
            newton=NewtonOptions(tol=self.newton_tol, max_iter=self.newton_max_iter),
            grid_size=self.grid_size,
            stop_lambda=self.stop_lambda,
        )
