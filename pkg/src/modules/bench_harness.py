"""
Bench harness
=============

Seeded Monte Carlo sweeps of the estimators over an SNR or separation axis.

Per (axis value, trial):
- seed = master_seed XOR blake2b("<value!r>:<trial>")     (trial_seeding)
- scenario derived from the base one (noise from SNR, or second DOA from separation)
- one snapshot, every requested estimator run on it

Aggregation (pandas) is done on records sorted by (axis, method, trial), so the
rows do not depend on worker count or completion order. Undefined and Failed
trials are excluded from the MSE and counted in undefined_rate.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.modules import solver_rules as R
from src.modules.array_model import Scenario, SteeringModel, noise_std_for_snr, synthesize, wrap_angle
from src.modules.doa_errors import LengthMismatch
from src.modules.estimate_report import EstimatorOptions, Method, Status
from src.modules.estimators import run_estimator
from src.modules.trial_seeding import derive_trial_seed

logger = logging.getLogger(__name__)


# ============================================================
# DATA STRUCTURES
# ============================================================

class SweepAxis(str, Enum):
    SNR_DB = "SNR_dB"
    SEPARATION = "separation"

    @property
    def unit(self) -> str:
        return "dB" if self is SweepAxis.SNR_DB else "rad"


@dataclass(frozen=True)
class SweepSpec:
    name: str
    base: Scenario
    axis: SweepAxis
    values: Tuple[float, ...]
    trials: int
    methods: Tuple[Method, ...]
    master_seed: int = 0
    mu: float = R.DEFAULT_MU
    report_lambda_factor: float = R.DEFAULT_REPORT_LAMBDA_FACTOR
    grid_size: int = R.DEFAULT_SPS_GRID_SIZE
    time_budget_s: float = R.TRIAL_TIME_BUDGET_S

    def __post_init__(self):
        object.__setattr__(self, "axis", SweepAxis(self.axis))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if list(self.values) != sorted(self.values):
            raise ValueError("sweep values must be sorted")
        if not self.methods:
            raise ValueError("at least one estimator is required")
        if self.axis is SweepAxis.SNR_DB and not self.base.amplitudes:
            raise ValueError("SNR sweep needs a reference amplitude s_1")
        if self.axis is SweepAxis.SEPARATION and self.base.n < 2:
            raise ValueError("separation sweep needs at least two sources")

    def options(self) -> EstimatorOptions:
        return EstimatorOptions(
            n=self.base.n,
            mu=self.mu,
            report_lambda_factor=self.report_lambda_factor,
            grid_size=self.grid_size,
            time_budget_s=self.time_budget_s,
        )


@dataclass(frozen=True)
class TrialRecord:
    axis_value: float
    method: Method
    trial: int
    status: Status
    mse: float                       # NaN unless Converged
    wall_time: float


@dataclass(frozen=True)
class BenchRow:
    axis_value: float
    method: Method
    mse: float
    undefined_rate: float
    mean_wall_time_ms: float
    trials_used: int


# ============================================================
# METRIC
# ============================================================

def matched_mse(estimated: Sequence[float], truth: Sequence[float]) -> float:
    """
    min over permutations of (1/n) * sum wrap(est_perm(i) - truth_i)^2.
    """
    estimated = [float(v) for v in estimated]
    truth = [float(v) for v in truth]
    if len(estimated) != len(truth):
        raise LengthMismatch(f"{len(estimated)} estimates vs {len(truth)} true DOAs")
    n = len(truth)
    if n == 0:
        return 0.0
    if n > R.MATCHED_MSE_MAX_ORDER:
        raise LengthMismatch(f"matched_mse supports n <= {R.MATCHED_MSE_MAX_ORDER}, got {n}")

    est = np.asarray(estimated)
    tru = np.asarray(truth)
    # wrap(d)^2 for every (estimate, truth) pair
    diff = wrap_angle(est[:, None] - tru[None, :]) ** 2
    best = math.inf
    for perm in itertools.permutations(range(n)):
        total = float(sum(diff[perm[i], i] for i in range(n)))
        best = min(best, total)
    return best / n


# ============================================================
# TRIALS
# ============================================================

def trial_scenario(spec: SweepSpec, axis_value: float, trial: int) -> Scenario:
    base = spec.base
    seed = derive_trial_seed(spec.master_seed, axis_value, trial)
    if spec.axis is SweepAxis.SNR_DB:
        return replace(base, noise_std=noise_std_for_snr(base.amplitudes[0], axis_value), seed=seed)
    doas = list(base.doas)
    doas[1] = float(wrap_angle(doas[0] + axis_value))
    return replace(base, doas=tuple(doas), seed=seed)


def run_trial(spec: SweepSpec, axis_value: float, trial: int) -> List[TrialRecord]:
    scenario = trial_scenario(spec, axis_value, trial)
    x = synthesize(scenario).x
    model = SteeringModel(scenario.m)
    opts = spec.options()

    records = []
    for method in spec.methods:
        report = run_estimator(method, model, x, opts)
        mse = math.nan
        status = report.status
        if status is Status.CONVERGED:
            if len(report.doas) == scenario.n:
                mse = matched_mse(report.doas, scenario.doas)
            else:
                status = Status.UNDEFINED
        records.append(TrialRecord(axis_value, method, trial, status, mse, report.wall_time))
    return records


def _run_trial_item(item: Tuple[SweepSpec, float, int]) -> List[TrialRecord]:
    return run_trial(*item)


# ============================================================
# SWEEP
# ============================================================

def collect_records(spec: SweepSpec, workers: Optional[int] = None) -> List[TrialRecord]:
    workers = R.threads_from_env() if workers is None else max(1, int(workers))
    items = [(spec, v, t) for v in spec.values for t in range(spec.trials)]

    if workers == 1:
        batches = [_run_trial_item(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_trial_item, items, chunksize=max(1, len(items) // (4 * workers))))

    records = [r for batch in batches for r in batch]
    order = {m: i for i, m in enumerate(spec.methods)}
    records.sort(key=lambda r: (r.axis_value, order[r.method], r.trial))
    return records


def aggregate(records: Sequence[TrialRecord], methods: Sequence[Method]) -> List[BenchRow]:
    frame = pd.DataFrame(
        {
            "axis": [r.axis_value for r in records],
            "method": [r.method.value for r in records],
            "trial": [r.trial for r in records],
            "converged": [r.status is Status.CONVERGED for r in records],
            "mse": [r.mse for r in records],
            "wall_time_ms": [1e3 * r.wall_time for r in records],
        }
    )
    order = {Method(m).value: i for i, m in enumerate(methods)}
    rows: List[BenchRow] = []
    for (axis_value, method), group in frame.groupby(["axis", "method"], sort=True):
        group = group.sort_values("trial")
        used = group[group["converged"]]
        rows.append(
            BenchRow(
                axis_value=float(axis_value),
                method=Method(method),
                mse=float(used["mse"].mean()) if len(used) else math.nan,
                undefined_rate=1.0 - len(used) / len(group),
                mean_wall_time_ms=float(group["wall_time_ms"].mean()),
                trials_used=int(len(used)),
            )
        )
    rows.sort(key=lambda row: (row.axis_value, order[row.method.value]))
    return rows


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> List[BenchRow]:
    """One BenchRow per (axis value, method); per-trial errors never abort the sweep."""
    logger.debug("sweep %s: %d values x %d trials x %d methods", spec.name, len(spec.values), spec.trials, len(spec.methods))
    return aggregate(collect_records(spec, workers), spec.methods)


# ============================================================
# BUILT-IN SCENARIOS
# ============================================================

def builtin_scenarios(trials: int = R.BENCH_TRIALS, master_seed: int = 0) -> Dict[str, SweepSpec]:
    """fig1 (MSE vs SNR), fig2 (MSE vs separation), fig3 (three sources, wide dynamic range)."""
    m = R.BENCH_SENSORS
    fig1 = SweepSpec(
        name="fig1",
        base=Scenario(m=m, doas=(0.0, 4.0 * math.pi / m), amplitudes=(1.0, 1.0)),
        axis=SweepAxis.SNR_DB,
        values=tuple(float(v) for v in range(0, 31, 2)),
        trials=trials,
        methods=(Method.CLASSO, Method.CLASSO_H, Method.ML, Method.RELAX),
        master_seed=master_seed,
    )
    fig2 = SweepSpec(
        name="fig2",
        base=Scenario(
            m=m,
            doas=(0.0, 4.0 * math.pi / m),
            amplitudes=(1.0, 1.0),
            noise_std=noise_std_for_snr(1.0, 10.0),
        ),
        axis=SweepAxis.SEPARATION,
        values=tuple(k * math.pi / (2 * m) for k in range(1, 17)),
        trials=trials,
        methods=(Method.CLASSO, Method.RELAX),
        master_seed=master_seed,
    )
    fig3 = SweepSpec(
        name="fig3",
        base=Scenario(
            m=m,
            doas=(-5.0 * math.pi / m, 0.0, 3.5 * math.pi / m),
            amplitudes=(1.0, 1.0, 0.1j),
        ),
        axis=SweepAxis.SNR_DB,
        values=tuple(float(v) for v in range(5, 41, 5)),
        trials=trials,
        methods=(Method.CLASSO_H, Method.RELAX),
        master_seed=master_seed,
        mu=0.8,
    )
    return {spec.name: spec for spec in (fig1, fig2, fig3)}
