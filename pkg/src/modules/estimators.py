"""
estimators.py

Registry of the five DOA estimators and the one place where numerical errors
become a report status.

Every estimator has the signature (model, x, opts) -> EstimateReport and raises
DoaError subclasses on failure; run_estimator turns those into status=Failed.
"""

from __future__ import annotations

import logging
import time
from typing import Callable, Dict

import numpy as np

from src.modules.array_model import SteeringModel
from src.modules.baselines import ml_estimate, relax
from src.modules.doa_errors import DoaError
from src.modules.estimate_report import EstimateReport, EstimatorOptions, Method
from src.modules.lasso_path import classo, classo_h, sps_lasso

logger = logging.getLogger(__name__)

Estimator = Callable[[SteeringModel, np.ndarray, EstimatorOptions], EstimateReport]

METHODS: Dict[Method, Estimator] = {
    Method.CLASSO: classo,
    Method.CLASSO_H: classo_h,
    Method.SPS: sps_lasso,
    Method.ML: ml_estimate,
    Method.RELAX: relax,
}


def get_estimator(method) -> Estimator:
    try:
        return METHODS[Method(method)]
    except ValueError:
        raise ValueError(f"Unknown method {method!r}; expected one of {[m.value for m in Method]}") from None


def run_estimator(method, model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    """
    Run one estimator; DoaError (including TrialTimeout) yields a Failed report.

    Option errors (ValueError outside the DoaError tree) still propagate.
    """
    method = Method(method)
    estimator = get_estimator(method)
    started = time.perf_counter()
    try:
        return estimator(model, x, opts)
    except DoaError as exc:
        logger.warning("%s failed: %s: %s", method.value, type(exc).__name__, exc)
        return EstimateReport.failed(method, f"{type(exc).__name__}: {exc}", time.perf_counter() - started)

