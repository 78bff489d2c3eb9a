"""
Error hierarchy shared by the numerical modules.

Library code raises these; only the estimator dispatcher, the bench harness
and the CLI turn them into statuses, per-trial records or exit codes.
"""

from __future__ import annotations

from typing import Optional


class DoaError(RuntimeError):
    pass


class DimensionMismatch(DoaError, ValueError):
    pass


class NonConvergence(DoaError):
    pass


class IllConditioned(DoaError):
    pass


class NegativeAmplitude(DoaError):
    """An amplitude modulus crossed zero; `index` names the offending atom."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class NoPeak(DoaError):
    pass


class RisingLambda(DoaError):
    pass


class PathDeath(DoaError):
    pass


class StallDetected(DoaError):
    pass


class BudgetExceeded(DoaError):
    pass


class MaxCyclesExceeded(DoaError):
    pass


class TrialTimeout(DoaError):
    pass


class LengthMismatch(DoaError, ValueError):
    pass


class UndefinedPath(DoaError):
    """The path cannot reach the requested model order (sources absorbed)."""
    pass
