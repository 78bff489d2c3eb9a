"""
LASSO homotopy path
===================

Path-following estimators of the continuous (gridless) complex LASSO

    min_s 1/2 ||x - A(I) s||^2 + lambda * sum |s_i|

traced from lambda_0 = max |a(phi)^H x| downwards, one atom birth at a time.

Optimality along the path (checked by scripts/validation/audit_certificate.py):
- |a(phi)^H n| <= lambda for every phi
- a(phi_i)^H n = lambda * exp(j alpha_i) on the support

Estimators:
- classo    jumps between singular points with attractor F (every off-support
            local maximum is a candidate; the largest lambda' wins)
- classo_h  geometric descent lambda <- mu*lambda + (1-mu)*p with attractor H
- sps_lasso grid-restricted path: frozen support angles, attractor G for jumps

All three finish with final_polish, which keeps descending without births until
a peak touches lambda or the reporting lambda is reached.

Path events (debug log): birth, death, overshoot bisection, jump fallback.
"""

from __future__ import annotations

import logging
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.modules import solver_rules as R
from src.modules.array_model import SteeringModel, circular_distance
from src.modules.doa_errors import (
    DimensionMismatch,
    IllConditioned,
    NegativeAmplitude,
    NoPeak,
    NonConvergence,
    PathDeath,
    RisingLambda,
    StallDetected,
    TrialTimeout,
    UndefinedPath,
)
from src.modules.estimate_report import (
    EstimateReport,
    EstimatorOptions,
    Method,
    Status,
    record_lambda,
    scale_free,
)
from src.modules.newton_core import (
    SupportState,
    attractor_F,
    attractor_G,
    attractor_H,
    frozen_state,
    residual,
)
from src.modules.spectrum_search import (
    PeakResult,
    correlation,
    grid_peaks,
    grid_point,
    grid_index,
    local_peaks,
    refine_peak,
)

logger = logging.getLogger(__name__)

# H-step outcomes
STEP = "step"
TOUCH = "touch"
DEATH = "death"


# ============================================================
# CORE ENGINE
# ============================================================

class HomotopyPath:
    """
    Mutable path tracer for one snapshot.

    grid_size=None traces the gridless path; an integer restricts the support
    to the uniform grid of that size (SPS-LASSO) and freezes support angles.
    """

    def __init__(
        self,
        model: SteeringModel,
        x: np.ndarray,
        opts: EstimatorOptions,
        *,
        grid_size: Optional[int] = None,
    ):
        self.model = model
        self.x = np.asarray(x, dtype=complex).reshape(-1)
        self.opts = opts
        self.grid_size = grid_size
        self.free_support = grid_size is None

        guard = opts.guard_for(model.m)
        if grid_size is not None:
            guard = max(guard, math.pi / grid_size)
        self.guard = guard

        self.state: Optional[SupportState] = None
        self.lambda0 = 0.0
        self.births = 0
        self.events = 0
        self.iterations = 0
        self.lambda_path: List[Tuple[float, int]] = []
        self._dead: Optional[float] = None

    # ----------------------------------------------------------
    # spectrum helpers
    # ----------------------------------------------------------

    def _peaks(self, n_hat: np.ndarray, exclusions: Sequence[float]) -> List[PeakResult]:
        if self.grid_size is not None:
            return grid_peaks(self.model, n_hat, self.grid_size, exclusions, self.guard)
        return local_peaks(self.model, n_hat, exclusions, self.guard, self.opts.scan_density)

    def _exclusions(self, state: SupportState) -> Tuple[float, ...]:
        if self._dead is None:
            return state.support
        return state.support + (self._dead,)

    def off_support_peak(self, state: Optional[SupportState] = None) -> Optional[PeakResult]:
        state = self.state if state is None else state
        peaks = self._peaks(residual(self.model, self.x, state), self._exclusions(state))
        return peaks[0] if peaks else None

    @property
    def floor(self) -> float:
        return R.LAMBDA_FLOOR_REL * self.lambda0

    def _check_deadline(self) -> None:
        if self.opts.deadline is not None and time.monotonic() > self.opts.deadline:
            raise TrialTimeout(f"Path time budget exhausted at lambda={self.state.lam:.6g}")

    def _newton_kwargs(self) -> dict:
        return {"deadline": self.opts.deadline}

    # ----------------------------------------------------------
    # events
    # ----------------------------------------------------------

    def start(self) -> None:
        """Birth of the first atom at the global peak of |a^H x|, lambda_0 = its height."""
        peaks = self._peaks(self.x, ())
        if not peaks or peaks[0].p <= 0.0:
            raise NoPeak("Spectrum of the snapshot is flat (x = 0?)")
        top = peaks[0]
        alpha = float(np.angle(correlation(self.model, self.x, top.phi)))
        self.lambda0 = top.p
        self.state = SupportState((top.phi,), (0.0,), (alpha,), top.p)
        self.births = 1
        self.events = 1
        record_lambda(self.lambda_path, top.p, 1)
        logger.debug("start: phi=%.9f lambda0=%.9g", top.phi, top.p)

    def _birth(self, phi: float) -> None:
        n_hat = residual(self.model, self.x, self.state)
        alpha = float(np.angle(correlation(self.model, n_hat, phi)))
        self.state = self.state.with_atom(phi, 0.0, alpha)
        self._dead = None
        self.births += 1
        self._count_event()
        record_lambda(self.lambda_path, self.state.lam, self.state.size)
        logger.debug("birth #%d: phi=%.9f lambda=%.9g", self.births, phi, self.state.lam)

    def _count_event(self) -> None:
        self.events += 1
        limit = R.MAX_PATH_EVENTS_FACTOR * self.opts.n + 10
        if self.events > limit:
            raise StallDetected(f"Path exceeded {limit} birth/death events")

    def _h(self, state: SupportState, lam: float) -> SupportState:
        out = attractor_H(
            self.model, self.x, state, lam, self.opts.newton,
            free_support=self.free_support, **self._newton_kwargs(),
        )
        self.iterations += 1
        return out

    # ----------------------------------------------------------
    # H continuation
    # ----------------------------------------------------------

    def _touching(self, peak: Optional[PeakResult], lam: float) -> bool:
        return peak is not None and lam - peak.p <= self.opts.birth_tol * lam

    def _overshoots(self, peak: Optional[PeakResult], lam: float) -> bool:
        return peak is not None and peak.p > lam * (1.0 + R.OVERSHOOT_REL_TOL)

    def h_step(self, target: float, *, allow_death: bool = True) -> str:
        """
        Move the state to `target` with attractor H.

        Newton failures halve the step; an overshooting off-support peak is
        bisected back to the touching lambda (TOUCH); an amplitude crossing zero
        is bisected to the crossing (DEATH, atom removed when allow_death).
        """
        lam = self.state.lam
        for _ in range(R.STEP_HALVING_MAX + 1):
            try:
                trial = self._h(self.state, target)
                break
            except NegativeAmplitude as exc:
                self._bisect_zero_crossing(target, exc.index, allow_death)
                return DEATH
            except (NonConvergence, IllConditioned) as exc:
                logger.debug("H step to %.9g failed (%s); halving", target, exc)
                target = lam - 0.5 * (lam - target)
        else:
            raise NonConvergence(f"H continuation from lambda={lam:.6g} failed after step halving")

        if self._overshoots(self.off_support_peak(trial), target):
            self._bisect_overshoot(target)
            return TOUCH
        self.state = trial
        return STEP

    def _bisect_overshoot(self, over: float) -> None:
        safe_state = self.state
        safe = safe_state.lam
        logger.debug("overshoot: bisecting lambda in [%.9g, %.9g]", over, safe)
        for _ in range(R.BISECTION_MAX_ITER):
            mid = 0.5 * (safe + over)
            try:
                trial = self._h(safe_state, mid)
            except (NegativeAmplitude, NonConvergence, IllConditioned):
                over = mid
                continue
            peak = self.off_support_peak(trial)
            if self._overshoots(peak, mid):
                over = mid
                continue
            safe, safe_state = mid, trial
            if self._touching(peak, mid):
                break
        self.state = safe_state

    def _bisect_zero_crossing(self, negative: float, index: Optional[int], allow_death: bool) -> None:
        safe_state = self.state
        safe = safe_state.lam
        for _ in range(R.BISECTION_MAX_ITER):
            if safe - negative <= 1e-12 * safe:
                break
            mid = 0.5 * (safe + negative)
            try:
                trial = self._h(safe_state, mid)
            except NegativeAmplitude as exc:
                negative, index = mid, exc.index
                continue
            except (NonConvergence, IllConditioned):
                negative = mid
                continue
            safe, safe_state = mid, trial

        if not allow_death:
            self.state = safe_state
            return
        if index is None:
            index = int(np.argmin(safe_state.r))

        survivor = safe_state.without_atom(index)
        if survivor.size == 0:
            raise PathDeath(f"Last atom died at lambda={safe:.6g}")
        dead_phi = safe_state.support[index]
        logger.debug("death: phi=%.9f lambda=%.9g", dead_phi, safe)
        self.state = self._h(survivor, safe)
        self.births -= 1
        self._count_event()
        self._dead = dead_phi
        record_lambda(self.lambda_path, self.state.lam, self.state.size)

    def descend_to_birth(self, mu: float) -> None:
        """C-LASSO_h inner loop: H steps until an off-support peak touches, then birth."""
        stall = 0
        while True:
            self._check_deadline()
            peak = self.off_support_peak()
            lam = self.state.lam
            if self._dead is None and self._touching(peak, lam):
                self._birth(peak.phi)
                return

            p = 0.0 if peak is None else peak.p
            target = mu * lam + (1.0 - mu) * p
            if target < self.floor:
                raise UndefinedPath(
                    f"lambda reached the floor {self.floor:.3g} with {self.births}/{self.opts.n} sources"
                )
            if self.h_step(target) != DEATH:
                self._dead = None

            if lam - self.state.lam < R.STALL_REL_DECREASE * self.lambda0:
                stall += 1
                if stall >= R.STALL_WINDOW:
                    raise StallDetected(f"lambda stalled at {self.state.lam:.6g}")
            else:
                stall = 0

    # ----------------------------------------------------------
    # marginalised jumps (F / G)
    # ----------------------------------------------------------

    def _marginal(self, phi: float) -> Tuple[SupportState, float, float]:
        ceiling = self.state.lam
        kwargs = {"lambda_ceiling": ceiling, **self._newton_kwargs()}
        if not self.free_support:
            r, alpha, lam = attractor_G(self.model, self.x, self.state, phi, self.opts.newton, **kwargs)
            self.iterations += 1
            return frozen_state(self.state, r, alpha, lam), lam, phi

        spacing = 2.0 * math.pi / math.ceil(self.opts.scan_density * self.model.m)
        start = self.state
        probe = phi
        for _ in range(R.PROBE_REFINE_MAX):
            new_state, lam = attractor_F(self.model, self.x, start, probe, self.opts.newton, **kwargs)
            solved = probe
            self.iterations += 1
            n_hat = residual(self.model, self.x, new_state)
            moved = refine_peak(self.model, n_hat, probe, spacing).phi
            if circular_distance(moved, probe) < R.PROBE_REFINE_TOL:
                break
            start, probe = new_state, moved
        # the probe F was last solved at, not the unsolved move
        return new_state, lam, solved

    def _candidates(self) -> List[float]:
        peaks = self.off_support_peak_list()
        if self.grid_size is None:
            return [pk.phi for pk in peaks]

        seen = set()
        out: List[float] = []
        blocked = {grid_index(phi, self.grid_size) for phi in self.state.support}
        for pk in peaks:
            centre = grid_index(pk.phi, self.grid_size)
            for idx in (centre, centre - 1, centre + 1):
                idx %= self.grid_size
                phi = grid_point(idx, self.grid_size)
                if idx in seen or idx in blocked:
                    continue
                if any(circular_distance(phi, s) <= self.guard for s in self.state.support):
                    continue
                seen.add(idx)
                out.append(phi)
        return out

    def off_support_peak_list(self) -> List[PeakResult]:
        return self._peaks(residual(self.model, self.x, self.state), self._exclusions(self.state))

    def _valid_jump(self, state: SupportState, lam: float, probe: float) -> bool:
        if not np.all(np.isfinite(state.r)) or not lam > 0.0:
            return False
        peak = self.off_support_peak(state)
        if peak is None:
            return False
        return circular_distance(peak.phi, probe) <= self.guard and not self._overshoots(peak, lam)

    def jump_to_birth(self, mu: float) -> None:
        """
        C-LASSO inner step: evaluate the marginalised attractor at every candidate
        and jump to the largest lambda'; fall back to H descent when no candidate
        yields a valid jump.
        """
        self._check_deadline()
        candidates = self._candidates()
        if not candidates:
            raise UndefinedPath(f"No off-support local maximum left with {self.births}/{self.opts.n} sources")

        best: Optional[Tuple[SupportState, float, float]] = None
        for phi in candidates:
            try:
                result = self._marginal(phi)
            except (NonConvergence, IllConditioned, RisingLambda, DimensionMismatch, NegativeAmplitude) as exc:
                logger.debug("candidate %.6f rejected: %s", phi, exc)
                continue
            if best is None or result[1] > best[1]:
                best = result

        if best is not None and best[1] < self.floor:
            raise UndefinedPath(f"Next singular point lambda={best[1]:.3g} is below the floor {self.floor:.3g}")
        if best is None or not self._valid_jump(*best):
            logger.debug("jump rejected at lambda=%.9g; falling back to H descent", self.state.lam)
            self.descend_to_birth(mu)
            return

        new_state, lam, probe = best
        self.state = new_state
        self._birth(probe)

    # ----------------------------------------------------------
    # driver
    # ----------------------------------------------------------

    def run(self, *, jump: bool) -> SupportState:
        """Trace the path until opts.n atoms are alive."""
        if self.state is None:
            self.start()
        while self.births < self.opts.n:
            if jump:
                self.jump_to_birth(self.opts.mu)
            else:
                self.descend_to_birth(self.opts.mu)
        return self.state

    def polish(self) -> SupportState:
        """
        Descend without births from the n-th singular point lambda_n until an
        off-support peak touches lambda or the reporting lambda is reached.
        """
        lam_n = self.state.lam
        lam_stop = self.opts.stop_lambda
        if lam_stop is None:
            lam_stop = self.opts.report_lambda_factor * lam_n

        mu = self.opts.mu
        while self.state.lam > lam_stop:
            self._check_deadline()
            peak = self.off_support_peak()
            lam = self.state.lam
            if self._touching(peak, lam):
                break
            p = 0.0 if peak is None else peak.p
            target = max(mu * lam + (1.0 - mu) * p, lam_stop)
            # round-off can stall the descent just above the stop level
            if lam - target <= 1e-12 * lam:
                break
            if self.h_step(target, allow_death=False) != STEP:
                break

        record_lambda(self.lambda_path, self.state.lam, self.state.size)
        return self.state

    def report(self, method: Method, *, jump: bool) -> EstimateReport:
        status = Status.CONVERGED
        message = ""
        try:
            self.run(jump=jump)
            self.polish()
        except (UndefinedPath, NoPeak) as exc:
            if self.state is None:
                raise
            status = Status.UNDEFINED
            message = str(exc)
            logger.debug("%s undefined: %s", method.value, exc)

        return EstimateReport(
            method=method,
            doas=self.state.support,
            amplitudes=tuple(complex(s) for s in self.state.amplitudes),
            lambda_path=tuple(self.lambda_path),
            iterations=self.iterations,
            status=status,
            report_lambda=self.state.lam,
            message=message,
        )


# ============================================================
# ESTIMATORS
# ============================================================

@scale_free
def classo(model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    """C-LASSO: singular-point jumps with attractor F."""
    return HomotopyPath(model, x, opts).report(Method.CLASSO, jump=True)


@scale_free
def classo_h(model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    """C-LASSO_h: lambda <- mu*lambda + (1-mu)*p with attractor H."""
    return HomotopyPath(model, x, opts).report(Method.CLASSO_H, jump=False)


@scale_free
def sps_lasso(model: SteeringModel, x: np.ndarray, opts: EstimatorOptions) -> EstimateReport:
    """Grid SPS-LASSO: support restricted to the uniform grid of opts.grid_size points."""
    if opts.grid_size < 2 * model.m:
        raise ValueError(f"grid_size must be >= 2m = {2 * model.m}, got {opts.grid_size}")
    return HomotopyPath(model, x, opts, grid_size=opts.grid_size).report(Method.SPS, jump=True)


def final_polish(
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    opts: EstimatorOptions,
    *,
    grid_size: Optional[int] = None,
) -> SupportState:
    """
    Reporting continuation from a state converged at its n-th singular point.

    Stops when an off-support peak reaches lambda or at
    stop_lambda / report_lambda_factor * lambda_n, whichever comes first.
    """
    path = HomotopyPath(model, x, opts, grid_size=grid_size)
    path.state = state
    path.lambda0 = state.lam
    path.births = state.size
    return path.polish()
