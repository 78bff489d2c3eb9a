"""
Newton core
===========

Residual/Jacobian systems for a support state and the damped Newton solver
that drives them to zero.

Unknowns are ordered (theta_1..theta_k, r_1..r_k, alpha_1..alpha_k[, lambda])
with s_i = r_i exp(j alpha_i) and residual n = x - A(theta) s.

Residual blocks (complex g_i = a_i^H n, h_i = d_i^H n, u_i = exp(j alpha_i)):

    eta_A = Re(g - lambda u)
    eta_B = Im(g - lambda u)
    eta_C = Re(conj(u) h)                  (derivative condition, phase normalised)
    eta_L = |a(psi)^H n|^2 - lambda^2      (LMA only, probe psi)

Kinds:
- ML   lambda = 0 (KKT of the NLLS problem)
- LEA  lambda fixed at state.lam (equilevel attractor H)
- LMA  lambda is an extra unknown, closed by eta_L (marginalised attractor F)

Frozen-support variants drop eta_C and the theta columns (attractor G).
The Jacobian is analytic; every column is checked against finite differences
in the test-suite.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.modules import solver_rules as R
from src.modules.array_model import SteeringModel, circular_distance, steering, wrap_angle
from src.modules.doa_errors import (
    DimensionMismatch,
    IllConditioned,
    NegativeAmplitude,
    NonConvergence,
    RisingLambda,
    TrialTimeout,
)

logger = logging.getLogger(__name__)

PROBE_MIN_GAP = 1e-9


# ============================================================
# DATA STRUCTURES
# ============================================================

class SystemKind(str, Enum):
    ML = "ML"
    LEA = "LEA"
    LMA = "LMA"


@dataclass(frozen=True)
class SupportState:
    """
    Active set I with polar amplitudes (r, alpha) at regularisation level lam.
    """
    support: Tuple[float, ...]
    r: Tuple[float, ...]
    alpha: Tuple[float, ...]
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(float(v) for v in self.support))
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        object.__setattr__(self, "lam", float(self.lam))
        if not len(self.support) == len(self.r) == len(self.alpha):
            raise DimensionMismatch(
                f"support/r/alpha lengths differ: {len(self.support)}/{len(self.r)}/{len(self.alpha)}"
            )

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.asarray(self.r) * np.exp(1j * np.asarray(self.alpha))

    def min_gap(self) -> float:
        """Smallest circular distance between two support angles (inf for k < 2)."""
        gaps = [
            circular_distance(a, b)
            for i, a in enumerate(self.support)
            for b in self.support[i + 1:]
        ]
        return min(gaps) if gaps else math.inf

    def with_atom(self, phi: float, r: float, alpha: float) -> "SupportState":
        return replace(
            self,
            support=self.support + (float(phi),),
            r=self.r + (float(r),),
            alpha=self.alpha + (float(alpha),),
        )

    def without_atom(self, index: int) -> "SupportState":
        keep = [i for i in range(self.size) if i != index]
        return replace(
            self,
            support=tuple(self.support[i] for i in keep),
            r=tuple(self.r[i] for i in keep),
            alpha=tuple(self.alpha[i] for i in keep),
        )


@dataclass(frozen=True)
class NewtonSystem:
    eta: np.ndarray
    J: np.ndarray
    kind: SystemKind
    probe_modulus: Optional[float] = None
    lam: float = 0.0


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = R.NEWTON_REL_TOL          # relative to ||x||
    max_iter: int = R.NEWTON_MAX_ITER
    backtrack_ratio: float = R.NEWTON_BACKTRACK_RATIO
    min_step: float = R.NEWTON_MIN_STEP
    cond_limit: float = R.NEWTON_COND_LIMIT

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter > 0 and self.min_step > 0 and self.cond_limit > 0):
            raise ValueError(f"NewtonOptions must be positive: {self}")
        if not 0.0 < self.backtrack_ratio < 1.0:
            raise ValueError(f"backtrack_ratio must be in (0,1), got {self.backtrack_ratio}")


@dataclass(frozen=True)
class NewtonRun:
    state: SupportState
    iterations: int
    residual: float


# ============================================================
# RESIDUALS
# ============================================================

def residual(model: SteeringModel, x: np.ndarray, state: SupportState) -> np.ndarray:
    """n = x - A(I) s."""
    x = np.asarray(x, dtype=complex)
    if state.size == 0:
        return x.copy()
    return x - model.matrix(state.support) @ state.amplitudes


def penalized_cost(model: SteeringModel, x: np.ndarray, state: SupportState) -> float:
    """L = 1/2 ||x - A s||^2 + lam * sum(r)."""
    n_hat = residual(model, x, state)
    return 0.5 * float(np.vdot(n_hat, n_hat).real) + state.lam * float(np.sum(state.r))


# ============================================================
# ASSEMBLY
# ============================================================

def assemble(
    kind: SystemKind,
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    probe: Optional[float] = None,
) -> NewtonSystem:
    """
    Full system (theta, r, alpha[, lambda]) for `kind`.

    Dimension 3k for ML/LEA, 3k+1 for LMA (which requires `probe`).
    """
    kind = SystemKind(kind)
    x = np.asarray(x, dtype=complex).reshape(-1)
    k = state.size
    if k == 0:
        raise DimensionMismatch("Cannot assemble a Newton system for an empty support")
    if x.shape[0] != model.m:
        raise DimensionMismatch(f"Snapshot length {x.shape[0]} does not match m={model.m}")
    if kind is SystemKind.LMA and probe is None:
        raise DimensionMismatch("LMA system needs a probe angle")

    lam = 0.0 if kind is SystemKind.ML else state.lam
    theta = np.asarray(state.support)
    r = np.asarray(state.r)
    u = np.exp(1j * np.asarray(state.alpha))
    s = r * u

    A, D, C = model.derivative_matrices(theta)
    n_hat = x - A @ s
    g = A.conj().T @ n_hat
    h = D.conj().T @ n_hat
    c = C.conj().T @ n_hat

    AhA = A.conj().T @ A
    AhD = A.conj().T @ D
    DhA = D.conj().T @ A
    DhD = D.conj().T @ D
    uc = np.conj(u)[:, None]

    # d(g - lam u)/d(theta, r, alpha)
    G_theta = np.diag(h) - AhD * s[None, :]
    G_r = -AhA * u[None, :]
    G_alpha = -1j * AhA * s[None, :] - 1j * lam * np.diag(u)

    # d Re(conj(u) h)/d(theta, r, alpha)
    H_theta = np.real(uc * (np.diag(c) - DhD * s[None, :]))
    H_r = np.real(uc * (-DhA * u[None, :]))
    H_alpha = np.real(uc * (-1j * DhA * s[None, :])) + np.diag(np.imag(np.conj(u) * h))

    J = np.block([
        [np.real(G_theta), np.real(G_r), np.real(G_alpha)],
        [np.imag(G_theta), np.imag(G_r), np.imag(G_alpha)],
        [H_theta, H_r, H_alpha],
    ])
    target = g - lam * u
    eta = np.concatenate([np.real(target), np.imag(target), np.real(np.conj(u) * h)])

    if kind is not SystemKind.LMA:
        return NewtonSystem(eta=eta, J=J, kind=kind, lam=lam)

    a_p = steering(model, float(probe))
    p = complex(np.vdot(a_p, n_hat))
    ap_A = a_p.conj() @ A
    ap_D = a_p.conj() @ D
    row = 2.0 * np.real(np.conj(p) * np.concatenate([-ap_D * s, -ap_A * u, -1j * ap_A * s]))
    lam_column = np.concatenate([-np.real(u), -np.imag(u), np.zeros(k)])

    J = np.block([
        [J, lam_column[:, None]],
        [row[None, :], np.array([[-2.0 * lam]])],
    ])
    eta = np.concatenate([eta, [abs(p) ** 2 - lam ** 2]])
    return NewtonSystem(eta=eta, J=J, kind=kind, probe_modulus=abs(p), lam=lam)


def _reduced(system: NewtonSystem, k: int, free_support: bool) -> NewtonSystem:
    """Drop the derivative rows and theta columns when the support is frozen."""
    if free_support:
        return system
    keep_rows = list(range(2 * k))
    keep_cols = list(range(k, 3 * k))
    if system.kind is SystemKind.LMA:
        keep_rows.append(3 * k)
        keep_cols.append(3 * k)
    return replace(system, eta=system.eta[keep_rows], J=system.J[np.ix_(keep_rows, keep_cols)])


def _system(kind, model, x, state, probe, free_support) -> NewtonSystem:
    return _reduced(assemble(kind, model, x, state, probe), state.size, free_support)


# ============================================================
# NEWTON ITERATION
# ============================================================

def _convergence_norm(system: NewtonSystem) -> float:
    e = np.array(system.eta, dtype=float)
    if system.kind is SystemKind.LMA:
        # (|p|^2 - lam^2) / (|p| + lam) = |p| - lam
        e[-1] /= max(system.probe_modulus + abs(system.lam), np.finfo(float).tiny)
    return float(np.max(np.abs(e))) if e.size else 0.0


def _solve(J: np.ndarray, eta: np.ndarray, cond_limit: float) -> np.ndarray:
    """J^{-1} eta via SVD of the column-equilibrated Jacobian."""
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(eta))):
        raise IllConditioned("Non-finite Jacobian or residual")
    scale = np.linalg.norm(J, axis=0)
    if np.any(scale == 0.0):
        raise IllConditioned("Jacobian has a zero column")
    U, sv, Vt = scipy.linalg.svd(J / scale)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] > cond_limit:
        cond = math.inf if sv[-1] <= 0.0 else sv[0] / sv[-1]
        raise IllConditioned(f"Jacobian condition number {cond:.3g} exceeds {cond_limit:.3g}")
    return (Vt.T @ ((U.T @ eta) / sv)) / scale


def _advance(state: SupportState, step: np.ndarray, kind: SystemKind, free_support: bool) -> SupportState:
    k = state.size
    offset = 0
    support = np.asarray(state.support)
    if free_support:
        support = support + step[:k]
        offset = k
    r = np.asarray(state.r) + step[offset:offset + k]
    alpha = np.asarray(state.alpha) + step[offset + k:offset + 2 * k]
    lam = state.lam
    if kind is SystemKind.LMA:
        lam = state.lam + float(step[offset + 2 * k])
    return SupportState(tuple(support), tuple(r), tuple(alpha), lam)


def _finalize(state: SupportState, kind: SystemKind, amplitude_floor: float) -> SupportState:
    r = np.asarray(state.r)
    alpha = np.asarray(state.alpha)
    if kind is SystemKind.ML:
        # (r, alpha) and (-r, alpha + pi) are the same ML source
        flip = r < 0.0
        r = np.abs(r)
        alpha = np.where(flip, alpha + math.pi, alpha)
    elif np.any(r < -amplitude_floor):
        idx = int(np.argmin(r))
        raise NegativeAmplitude(f"Amplitude of atom {idx} crossed zero (r={r[idx]:.3g})", index=idx)
    else:
        r = np.maximum(r, 0.0)
    return SupportState(
        tuple(float(v) for v in wrap_angle(np.asarray(state.support))),
        tuple(float(v) for v in r),
        tuple(float(v) for v in wrap_angle(alpha)),
        state.lam,
    )


def damped_newton(
    kind: SystemKind,
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    probe: Optional[float] = None,
    opts: Optional[NewtonOptions] = None,
    *,
    free_support: bool = True,
    deadline: Optional[float] = None,
) -> NewtonRun:
    """
    Drive the `kind` residual to zero from `state` with a backtracking Newton method.

    The direction J^{-1} eta is first tried with the "+" sign; when the local
    linear model says "+" does not reduce ||eta||_2 the negated direction is used,
    and that sign is kept for the rest of the run. Step lengths are halved
    (backtrack_ratio) until ||eta||_2 decreases. Convergence: ||eta||_inf < tol*||x||.
    """
    kind = SystemKind(kind)
    opts = opts or NewtonOptions()
    x = np.asarray(x, dtype=complex).reshape(-1)
    tol = opts.tol * max(float(np.linalg.norm(x)), np.finfo(float).tiny)

    system = _system(kind, model, x, state, probe, free_support)
    res = _convergence_norm(system)
    sign = 0

    for it in range(opts.max_iter + 1):
        if res < tol:
            return NewtonRun(_finalize(state, kind, tol), it, res)
        if it == opts.max_iter:
            break
        if deadline is not None and time.monotonic() > deadline:
            raise TrialTimeout("Per-trial time budget exhausted inside Newton iteration")

        delta = _solve(system.J, system.eta, opts.cond_limit)
        base = float(np.linalg.norm(system.eta))
        if sign == 0:
            sign = 1 if np.linalg.norm(system.eta + system.J @ delta) < base else -1
            logger.debug("%s Newton: update sign %+d", kind.value, sign)

        step = 1.0
        while True:
            trial = _advance(state, sign * step * delta, kind, free_support)
            trial_system = _system(kind, model, x, trial, probe, free_support)
            if float(np.linalg.norm(trial_system.eta)) < base:
                break
            step *= opts.backtrack_ratio
            if step < opts.min_step:
                if res <= R.NEWTON_ROUNDOFF_SLACK * tol:
                    return NewtonRun(_finalize(state, kind, tol), it, res)
                raise NonConvergence(
                    f"{kind.value} line search stalled at residual {res:.3g} (tol {tol:.3g}) after {it} iterations"
                )

        state, system = trial, trial_system
        res = _convergence_norm(system)

    raise NonConvergence(f"{kind.value} Newton did not converge in {opts.max_iter} iterations (residual {res:.3g})")


# ============================================================
# ATTRACTORS
# ============================================================

def attractor_H(
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    lam_target: float,
    opts: Optional[NewtonOptions] = None,
    *,
    free_support: bool = True,
    deadline: Optional[float] = None,
) -> SupportState:
    """Local equilevel attractor: stationary state of the LEA system at lam_target."""
    start = replace(state, lam=float(lam_target))
    return damped_newton(
        SystemKind.LEA, model, x, start, None, opts, free_support=free_support, deadline=deadline
    ).state


def _check_probe(state: SupportState, phi_probe: float) -> None:
    for phi in state.support:
        if circular_distance(phi, phi_probe) < PROBE_MIN_GAP:
            raise DimensionMismatch(f"Probe {phi_probe:.6f} coincides with support atom {phi:.6f}")


def _marginalized(model, x, state, phi_probe, opts, free_support, lambda_ceiling, deadline) -> SupportState:
    _check_probe(state, phi_probe)
    out = damped_newton(
        SystemKind.LMA, model, x, state, phi_probe, opts, free_support=free_support, deadline=deadline
    ).state
    ceiling = state.lam if lambda_ceiling is None else float(lambda_ceiling)
    if out.lam < 0.0:
        raise NonConvergence(f"Marginalised system converged to negative lambda {out.lam:.3g}")
    if out.lam > ceiling * (1.0 + 1e-12):
        raise RisingLambda(f"Probe {phi_probe:.6f} needs lambda {out.lam:.6g} > current {ceiling:.6g}")
    return out


def attractor_F(
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    phi_probe: float,
    opts: Optional[NewtonOptions] = None,
    *,
    lambda_ceiling: Optional[float] = None,
    deadline: Optional[float] = None,
) -> Tuple[SupportState, float]:
    """
    Local marginalised attractor: the lambda' < lambda at which the spectrum
    reaches lambda' at phi_probe while the support keeps touching.
    """
    out = _marginalized(model, x, state, phi_probe, opts, True, lambda_ceiling, deadline)
    return out, out.lam


def attractor_G(
    model: SteeringModel,
    x: np.ndarray,
    state: SupportState,
    phi_probe: float,
    opts: Optional[NewtonOptions] = None,
    *,
    lambda_ceiling: Optional[float] = None,
    deadline: Optional[float] = None,
) -> Tuple[Tuple[float, ...], Tuple[float, ...], float]:
    """Marginalised source attractor: as attractor_F with the support angles frozen."""
    out = _marginalized(model, x, state, phi_probe, opts, False, lambda_ceiling, deadline)
    return out.r, out.alpha, out.lam


def frozen_state(state: SupportState, r: Sequence[float], alpha: Sequence[float], lam: float) -> SupportState:
    """Rebuild a state on the same support from an attractor_G result."""
    return SupportState(state.support, tuple(r), tuple(alpha), lam)
