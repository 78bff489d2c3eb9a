"""
Spectrum search
===============

Gridless evaluation and maximisation of the correlation spectrum

    f(phi) = |a(phi)^H n|

which the continuous LASSO conditions bound by lambda.

Search procedure (global_peak / local_peaks):
1. evaluate f on a uniform scan grid of ceil(K*m) points over [-pi, pi)
2. keep circular local maxima of the scan
3. refine each by safeguarded Newton on g(phi) = |a(phi)^H n|^2
   (bisection fallback when g'' >= 0 or the step leaves the bracket)
4. drop maxima within `guard` of an exclusion, return the rest by height

Pure functions; safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.modules import solver_rules as R
from src.modules.array_model import SteeringModel, circular_distance, steering, steering_derivs, wrap_angle
from src.modules.doa_errors import NoPeak


@dataclass(frozen=True)
class PeakResult:
    phi: float
    p: float
    is_local_max: bool


# ============================================================
# POINTWISE EVALUATION
# ============================================================

def correlation(model: SteeringModel, n_hat: np.ndarray, phi: float) -> complex:
    """a(phi)^H n_hat."""
    return complex(np.vdot(steering(model, phi), n_hat))


def _g_derivatives(model: SteeringModel, n_hat: np.ndarray, phi: float) -> Tuple[float, float, float]:
    """g, g', g'' for g(phi) = |a(phi)^H n|^2."""
    a = steering(model, phi)
    d, c = steering_derivs(model, phi)
    p = np.vdot(a, n_hat)
    p1 = np.vdot(d, n_hat)
    p2 = np.vdot(c, n_hat)
    g = abs(p) ** 2
    g1 = 2.0 * float(np.real(p1 * np.conj(p)))
    g2 = 2.0 * float(np.real(p2 * np.conj(p))) + 2.0 * abs(p1) ** 2
    return g, g1, g2


def scan_grid(model: SteeringModel, density: int = R.SCAN_DENSITY) -> np.ndarray:
    count = int(math.ceil(density * model.m))
    return -math.pi + 2.0 * math.pi * np.arange(count) / count


def scan(model: SteeringModel, n_hat: np.ndarray, density: int = R.SCAN_DENSITY) -> Tuple[np.ndarray, np.ndarray]:
    """(grid, f(grid)) on the uniform scan grid."""
    grid = scan_grid(model, density)
    values = np.abs(model.matrix(grid).conj().T @ np.asarray(n_hat, dtype=complex))
    return grid, values


def grid_spectrum(n_hat: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    f on the uniform grid phi_i = -pi + 2*pi*i/size, via one zero-padded FFT.

    a(phi_i)^H n = sum_k n_k (-1)^k exp(-2j*pi*k*i/size).
    """
    n_hat = np.asarray(n_hat, dtype=complex)
    m = n_hat.shape[0]
    if size < m:
        raise ValueError(f"grid size {size} is smaller than the sensor count {m}")
    alternating = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    values = np.abs(np.fft.fft(n_hat * alternating, size))
    grid = -math.pi + 2.0 * math.pi * np.arange(size) / size
    return grid, values


def circular_local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices i with values[i] >= left neighbour and > right neighbour (circular)."""
    left = np.roll(values, 1)
    right = np.roll(values, -1)
    return np.flatnonzero((values >= left) & (values > right))


# ============================================================
# REFINEMENT
# ============================================================

def refine_peak(
    model: SteeringModel,
    n_hat: np.ndarray,
    phi0: float,
    half_width: float,
) -> PeakResult:
    """
    Safeguarded Newton on g' = 0 inside [phi0 - half_width, phi0 + half_width].

    The returned height is never below f(phi0).
    """
    lo, hi = phi0 - half_width, phi0 + half_width
    phi = float(phi0)
    g0 = _g_derivatives(model, n_hat, phi)[0]

    for _ in range(R.PEAK_REFINE_MAX_ITER):
        g, g1, g2 = _g_derivatives(model, n_hat, phi)
        if g1 > 0.0:
            lo = phi
        else:
            hi = phi

        if g2 < 0.0:
            candidate = phi - g1 / g2
            if not lo < candidate < hi:
                candidate = 0.5 * (lo + hi)
        else:
            candidate = 0.5 * (lo + hi)

        step = abs(candidate - phi)
        phi = candidate
        if step < R.PEAK_REFINE_XTOL or hi - lo < R.PEAK_REFINE_XTOL:
            break

    g, g1, g2 = _g_derivatives(model, n_hat, phi)
    if g < g0:
        phi, g = float(phi0), g0
        g1, g2 = _g_derivatives(model, n_hat, phi)[1:]

    phi = float(wrap_angle(phi))
    return PeakResult(phi=phi, p=math.sqrt(g), is_local_max=bool(g2 <= 0.0 and g > 0.0))


def _outside_guard(phi: float, exclusions: Sequence[float], guard: float) -> bool:
    return all(circular_distance(phi, e) > guard for e in exclusions)


# ============================================================
# GLOBAL SEARCH
# ============================================================

def local_peaks(
    model: SteeringModel,
    n_hat: np.ndarray,
    exclusions: Sequence[float] = (),
    guard: float = 0.0,
    density: int = R.SCAN_DENSITY,
) -> List[PeakResult]:
    """
    All refined local maxima of f outside the guard zones, highest first.
    """
    if guard < 0.0:
        raise ValueError(f"guard must be >= 0, got {guard}")

    n_hat = np.asarray(n_hat, dtype=complex)
    grid, values = scan(model, n_hat, density)
    spacing = 2.0 * math.pi / grid.shape[0]

    peaks: List[PeakResult] = []
    for idx in circular_local_maxima(values):
        if values[idx] <= 0.0:
            continue
        peak = refine_peak(model, n_hat, float(grid[idx]), spacing)
        if not _outside_guard(peak.phi, exclusions, guard):
            continue
        # two scan maxima can refine onto the same peak
        if any(circular_distance(peak.phi, q.phi) < 1e-9 for q in peaks):
            continue
        peaks.append(peak)

    peaks.sort(key=lambda pk: (-pk.p, pk.phi))
    return peaks


def global_peak(
    model: SteeringModel,
    n_hat: np.ndarray,
    exclusions: Sequence[float] = (),
    guard: float = 0.0,
    density: int = R.SCAN_DENSITY,
) -> PeakResult:
    """
    Highest local maximum of f outside the guard zones.

    Raises NoPeak when every local maximum is guarded (or the spectrum is flat).
    """
    peaks = local_peaks(model, n_hat, exclusions, guard, density)
    if not peaks:
        raise NoPeak(f"No local maximum of the spectrum outside guard={guard:.3g} of {len(exclusions)} exclusion(s)")
    return peaks[0]


def grid_peaks(
    model: SteeringModel,
    n_hat: np.ndarray,
    grid_size: int,
    exclusions: Sequence[float] = (),
    guard: float = 0.0,
) -> List[PeakResult]:
    """
    Local maxima of f restricted to the uniform grid of `grid_size` points
    (no refinement: the search space is the grid itself), highest first.
    """
    grid, values = grid_spectrum(n_hat, grid_size)
    peaks = [
        PeakResult(phi=float(grid[i]), p=float(values[i]), is_local_max=True)
        for i in circular_local_maxima(values)
        if values[i] > 0.0 and _outside_guard(float(grid[i]), exclusions, guard)
    ]
    peaks.sort(key=lambda pk: (-pk.p, pk.phi))
    return peaks


def grid_point(index: int, grid_size: int) -> float:
    """phi of the index-th point of the uniform grid over [-pi, pi)."""
    return -math.pi + 2.0 * math.pi * (int(index) % grid_size) / grid_size


def grid_index(phi: float, grid_size: int) -> int:
    return int(round((float(wrap_angle(phi)) + math.pi) * grid_size / (2.0 * math.pi))) % grid_size
