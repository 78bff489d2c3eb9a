"""
Array model
===========

Physical model of the half-wavelength uniform linear array (ULA).

Everything is parameterised by the electrical angle phi (inter-sensor phase
increment, phi = pi*cos(theta) for physical angle theta), with the phase
reference at sensor 0:

    a_k(phi) = exp(j*k*phi),         k = 0..m-1
    d_k(phi) = j*k*exp(j*k*phi)      (da/dphi)
    c_k(phi) = -k^2*exp(j*k*phi)     (dd/dphi)

Snapshots follow x = sum_i a(phi_i) s_i + n with circularly-symmetric complex
Gaussian noise of total per-component variance sigma^2, so SNR = |s_1|^2 / sigma^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from src.modules.trial_seeding import make_rng


# ============================================================
# DATA STRUCTURES
# ============================================================

@dataclass(frozen=True)
class SteeringModel:
    m: int
    k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"SteeringModel needs an integer sensor count m >= 2, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        k = np.arange(self.m, dtype=float)
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    def matrix(self, phis: Sequence[float]) -> np.ndarray:
        """Steering matrix A(phis), shape (m, len(phis))."""
        phis = np.asarray(phis, dtype=float).reshape(-1)
        return np.exp(1j * np.outer(self.k, phis))

    def derivative_matrices(self, phis: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A, D, C) for a set of angles, each of shape (m, len(phis))."""
        A = self.matrix(phis)
        D = 1j * self.k[:, None] * A
        C = -(self.k[:, None] ** 2) * A
        return A, D, C


@dataclass(frozen=True)
class Scenario:
    """
    Ground truth for one synthetic single-snapshot experiment.
    """
    m: int
    doas: Tuple[float, ...]
    amplitudes: Tuple[complex, ...]
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "doas", tuple(float(d) for d in self.doas))
        object.__setattr__(self, "amplitudes", tuple(complex(s) for s in self.amplitudes))
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"Scenario.m must be an integer >= 2, got {self.m!r}")
        if len(self.doas) != len(self.amplitudes):
            raise ValueError(
                f"Scenario has {len(self.doas)} DOAs but {len(self.amplitudes)} amplitudes"
            )
        if len(self.doas) >= self.m:
            raise ValueError(f"Scenario needs fewer sources than sensors (n={len(self.doas)}, m={self.m})")
        if not all(math.isfinite(d) for d in self.doas):
            raise ValueError("Scenario DOAs must be finite")
        if not (self.noise_std >= 0.0):
            raise ValueError(f"Scenario.noise_std must be >= 0, got {self.noise_std!r}")
        if int(self.seed) < 0:
            raise ValueError(f"Scenario.seed must be unsigned, got {self.seed!r}")

    @property
    def n(self) -> int:
        return len(self.doas)

    def snr_db(self) -> float:
        """SNR = |s_1|^2 / sigma^2 in dB (inf when noiseless)."""
        if self.noise_std == 0.0 or not self.amplitudes:
            return math.inf
        return 10.0 * math.log10(abs(self.amplitudes[0]) ** 2 / self.noise_std ** 2)


@dataclass(frozen=True)
class Snapshot:
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=complex).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def m(self) -> int:
        return int(self.x.shape[0])


# ============================================================
# OPERATIONS
# ============================================================

def steering(model: SteeringModel, phi: float) -> np.ndarray:
    """a(phi): entry k equals exp(j*k*phi)."""
    return np.exp(1j * model.k * float(phi))


def steering_derivs(model: SteeringModel, phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """(d, c) = (da/dphi, d^2a/dphi^2) at phi."""
    a = steering(model, phi)
    return 1j * model.k * a, -(model.k ** 2) * a


def noise_std_for_snr(reference_amplitude: complex, snr_db: float) -> float:
    """sigma such that |s_1|^2 / sigma^2 = 10^(snr_db/10)."""
    return math.sqrt(abs(reference_amplitude) ** 2 / 10.0 ** (snr_db / 10.0))


def synthesize(scenario: Scenario) -> Snapshot:
    """
    x = A(doas) s + n, with Re/Im of n each N(0, sigma^2/2).

    A pure function of the scenario fields: the noise stream is drawn from a
    generator seeded with scenario.seed only.
    """
    model = SteeringModel(scenario.m)
    x = np.zeros(scenario.m, dtype=complex)
    if scenario.n:
        x = model.matrix(scenario.doas) @ np.asarray(scenario.amplitudes, dtype=complex)

    rng = make_rng(scenario.seed)
    noise = rng.standard_normal(scenario.m) + 1j * rng.standard_normal(scenario.m)
    return Snapshot(x + (scenario.noise_std / math.sqrt(2.0)) * noise)


def wrap_angle(phi):
    """Map angles (scalar or array) to [-pi, pi)."""
    return (np.asarray(phi, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


def circular_distance(a: float, b: float) -> float:
    return abs(float(wrap_angle(float(a) - float(b))))


def physical_degrees(phi: float) -> float:
    """
    Display-only conversion from electrical angle to physical angle in degrees
    (half-wavelength ULA, theta = arccos(phi/pi)).
    """
    return math.degrees(math.acos(max(-1.0, min(1.0, float(wrap_angle(phi)) / math.pi))))
