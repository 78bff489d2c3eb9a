#!/usr/bin/env python3
"""
Optimality certificate audit
============================

Independently re-checks a LASSO-family estimate against its snapshot:

1. spectrum bound   max_phi |a(phi)^H n| <= lambda * (1 + 1e-6)
2. support phases   |a(phi_i)^H n - lambda * exp(j alpha_i)| <= 1e-8 * ||x||
                    (only |a(phi_i)^H n| = lambda for an atom with s_i = 0)

with n = x - A(doas) s. The spectrum maximum comes from a dense zero-padded FFT
refined by bounded scalar minimisation (scipy); spectrum_search is not used.

Exit codes: 0 certificate holds, 3 violated, 1 unreadable input or a report
without lambda (ML, RELAX, Failed).

Usage:
    python3 scripts/validation/audit_certificate.py --in report.json --snapshot snap.json
"""
from __future__ import annotations

import argparse
import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from scripts.services.cli_config import CliConfig, Subcommand
from scripts.services.snapshot_io import SnapshotFormatError, load_report, load_snapshot, write_json
from src.modules import solver_rules as R
from src.modules.estimate_report import EstimateReport, Status

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATED = 3


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class AuditResult:
    lam: float
    max_spectrum: float
    spectrum_excess: float           # max_spectrum / lambda - 1
    support_residual: float          # absolute
    support_tol: float
    passed: bool


def _spectrum_at(x_res: np.ndarray, phi: float) -> float:
    k = np.arange(x_res.shape[0])
    return float(abs(np.sum(np.exp(-1j * k * phi) * x_res)))


def dense_spectrum_max(n_hat: np.ndarray, fft_size: int = R.AUDIT_FFT_SIZE, near: float = 1e-3) -> float:
    """
    max_phi |a(phi)^H n|: FFT on fft_size points, then bounded refinement of every
    grid local maximum within `near` (relative) of the grid maximum.
    """
    m = n_hat.shape[0]
    values = np.abs(np.fft.fft(n_hat * (-1.0) ** np.arange(m), fft_size))
    top = float(values.max())
    if top == 0.0:
        return 0.0
    step = 2.0 * np.pi / fft_size
    is_max = (values >= np.roll(values, 1)) & (values >= np.roll(values, -1))
    best = top
    for i in np.flatnonzero(is_max & (values >= top * (1.0 - near))):
        centre = -np.pi + step * i
        res = minimize_scalar(
            lambda phi: -_spectrum_at(n_hat, phi),
            bounds=(centre - step, centre + step),
            method="bounded",
            options={"xatol": 1e-13},
        )
        best = max(best, -float(res.fun))
    return best


def audit_report(report: EstimateReport, x: np.ndarray, fft_size: int = R.AUDIT_FFT_SIZE) -> AuditResult:
    if not report.method.is_lasso:
        raise AuditError(f"{report.method.value} reports carry no lambda certificate (LASSO family only)")
    if report.status is Status.FAILED or report.report_lambda is None:
        raise AuditError("report has no lambda (failed run?)")

    x = np.asarray(x, dtype=complex).reshape(-1)
    m = x.shape[0]
    lam = float(report.report_lambda)
    k = np.arange(m)[:, None]
    doas = np.asarray(report.doas, dtype=float)
    s = np.asarray(report.amplitudes, dtype=complex)
    A = np.exp(1j * k * doas[None, :])
    n_hat = x - A @ s

    corr = A.conj().T @ n_hat
    residuals = []
    for c, si in zip(corr, s):
        if abs(si) == 0.0:
            residuals.append(abs(abs(c) - lam))
        else:
            residuals.append(abs(c - lam * si / abs(si)))
    support_residual = max(residuals) if residuals else 0.0
    support_tol = R.CERT_SUPPORT_REL_TOL * float(np.linalg.norm(x))

    peak = dense_spectrum_max(n_hat, fft_size)
    excess = peak / lam - 1.0
    passed = excess <= R.CERT_SPECTRUM_REL_TOL and support_residual <= support_tol
    return AuditResult(lam, peak, excess, float(support_residual), support_tol, bool(passed))


def cmd_audit(config: CliConfig) -> int:
    try:
        report = load_report(config.input_path)
        snapshot = load_snapshot(config.snapshot_path)
        if len(report.doas) != len(report.amplitudes):
            raise AuditError("report has mismatched doas/amplitudes")
        result = audit_report(report, snapshot.x)
    except (OSError, SnapshotFormatError, AuditError, ValueError) as exc:
        print(f"✗ audit: {exc}", file=sys.stderr)
        return EXIT_ERROR

    mark = "✓" if result.passed else "✗"
    print(f"{mark} certificate {'holds' if result.passed else 'VIOLATED'} at lambda={result.lam:.9g}")
    print(f"  max off-support spectrum excess: {result.spectrum_excess:+.3e} (tol {R.CERT_SPECTRUM_REL_TOL:.0e})")
    print(f"  max support residual:            {result.support_residual:.3e} (tol {result.support_tol:.3e})")
    if config.output_path:
        write_json(config.output_path, asdict(result))
    return EXIT_OK if result.passed else EXIT_VIOLATED


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(description="Audit the optimality certificate of a LASSO-family report.")
    ap.add_argument("--in", dest="input_path", required=True, help="Estimate report JSON")
    ap.add_argument("--snapshot", dest="snapshot_path", required=True, help="Snapshot JSON")
    ap.add_argument("--out", dest="output_path", default=None, help="Optional audit result JSON")
    args = ap.parse_args(argv)
    return cmd_audit(CliConfig(subcommand=Subcommand.AUDIT, **vars(args)))


if __name__ == "__main__":
    raise SystemExit(main())
