#!/usr/bin/env python3
"""
Grid LASSO oracle
=================

From-scratch complex LASSO on a uniform phi-grid, used to cross-check the
gridless path at a fixed lambda:

    min_s 1/2 ||x - A_grid s||^2 + lambda * sum |s_i|

Solver: active-set cyclic coordinate descent with the complex soft threshold
    s_i <- z * max(0, 1 - (lambda/m) / |z|),  z = s_i + a_i^H r / m
(every column has squared norm m). The full KKT check |a_i^H r| <= lambda on
inactive columns is vectorised; the largest violator joins the active set.

Adjacent grid columns are nearly collinear, so mass may split across
neighbouring cells: compare clusters (summed amplitude, weighted position).
"""
from __future__ import annotations

import argparse
import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from scripts.services.snapshot_io import load_snapshot


@dataclass(frozen=True)
class GridCluster:
    phi: float              # |s|-weighted circular mean of the member grid points
    amplitude: complex      # summed complex amplitude
    cells: Tuple[int, ...]


def soft_threshold(z: complex, tau: float) -> complex:
    mag = abs(z)
    if mag <= tau:
        return 0j
    return z * (1.0 - tau / mag)


def grid_lasso(
    x: np.ndarray,
    grid_size: int,
    lam: float,
    *,
    tol: float = 1e-12,
    max_sweeps: int = 200_000,
    max_outer: int = 500,
) -> Tuple[np.ndarray, np.ndarray]:
    """(grid, s) solving the grid LASSO at `lam`."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    m = x.shape[0]
    grid = -np.pi + 2.0 * np.pi * np.arange(grid_size) / grid_size
    A = np.exp(1j * np.outer(np.arange(m), grid))
    s = np.zeros(grid_size, dtype=complex)
    r = x.copy()
    tau = lam / m
    scale = max(float(np.linalg.norm(x)), 1e-300)
    active: List[int] = []

    for _ in range(max_outer):
        corr = np.abs(A.conj().T @ r)
        corr[active] = 0.0
        worst = int(np.argmax(corr))
        if corr[worst] <= lam * (1.0 + 1e-9):
            break
        active.append(worst)

        for _ in range(max_sweeps):
            delta = 0.0
            for i in active:
                a = A[:, i]
                z = s[i] + np.vdot(a, r) / m
                new = soft_threshold(z, tau)
                change = new - s[i]
                if change != 0.0:
                    r -= a * change
                    s[i] = new
                    delta = max(delta, abs(change))
            if delta < tol * scale:
                break
        active = [i for i in active if s[i] != 0.0]

    return grid, s


def clusters(grid: np.ndarray, s: np.ndarray, gap: int = 2) -> List[GridCluster]:
    """Group nonzero cells separated by at most `gap` cells (circularly)."""
    size = grid.shape[0]
    idx = sorted(int(i) for i in np.flatnonzero(s))
    if not idx:
        return []
    groups: List[List[int]] = [[idx[0]]]
    for i in idx[1:]:
        if i - groups[-1][-1] <= gap:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) > 1 and groups[0][0] + size - groups[-1][-1] <= gap:
        groups[0] = groups.pop() + groups[0]

    out = []
    for g in groups:
        w = np.abs(s[g])
        phi = float(np.angle(np.sum(w * np.exp(1j * grid[g]))))
        out.append(GridCluster(phi=phi, amplitude=complex(np.sum(s[g])), cells=tuple(g)))
    out.sort(key=lambda c: -abs(c.amplitude))
    return out


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(description="Solve the grid LASSO for a snapshot at a fixed lambda.")
    ap.add_argument("--in", dest="input_path", required=True, help="Snapshot JSON")
    ap.add_argument("--lambda", dest="lam", type=float, required=True)
    ap.add_argument("--grid-size", type=int, default=4096)
    args = ap.parse_args(argv)

    x = load_snapshot(args.input_path).x
    grid, s = grid_lasso(x, args.grid_size, args.lam)
    for c in clusters(grid, s):
        print(f"phi={c.phi:+.6f}  |s|={abs(c.amplitude):.6f}  cells={len(c.cells)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
