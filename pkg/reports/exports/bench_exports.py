#!/usr/bin/env python3
"""Bench result exports.

Exports:
- CSV  (always)   one BenchRow per line, '# axis:' comment line first
- XLSX (--xlsx)   same table, one sheet per scenario
- SVG  (--plot)   MSE vs axis, one line per method, log MSE axis

CSV bytes are a pure function of the rows: floats use %.12g and the wall-time
column stays empty unless timing is requested. The axis unit sits on a leading
'#' line, so read tables back with pd.read_csv(path, comment="#").
matplotlib draws each method line as an SVG <path> inside <g id="mse-<method>">.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from openpyxl import Workbook  # noqa: E402

from scripts.services.snapshot_io import atomic_output  # noqa: E402
from src.modules.bench_harness import BenchRow, SweepAxis  # noqa: E402


# ============================================================
# CONFIG
# ============================================================

CSV_COLUMNS = ["axis", "method", "mse", "undefined_rate", "mean_wall_time_ms", "trials_used"]
FLOAT_FORMAT = "%.12g"

SVG_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "doa-bench",
    "path.simplify": False,
}

AXIS_LABELS = {
    SweepAxis.SNR_DB: "SNR (dB)",
    SweepAxis.SEPARATION: "separation (electrical rad)",
}


# ============================================================
# TABLE
# ============================================================

def rows_to_records(rows: Sequence[BenchRow], *, timing: bool) -> List[Dict[str, Any]]:
    return [
        {
            "axis": row.axis_value,
            "method": row.method.value,
            "mse": row.mse,
            "undefined_rate": row.undefined_rate,
            "mean_wall_time_ms": row.mean_wall_time_ms if timing else "",
            "trials_used": row.trials_used,
        }
        for row in rows
    ]


def write_csv(out_path: Path, rows: Sequence[BenchRow], axis: SweepAxis, *, timing: bool = False) -> int:
    frame = pd.DataFrame(rows_to_records(rows, timing=timing), columns=CSV_COLUMNS)
    axis = SweepAxis(axis)
    with atomic_output(out_path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# axis: {axis.value} ({axis.unit})\n")
            frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return len(frame)


def _cell(v):
    # openpyxl writes NaN as an invalid number
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def write_xlsx(out_path: Path, sheet_name: str, rows: List[Dict[str, Any]]) -> int:
    with atomic_output(out_path) as tmp:
        wb = Workbook()
        ws = wb.active
        ws.title = sheet_name[:31]
        if rows:
            cols = list(rows[0].keys())
            ws.append(cols)
            for r in rows:
                ws.append([_cell(r.get(c)) for c in cols])
        wb.save(tmp)
    return len(rows)


# ============================================================
# PLOT
# ============================================================

def write_svg(out_path: Path, rows: Sequence[BenchRow], axis: SweepAxis, title: str = "") -> int:
    """One line per method (gid "mse-<method>"); returns the number of lines drawn."""
    methods: List[str] = []
    for row in rows:
        if row.method.value not in methods:
            methods.append(row.method.value)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            for method in methods:
                pts = [(r.axis_value, r.mse) for r in rows if r.method.value == method and r.mse > 0.0]
                xs = [p[0] for p in pts]
                ys = [p[1] for p in pts]
                ax.plot(xs, ys, marker="o", label=method, gid=f"mse-{method}")
            ax.set_yscale("log")
            ax.set_xlabel(AXIS_LABELS[SweepAxis(axis)])
            ax.set_ylabel("MSE (rad$^2$)")
            if title:
                ax.set_title(title)
            ax.grid(True, which="both", alpha=0.3)
            ax.legend()
            with atomic_output(out_path) as tmp:
                fig.savefig(tmp, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return len(methods)
