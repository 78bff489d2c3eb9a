#!/usr/bin/env python3
"""
Bench service
=============

Purpose:
- Resolve a sweep (builtin fig1/fig2/fig3 or a sweep JSON file)
- Run it through bench_harness.run_sweep (DOA_THREADS workers)
- Export CSV (always), SVG (--plot) and XLSX (--xlsx)

Sweep JSON:
    {"name": str, "base": <scenario>, "axis": "SNR_dB" | "separation",
     "values": [...], "trials": int, "methods": [...], "master_seed": int, "mu": float}
"""
from __future__ import annotations

import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from dataclasses import replace
from pathlib import Path
from typing import Any, Dict

from reports.exports.bench_exports import rows_to_records, write_csv, write_svg, write_xlsx
from scripts.services.cli_config import CliConfig
from scripts.services.snapshot_io import SnapshotFormatError, read_json, scenario_from_dict
from src.modules import solver_rules as R
from src.modules.bench_harness import SweepSpec, builtin_scenarios, run_sweep


class BenchServiceError(RuntimeError):
    pass


def sweep_from_dict(payload: Dict[str, Any]) -> SweepSpec:
    try:
        return SweepSpec(
            name=str(payload.get("name", "sweep")),
            base=scenario_from_dict(payload["base"]),
            axis=payload["axis"],
            values=tuple(float(v) for v in payload["values"]),
            trials=int(payload.get("trials", R.BENCH_TRIALS)),
            methods=tuple(payload["methods"]),
            master_seed=int(payload.get("master_seed", 0)),
            mu=float(payload.get("mu", R.DEFAULT_MU)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"sweep spec: {exc}") from exc


def resolve_sweep(config: CliConfig) -> SweepSpec:
    builtins = builtin_scenarios(master_seed=config.seed)
    if config.scenario in builtins:
        spec = builtins[config.scenario]
    elif os.path.isfile(config.scenario):
        spec = sweep_from_dict(read_json(config.scenario))
        spec = replace(spec, master_seed=config.seed or spec.master_seed)
    else:
        raise BenchServiceError(
            f"Unknown scenario {config.scenario!r}: expected one of {sorted(builtins)} or a sweep JSON file"
        )

    overrides: Dict[str, Any] = {
        "grid_size": config.grid_size,
        "report_lambda_factor": config.report_lambda_factor,
    }
    if config.trials is not None:
        overrides["trials"] = config.trials
    if config.mu is not None:
        overrides["mu"] = config.mu
    return replace(spec, **overrides)


def cmd_bench(config: CliConfig) -> int:
    try:
        spec = resolve_sweep(config)
    except (OSError, SnapshotFormatError, BenchServiceError, ValueError) as exc:
        print(f"✗ bench: {exc}", file=sys.stderr)
        return 1

    out = Path(config.output_path or f"{spec.name}.csv")
    print(
        f"bench {spec.name}: {len(spec.values)} {spec.axis.value} values x {spec.trials} trials | "
        f"methods={[m.value for m in spec.methods]} | workers={R.threads_from_env()}",
        file=sys.stderr,
    )
    rows = run_sweep(spec)

    try:
        write_csv(out, rows, spec.axis, timing=config.timing)
        print(f"✓ {out} ({len(rows)} rows)", file=sys.stderr)
        if config.plot_path:
            lines = write_svg(Path(config.plot_path), rows, spec.axis, title=spec.name)
            print(f"✓ {config.plot_path} ({lines} lines)", file=sys.stderr)
        if config.xlsx_path:
            write_xlsx(Path(config.xlsx_path), spec.name, rows_to_records(rows, timing=config.timing))
            print(f"✓ {config.xlsx_path}", file=sys.stderr)
    except OSError as exc:
        print(f"✗ bench: {exc}", file=sys.stderr)
        return 1
    return 0
