#!/usr/bin/env python3
"""
Estimate service
================

Purpose:
- estimate: snapshot JSON -> selected estimator -> report JSON
- synth:    scenario (JSON file or flags) -> snapshot JSON carrying its scenario

Exit codes (estimate): 0 Converged, 2 Undefined, 1 Failed or any input error.
Nothing is written when the input cannot be read.
"""
from __future__ import annotations

import json
import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from typing import Any, Dict

from scripts.services.cli_config import CliConfig, CliConfigError
from scripts.services.snapshot_io import (
    SnapshotFormatError,
    load_scenario,
    load_snapshot,
    save_snapshot,
    snapshot_to_dict,
    write_json,
)
from src.modules.array_model import Scenario, SteeringModel, noise_std_for_snr, physical_degrees, synthesize
from src.modules.estimate_report import Status
from src.modules.estimators import run_estimator

EXIT_CODES = {Status.CONVERGED: 0, Status.UNDEFINED: 2, Status.FAILED: 1}


def _emit(config: CliConfig, payload: Dict[str, Any]) -> None:
    if config.output_path:
        write_json(config.output_path, payload)
    else:
        print(json.dumps(payload, indent=2))


def cmd_estimate(config: CliConfig) -> int:
    try:
        snapshot = load_snapshot(config.input_path)
        model = SteeringModel(snapshot.m)
        opts = config.estimator_options()
    except (OSError, SnapshotFormatError, ValueError) as exc:
        print(f"✗ estimate: {exc}", file=sys.stderr)
        return 1

    try:
        report = run_estimator(config.method, model, snapshot.x, opts)
    except ValueError as exc:
        print(f"✗ estimate: {config.method.value}: {exc}", file=sys.stderr)
        return 1
    payload = report.to_dict()
    payload["options"] = {"method": config.method.value, **opts.to_dict()}
    if config.degrees_physical:
        payload["doas_physical_deg"] = [physical_degrees(d) for d in report.doas]

    try:
        _emit(config, payload)
    except OSError as exc:
        print(f"✗ estimate: cannot write {config.output_path}: {exc}", file=sys.stderr)
        return 1

    mark = "✓" if report.status is Status.CONVERGED else "✗"
    doas = ", ".join(f"{d:.6f}" for d in report.doas)
    print(
        f"{mark} {report.method.value}: {report.status.value} | doas=[{doas}] | "
        f"iterations={report.iterations} | {1e3 * report.wall_time:.1f} ms",
        file=sys.stderr,
    )
    if report.message:
        print(f"  {report.message}", file=sys.stderr)
    return EXIT_CODES[report.status]


def scenario_from_config(config: CliConfig) -> Scenario:
    if config.input_path:
        scenario = load_scenario(config.input_path)
        if config.snr_db is None and config.noise_std is None:
            return scenario
        base = scenario
    else:
        if config.m is None or not config.doas:
            raise CliConfigError("synth needs --in SCENARIO.json or --m and --doas")
        amplitudes = config.amplitudes or tuple(1.0 + 0j for _ in config.doas)
        base = Scenario(m=config.m, doas=config.doas, amplitudes=amplitudes, seed=config.seed)

    noise_std = base.noise_std
    if config.noise_std is not None:
        noise_std = config.noise_std
    elif config.snr_db is not None:
        noise_std = noise_std_for_snr(base.amplitudes[0], config.snr_db)
    return Scenario(base.m, base.doas, base.amplitudes, noise_std, base.seed)


def cmd_synth(config: CliConfig) -> int:
    try:
        scenario = scenario_from_config(config)
        snapshot = synthesize(scenario)
        if config.output_path:
            save_snapshot(config.output_path, snapshot, scenario)
        else:
            print(json.dumps(snapshot_to_dict(snapshot, scenario), indent=2))
    except (OSError, SnapshotFormatError, ValueError) as exc:
        print(f"✗ synth: {exc}", file=sys.stderr)
        return 1
    print(f"✓ synth: m={scenario.m} n={scenario.n} snr={scenario.snr_db():.2f} dB seed={scenario.seed}", file=sys.stderr)
    return 0
