#!/usr/bin/env python3
"""
Snapshot I/O
============

JSON wire formats of the toolkit (angles always in electrical radians):

- Snapshot  {"m": int, "x": [[re, im], ...]} (+ "scenario" when synthesized)
- Scenario  {"m", "doas", "amplitudes": [[re, im], ...], "noise_std", "seed"}
            ("dogs" is accepted as an alias of "doas" on input)
- Report    EstimateReport.to_dict() plus the "options" used

Every file is written once, atomically (temporary file in the target directory,
then os.replace).
"""
from __future__ import annotations

import contextlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Union

from src.modules.array_model import Scenario, Snapshot
from src.modules.estimate_report import EstimateReport

PathLike = Union[str, Path]


class SnapshotFormatError(ValueError):
    pass


# ============================================================
# ATOMIC WRITES
# ============================================================

@contextlib.contextmanager
def atomic_output(path: PathLike) -> Iterator[Path]:
    """
    Yield a temporary path next to `path`; it replaces `path` only if the block succeeds.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=str(target.parent))
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, target)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def write_json(path: PathLike, payload: Dict[str, Any]) -> None:
    with atomic_output(path) as tmp:
        tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise SnapshotFormatError(f"{path}: expected a JSON object")
    return payload


# ============================================================
# CODECS
# ============================================================

def _complex_list(values, what: str):
    out = []
    for v in values:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(float(v[0]), float(v[1])))
        elif isinstance(v, (int, float)):
            out.append(complex(float(v), 0.0))
        else:
            raise SnapshotFormatError(f"{what}: expected [re, im] pairs, got {v!r}")
    return out


def snapshot_to_dict(snapshot: Snapshot, scenario: Optional[Scenario] = None) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"m": snapshot.m, "x": [[float(v.real), float(v.imag)] for v in snapshot.x]}
    if scenario is not None:
        # ground truth rides along; snapshot_from_dict ignores it
        payload["scenario"] = scenario_to_dict(scenario)
    return payload


def snapshot_from_dict(payload: Dict[str, Any]) -> Snapshot:
    if "x" not in payload:
        raise SnapshotFormatError("snapshot: missing field 'x'")
    x = _complex_list(payload["x"], "snapshot.x")
    m = int(payload.get("m", len(x)))
    if m != len(x):
        raise SnapshotFormatError(f"snapshot: m={m} but x has {len(x)} entries")
    return Snapshot(x)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    return {
        "m": scenario.m,
        "doas": [float(d) for d in scenario.doas],
        "amplitudes": [[float(s.real), float(s.imag)] for s in scenario.amplitudes],
        "noise_std": float(scenario.noise_std),
        "seed": int(scenario.seed),
    }


def scenario_from_dict(payload: Dict[str, Any]) -> Scenario:
    doas = payload.get("doas", payload.get("dogs"))
    if doas is None or "m" not in payload or "amplitudes" not in payload:
        raise SnapshotFormatError("scenario: fields 'm', 'doas' and 'amplitudes' are required")
    try:
        return Scenario(
            m=int(payload["m"]),
            doas=tuple(float(d) for d in doas),
            amplitudes=tuple(_complex_list(payload["amplitudes"], "scenario.amplitudes")),
            noise_std=float(payload.get("noise_std", 0.0)),
            seed=int(payload.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"scenario: {exc}") from exc


def load_snapshot(path: PathLike) -> Snapshot:
    return snapshot_from_dict(read_json(path))


def save_snapshot(path: PathLike, snapshot: Snapshot, scenario: Optional[Scenario] = None) -> None:
    write_json(path, snapshot_to_dict(snapshot, scenario))


def load_scenario(path: PathLike) -> Scenario:
    return scenario_from_dict(read_json(path))


def load_report(path: PathLike) -> EstimateReport:
    payload = read_json(path)
    try:
        return EstimateReport.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"{path}: not an estimate report ({exc})") from exc
