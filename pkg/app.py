#!/usr/bin/env python3
"""
Command-line front end of the DOA toolkit.

    python3 app.py synth    --m 15 --doas 0.7 --out snap.json
    python3 app.py estimate --in snap.json --method classo --n 1 --out report.json
    python3 app.py audit    --in report.json --snapshot snap.json
    python3 app.py bench    --scenario fig1 --trials 4 --seed 1 --out fig1.csv --plot fig1.svg

Angles are electrical radians on the wire (--degrees-physical adds a display copy).
DOA_THREADS caps bench workers; DOA_LOG_LEVEL (or --verbose) sets library logging.
"""

import argparse
import logging
import sys
from typing import List, Optional, Tuple

from src.modules import solver_rules as R
from src.modules.estimate_report import Method
from scripts.services.cli_config import CliConfig, CliConfigError, Subcommand
from scripts.services.estimate_service import cmd_estimate, cmd_synth
from scripts.services.bench_service import cmd_bench
from scripts.validation.audit_certificate import cmd_audit


COMMANDS = {
    Subcommand.ESTIMATE: cmd_estimate,
    Subcommand.BENCH: cmd_bench,
    Subcommand.SYNTH: cmd_synth,
    Subcommand.AUDIT: cmd_audit,
}


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _complexes(text: str) -> Tuple[complex, ...]:
    return tuple(complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doa", description="Gridless single-snapshot DOA estimation toolkit")
    ap.add_argument("subcommand", choices=[c.value for c in Subcommand])
    ap.add_argument("--in", dest="input_path", help="estimate: snapshot JSON | audit: report JSON | synth: scenario JSON")
    ap.add_argument("--out", dest="output_path", help="Output file (stdout when omitted, bench: <scenario>.csv)")
    ap.add_argument("--snapshot", dest="snapshot_path", help="audit: snapshot the report was computed from")
    ap.add_argument("--method", default=Method.CLASSO.value, choices=[m.value for m in Method])
    ap.add_argument("--n", type=int, default=1, help="Model order (number of sources)")
    ap.add_argument("--mu", type=float, default=None, help=f"classo_h step factor (default {R.DEFAULT_MU})")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--scenario", default=None, help="bench: fig1 | fig2 | fig3 | sweep JSON")
    ap.add_argument("--grid-size", type=int, default=R.DEFAULT_SPS_GRID_SIZE)
    ap.add_argument("--report-lambda-factor", type=float, default=R.DEFAULT_REPORT_LAMBDA_FACTOR)
    ap.add_argument("--stop-lambda", type=float, default=None, help="Report at this lambda instead")
    ap.add_argument("--newton-tol", type=float, default=R.NEWTON_REL_TOL)
    ap.add_argument("--newton-max-iter", type=int, default=R.NEWTON_MAX_ITER)
    ap.add_argument("--plot", dest="plot_path", default=None, help="bench: SVG plot path")
    ap.add_argument("--xlsx", dest="xlsx_path", default=None, help="bench: XLSX table path")
    ap.add_argument("--timing", action="store_true", help="bench: fill mean_wall_time_ms")
    ap.add_argument("--degrees-physical", action="store_true", help="estimate: add physical angles in degrees")
    ap.add_argument("--verbose", action="store_true")
    # synth
    ap.add_argument("--m", type=int, default=None, help="synth: sensor count")
    ap.add_argument("--doas", type=_floats, default=(), help="synth: comma-separated electrical angles")
    ap.add_argument("--amplitudes", type=_complexes, default=(), help="synth: comma-separated complex amplitudes")
    ap.add_argument("--snr", dest="snr_db", type=float, default=None, help="synth: SNR in dB")
    ap.add_argument("--noise-std", type=float, default=None)
    return ap


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, R.log_level_from_env(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    R.validate_all_rules()

    try:
        config = CliConfig(**vars(args))
    except CliConfigError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return 1
    return COMMANDS[config.subcommand](config)


if __name__ == "__main__":
    raise SystemExit(main())
