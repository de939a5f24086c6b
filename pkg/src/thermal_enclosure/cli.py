"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 solver or numerical failure,
4 a validation property failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ConfigurationError, EnclosureError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPERTY = 0, 2, 3, 4

COMMANDS = {
    "simulate": pipeline.simulate,
    "reconstruct": pipeline.run_reconstruction,
    "validate": pipeline.run_validation,
    "oracle": pipeline.run_oracles,
    "sweep": pipeline.sweep,
}


def build_parser():
    p = argparse.ArgumentParser(prog="thermal-enclosure",
                                description="Enclosure-method reconstruction of inclusions from boundary heat data.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run the forward heat solve and write the boundary trace",
        "reconstruct": "extract depth, support, distance or radius estimates",
        "validate": "identity, bounds, energy, layer-potential and oracle checks",
        "oracle": "quadrature oracles only (no forward solves)",
        "sweep": "indicator samples over the tau grid without extraction",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="YAML configuration file")
        s.add_argument("--out", type=Path, help="output directory (overrides config 'output')")
        s.add_argument("--workers", type=int, help="worker processes for per-tau solves")
        s.add_argument("--dim", type=int, choices=(2, 3), help="spatial dimension")
        s.add_argument("--tau-min", type=float)
        s.add_argument("--tau-ratio", type=float)
        s.add_argument("--tau-count", type=int)
        s.add_argument("--n", type=int, help="cells per axis")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args):
    ov = {}
    if args.workers is not None:
        ov["workers"] = args.workers
    if args.dim is not None:
        ov["dim"] = args.dim
    tau = {k: v for k, v in (("min", args.tau_min), ("ratio", args.tau_ratio), ("count", args.tau_count))
           if v is not None}
    if tau:
        ov["tau"] = tau
    if args.n is not None:
        ov["grid"] = {"n": args.n}
    return ov


def _setup_logging(out, verbose):
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    root.addHandler(console)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out / "run.log", mode="w")
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(fh)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output)
    _setup_logging(out, args.verbose)
    log = logging.getLogger("thermal_enclosure.cli")
    log.info("%s: config hash %s, output %s", args.command, pipeline.config_hash(cfg), out)
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnclosureError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    log.info("finished in %.2f s", time.perf_counter() - t0)
    for msg in summary.messages:
        log.info(msg)
    for err in summary.errors:
        log.error("stage %s: %s: %s", err["stage"], err["type"], err["message"])
    _print_summary(summary)
    if any(e["type"] == "ConfigurationError" for e in summary.errors):
        return EXIT_CONFIG
    if summary.errors:
        return EXIT_SOLVER
    if not summary.passed:
        return EXIT_PROPERTY
    return EXIT_OK


def _print_summary(summary):
    for e in summary.extractions:
        if "estimate" in e:
            truth = e.get("truth")
            extra = f" (truth {truth:.4f}, error {e['error']:+.4f})" if truth is not None else ""
            print(f"{e['label']}: {e['quantity']} = {e['estimate']:.4f}{extra}, sign {e['sign']:+d}, {e['status']}")
        else:
            print(f"{e['label']}: {e['status']}")
    if "support_fit" in summary.reports:
        print("support fit:", json.dumps(summary.reports["support_fit"]))
    for name, ok in summary.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    for msg in summary.messages:
        print(msg)


if __name__ == "__main__":
    sys.exit(main())
