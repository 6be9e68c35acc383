"""Command-line front end.

Subcommands: check-kernel, construct, simulate, verify, report. Exit
codes: 0 success / admissible / all tests pass, 1 verification failure,
2 not admissible or construction failure, 3 indeterminate, 64 config
error. Flags can also be set through LEVYEMM_* environment variables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import pipeline
from .errors import (
    ConfigError,
    LevyEmmError,
    TruncationViolated,
    ZetaOutOfRange,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_NOT_ADMISSIBLE = 2
EXIT_INDETERMINATE = 3
EXIT_CONFIG = 64

_PROFILES = {
    # path-count caps applied on top of the scenario's own n_paths
    "smoke": 2000,
    "full": None,
}


def _env(name, cast=str):
    val = os.environ.get(name)
    return cast(val) if val is not None else None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="levyemm",
        description="EMM construction and verification for Levy-driven "
                    "moving averages",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check-kernel", "construct", "simulate", "verify", "report"):
        sp = sub.add_parser(name)
        if name != "report":
            g = sp.add_mutually_exclusive_group(required=True)
            g.add_argument("--scenario", help="scenario YAML path")
            g.add_argument("--builtin", help="named builtin scenario")
        sp.add_argument("--seed", type=int,
                        default=_env("LEVYEMM_SEED", int))
        sp.add_argument("--n-paths", type=int,
                        default=_env("LEVYEMM_N_PATHS", int))
        sp.add_argument("--out", default=_env("LEVYEMM_OUT") or "out")
        sp.add_argument("--profile", choices=sorted(_PROFILES),
                        default=_env("LEVYEMM_PROFILE") or "full")
        sp.add_argument("--workers", type=int,
                        default=_env("LEVYEMM_WORKERS", int) or 1)
    return p


def _load(args) -> pipeline.Scenario:
    if args.builtin:
        return pipeline.builtin_scenario(args.builtin)
    return pipeline.load_scenario(args.scenario)


def _effective_n(scn, args):
    n = args.n_paths if args.n_paths is not None else int(scn.sim["n_paths"])
    cap = _PROFILES[args.profile]
    return min(n, cap) if cap is not None else n


def _emit(doc: dict, out_dir: str, stem: str) -> None:
    pipeline.write_report_files(doc, out_dir, stem)
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_check_kernel(args) -> int:
    scn = _load(args)
    doc = pipeline.run_check_kernel(scn)
    _emit(doc, args.out, f"{scn.name}_check_kernel")
    status = doc["classification"]["status"]
    return {
        "admissible": EXIT_OK,
        "not-admissible": EXIT_NOT_ADMISSIBLE,
        "indeterminate": EXIT_INDETERMINATE,
    }[status]


def cmd_construct(args) -> int:
    scn = _load(args)
    try:
        doc = pipeline.run_construct(scn)
    except (TruncationViolated, ZetaOutOfRange) as exc:
        doc = {
            "schema_version": pipeline.REPORT_SCHEMA_VERSION,
            "scenario": scn.name,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        _emit(doc, args.out, f"{scn.name}_construct")
        return EXIT_NOT_ADMISSIBLE
    _emit(doc, args.out, f"{scn.name}_construct")
    if doc["validation"]["ok"]:
        return EXIT_OK
    # zeta leaving the admissible range means the drift to absorb exceeds
    # what the tail can carry: not admissible rather than a numeric failure
    if doc["validation"]["failures"]:
        return EXIT_NOT_ADMISSIBLE
    return EXIT_FAIL


def cmd_simulate(args) -> int:
    scn = _load(args)
    doc = pipeline.run_simulate(
        scn, args.out, n_paths=_effective_n(scn, args), seed=args.seed
    )
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    scn = _load(args)
    doc = pipeline.run_verify(
        scn, n_paths=_effective_n(scn, args), seed=args.seed,
        workers=args.workers,
    )
    _emit(doc, args.out, f"{scn.name}_verify")
    return EXIT_OK if doc["overall"] == "pass" else EXIT_FAIL


def cmd_report(args) -> int:
    """Summarize every *_verify.json report found under --out."""
    rows = []
    overall_ok = True
    for name in sorted(os.listdir(args.out)) if os.path.isdir(args.out) else []:
        if not name.endswith("_verify.json"):
            continue
        with open(os.path.join(args.out, name)) as fh:
            doc = json.load(fh)
        rows.append((doc["scenario"], doc["overall"],
                     len(doc.get("reports", []))))
        overall_ok = overall_ok and doc["overall"] == "pass"
    if not rows:
        print("no verification reports found in", args.out)
        return EXIT_CONFIG
    for scenario, verdict, n in rows:
        print(f"{scenario:40s} {verdict:6s} ({n} tests)")
    return EXIT_OK if overall_ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "check-kernel": cmd_check_kernel,
        "construct": cmd_construct,
        "simulate": cmd_simulate,
        "verify": cmd_verify,
        "report": cmd_report,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevyEmmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
