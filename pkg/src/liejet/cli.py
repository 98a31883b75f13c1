"""Batch front end: run identity verifications from scenario files.

    liejet run CONFIG [--out DIR] [--only ID,ID] [--tol-abs X] [--tol-rel X]
                      [--jobs N] [--fd-oracle]
    liejet generate --seed S --count N --profile P --out FILE [--m M]

Exit codes: 0 all identities pass, 1 any identity failed, 2 configuration
error.  Reports land in the output directory (flag ``--out`` or env var
``LIEJET_OUT_DIR``, default ``./liejet-reports``): one
``report_<identity>.json`` per exercised identity, a ``summary.csv`` with
one row per (scenario, identity), and ``metadata.json``.  Only
``metadata.json`` carries timestamps, so reruns with the same config and
seed are byte-identical on the report files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from ._kernels import current_backend
from .calculus import IDENTITY_IDS, IdentityReport
from .errors import ConfigError, LieJetError
from .scenarios import RunOptions, load_config, run_scenario, save_config, generate

REPORT_SCHEMA = "liejet-report/1"


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="liejet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run identity verifiers from a scenario file")
    run_p.add_argument("config", help="scenario JSON file")
    run_p.add_argument("--out", default=None, help="output directory (or $LIEJET_OUT_DIR)")
    run_p.add_argument("--only", default=None, help="comma-separated identity ids to run")
    run_p.add_argument("--tol-abs", type=float, default=None, help="override absolute tolerance")
    run_p.add_argument("--tol-rel", type=float, default=None, help="override relative tolerance")
    run_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="parallel scenario workers")
    run_p.add_argument("--fd-oracle", action="store_true",
                       help="add the finite-difference oracle route to first-order identities")

    gen_p = sub.add_parser("generate", help="write a seeded scenario file")
    gen_p.add_argument("--seed", type=int, required=True)
    gen_p.add_argument("--count", type=int, required=True)
    gen_p.add_argument("--profile", required=True,
                       help="poly | trig | mixed | flow | higher-order-k2 | higher-order-k3")
    gen_p.add_argument("--out", required=True, help="output scenario file")
    gen_p.add_argument("--m", type=int, default=None, help="fix the base dimension")

    return parser.parse_args(argv)


def _run_worker(payload):
    """Top-level so the process pool can pickle it."""
    from .scenarios import scenario_from_dict

    sc_dict, opts_dict = payload
    sc = scenario_from_dict(sc_dict)
    opts = RunOptions.from_dict(opts_dict)
    return [r.to_dict() for r in run_scenario(sc, opts)]


def execute_config(scenarios, opts: RunOptions, jobs: int = 1) -> list[dict]:
    """Run scenarios (possibly in parallel); reports sorted by (id, identity)."""
    payloads = [(sc.to_dict(), opts.to_dict()) for sc in scenarios]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_worker, payloads))
    else:
        chunks = [_run_worker(p) for p in payloads]
    reports = [r for chunk in chunks for r in chunk]
    reports.sort(key=lambda r: (r["scenario_id"], r["identity"], r["t0"]))
    return reports


def write_reports(reports: list[dict], out_dir: Path, provenance: dict) -> bool:
    out_dir.mkdir(parents=True, exist_ok=True)
    identities = sorted({r["identity"] for r in reports})
    all_passed = all(r["passed"] for r in reports)
    for identity in identities:
        rows = [r for r in reports if r["identity"] == identity]
        doc = {
            "schema": REPORT_SCHEMA,
            "tool_version": __version__,
            "identity": identity,
            "provenance": provenance,
            "passed": all(r["passed"] for r in rows),
            "scenarios": rows,
        }
        with open(out_dir / f"report_{identity}.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IdentityReport.CSV_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r["scenario_id"],
                    r["identity"],
                    repr(r["max_abs_err"]),
                    repr(r["max_rel_err"]),
                    repr(r["coverage"]),
                    str(r["passed"]).lower(),
                ]
            )
    return all_passed


def _cmd_run(args) -> int:
    try:
        scenarios = load_config(args.config)
        only = None
        if args.only:
            only = tuple(s.strip() for s in args.only.split(",") if s.strip())
            for ident in only:
                if ident not in IDENTITY_IDS:
                    raise ConfigError(f"--only: unknown identity {ident!r}")
        opts = RunOptions(
            only=only,
            tol_abs=args.tol_abs,
            tol_rel=args.tol_rel,
            fd_oracle=args.fd_oracle,
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out or os.environ.get("LIEJET_OUT_DIR", "liejet-reports"))
    started = time.perf_counter()
    try:
        reports = execute_config(scenarios, opts, jobs=max(1, args.jobs))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except LieJetError as exc:
        print(f"verification aborted: {exc}", file=sys.stderr)
        return 2
    provenance = {
        "config": os.path.basename(args.config),
        "options": opts.to_dict(),
        "kernel_backend": current_backend(),
    }
    all_passed = write_reports(reports, out_dir, provenance)
    metadata = {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "duration_s": time.perf_counter() - started,
        "jobs": args.jobs,
        "report_files": sorted({f"report_{r['identity']}.json" for r in reports}),
    }
    with open(out_dir / "metadata.json", "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_fail = sum(1 for r in reports if not r["passed"])
    print(f"{len(reports)} reports, {n_fail} failing; output in {out_dir}")
    return 0 if all_passed else 1


def _cmd_generate(args) -> int:
    try:
        config = generate(args.seed, args.count, args.profile, m=args.m)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    save_config(config, args.out)
    print(f"wrote {len(config['scenarios'])} scenarios to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_generate(args)


if __name__ == "__main__":
    raise SystemExit(main())
