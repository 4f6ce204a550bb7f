"""Command-line front end.

Exit codes: 0 when everything passes, 1 when a violation survives the
re-check, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SpecheckError
from .explorer import (
    FAMILIES,
    CampaignReport,
    CampaignSpec,
    _recheck,
    aggregate_report,
    default_t_grid,
    draw_case,
    run_campaign,
    trial_seed,
)
from .inequalities import CASE_CHECKS, InequalityCase, VerificationRecord
from .pencil import HermitianPencil, track_branches


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive within 1e-12), a comma list, or one value."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if not step > 0 or not all(math.isfinite(p) for p in parts):
                raise UsageError(f"bad grid step in {text!r}")
            count = int(math.floor((stop - start) / step + 1e-12)) + 1
            return [start + i * step for i in range(max(count, 0))]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None


def _dims(text: str) -> list[int]:
    values = parse_grid(text)
    if any(v != int(v) or v < 1 for v in values):
        raise UsageError(f"dimensions must be positive integers: {text!r}")
    return [int(v) for v in values]


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_dir_ok(path: str) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc.msg}") from None


def _check_t_values(ts, upper=2.0) -> None:
    for t in ts:
        if not math.isfinite(t) or t <= -2.0:
            raise UsageError("t must exceed -2")
        if upper is not None and t > upper:
            raise UsageError(f"t must be at most {upper:g}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_verify(args) -> int:
    _check_t_values([args.t])
    if not 0.0 <= args.r <= 2.0:
        raise UsageError("r must lie in [0, 2]")
    if args.n < 1 or args.trials < 0:
        raise UsageError("n must be positive and trials non-negative")
    _out_dir_ok(args.out)
    families = args.family or list(FAMILIES)
    check = CASE_CHECKS[args.check]
    kw = {"allow_unproven": args.allow_unproven} if args.check == "zhan_norm" else {}
    records = []
    survived = 0
    for i in range(args.trials):
        seed = trial_seed(args.seed, 0, i)
        a, b, x = draw_case(args.n, families[i % len(families)], seed)
        case = InequalityCase(a, b, args.r, args.t, x)
        recs = check(case, rel_tol=args.rel_tol, seed=seed, **kw)
        if not all(rec.passed for rec in recs):
            status, _ = _recheck(args.check, a.data, b.data, args.r, args.t, x, args.rel_tol)
            survived += status != "refuted"
        records.extend(rec.to_json() for rec in recs)
    atomic_write(args.out, _dumps(records))
    return 1 if survived else 0


def cmd_scan(args) -> int:
    t_grid = args.t_grid if args.t_grid is not None else default_t_grid()
    _check_t_values(t_grid)
    for path in (args.out, args.csv):
        if path:
            _out_dir_ok(path)
    spec = CampaignSpec(
        check=args.check, dims=args.n_range, r_grid=args.r_grid, t_grid=t_grid,
        trials=args.trials, families=args.family or list(FAMILIES), seed=args.seed,
        rel_tol=args.rel_tol, recheck=not args.no_recheck, allow_unproven=args.allow_unproven,
    )
    report = run_campaign(spec)
    atomic_write(args.out, report.dumps() + "\n")
    if args.csv:
        atomic_write(args.csv, report.to_csv())
    return 1 if any(v.status != "refuted" for v in report.violations) else 0


def cmd_track(args) -> int:
    if args.steps < 1:
        raise UsageError("steps must be at least 1")
    if not args.t_max > args.t_min:
        raise UsageError("t-max must exceed t-min")
    _out_dir_ok(args.out)
    pencil = HermitianPencil.from_json(_load_json(args.pencil))
    grid = np.linspace(args.t_min, args.t_max, args.steps + 1)
    branches = track_branches(pencil, grid, gap_tol=args.gap_tol)
    atomic_write(args.out, branches.to_csv())
    return 0


RECORD_COLUMNS = ["check", "n", "r", "t", "k", "pass", "proven", "tol", "seed", "lhs", "rhs", "margins"]


def records_to_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for rec in records:
        row = []
        for col in RECORD_COLUMNS:
            v = rec.get(col)
            if isinstance(v, list):
                row.append(";".join(repr(float(x)) for x in v))
            elif isinstance(v, bool):
                row.append("true" if v else "false")
            elif isinstance(v, float):
                row.append(repr(v))
            else:
                row.append("" if v is None else str(v))
        w.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> list[dict]:
    """Inverse of :func:`records_to_csv`."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec: dict = {"check": row["check"], "n": int(row["n"])}
        for col in ("r", "t", "tol"):
            rec[col] = float(row[col]) if row[col] else None
        for col in ("k", "seed"):
            rec[col] = int(row[col]) if row[col] else None
        for col in ("pass", "proven"):
            rec[col] = row[col] == "true"
        for col in ("lhs", "rhs", "margins"):
            rec[col] = [float(x) for x in row[col].split(";")] if row[col] else []
        out.append(rec)
    return out


def cmd_report(args) -> int:
    _out_dir_ok(args.to)
    loaded = [_load_json(p) for p in args.sources]
    if all(isinstance(obj, dict) and "cells" in obj for obj in loaded):
        report = aggregate_report([CampaignReport.from_json(obj) for obj in loaded])
        text = report.to_csv() if args.to.endswith(".csv") else report.dumps() + "\n"
    elif all(isinstance(obj, list) for obj in loaded):
        records = [rec for obj in loaded for rec in obj]
        try:
            records = [VerificationRecord.from_json(r).to_json() for r in records]
        except (KeyError, TypeError, ValueError):
            raise UsageError("malformed verification records") from None
        text = records_to_csv(records) if args.to.endswith(".csv") else _dumps(records)
    else:
        raise UsageError("inputs must all be campaign reports or all be record lists")
    atomic_write(args.to, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specheck", description="Verify singular-value inequalities for matrix means.")
    p.add_argument("--version", action="version", version=f"specheck {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    checks = sorted(CASE_CHECKS)

    v = sub.add_parser("verify", help="run one (n, r, t) case over random trials")
    v.add_argument("--check", choices=checks, default="zhan")
    v.add_argument("--n", type=int, default=4)
    v.add_argument("--r", type=float, default=1.0)
    v.add_argument("--t", type=float, default=0.0)
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--family", choices=FAMILIES, action="append")
    v.add_argument("--rel-tol", type=float, default=1e-9)
    v.add_argument("--allow-unproven", action="store_true")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="randomized campaign over an (n, r, t) grid")
    s.add_argument("--check", choices=checks, default="zhan")
    s.add_argument("--n-range", type=_dims, default=[2, 3, 4, 5, 6])
    s.add_argument("--r-grid", type=parse_grid, default=[0.5, 1.0, 1.5])
    s.add_argument("--t-grid", type=parse_grid, default=None)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--family", choices=FAMILIES, action="append")
    s.add_argument("--rel-tol", type=float, default=1e-9)
    s.add_argument("--no-recheck", action="store_true")
    s.add_argument("--allow-unproven", action="store_true")
    s.add_argument("--out", required=True)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_scan)

    t = sub.add_parser("track", help="track eigenvalue branches of a pencil")
    t.add_argument("--pencil", required=True)
    t.add_argument("--t-min", type=float, required=True)
    t.add_argument("--t-max", type=float, required=True)
    t.add_argument("--steps", type=int, default=200)
    t.add_argument("--gap-tol", type=float, default=None)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_track)

    r = sub.add_parser("report", help="convert or merge records and reports")
    r.add_argument("--from", dest="sources", nargs="+", required=True)
    r.add_argument("--to", required=True)
    r.set_defaults(func=cmd_report)
    return p


VALUE_FLAGS = {"--t", "--r", "--t-grid", "--r-grid", "--n-range", "--t-min", "--t-max"}


def _join_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--t-grid -3:2:0.5`` into ``--t-grid=-3:2:0.5`` so argparse keeps the value."""
    out = []
    i = 0
    while i < len(argv):
        if argv[i] in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        return args.func(args)
    except (UsageError, SpecheckError) as exc:
        print(f"specheck: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
