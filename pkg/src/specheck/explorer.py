"""Reproducible randomized verification campaigns.

A campaign sweeps cells ``(n, r, t)`` and runs ``trials`` random cases per
cell.  Every trial draws its matrices from its own seed, derived from the
master seed, the cell index and the trial index, so results do not depend on
the order in which cells are executed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .errors import InvalidInput, NumericalFailure, SpecheckError
from .hiprec import MAX_N as HP_MAX_N
from .hiprec import hp_min_margin
from .inequalities import CASE_CHECKS, REL_TOL, InequalityCase, is_proven
from .linalg import (
    PsdMatrix,
    as_matrix,
    eigh,
    matrix_from_json,
    matrix_to_json,
    random_complex,
    random_psd,
)

FAMILIES = ("generic", "diagonal", "rank_deficient", "near_commuting")
NEAR_COMMUTING_EPS = (1e-3, 1e-1)
USES_R = {"zhan", "zhan_norm"}
USES_T = {"zhan", "zhan_norm", "prop4", "mean_comparison", "corollary2"}
EVIDENCE_NOTE = (
    "Cells marked proven=false lie outside the region where the inequality is "
    "established; an absence of violations there is numerical evidence only."
)


def default_t_grid() -> list[float]:
    return [-1.9, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]


@dataclass
class CampaignSpec:
    check: str = "zhan"
    dims: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    r_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 1.5])
    t_grid: list[float] = field(default_factory=default_t_grid)
    trials: int = 200
    families: list[str] = field(default_factory=lambda: list(FAMILIES))
    seed: int = 0
    rel_tol: float = REL_TOL
    recheck: bool = True
    allow_unproven: bool = False

    def validate(self) -> None:
        if self.check not in CASE_CHECKS:
            raise InvalidInput(f"unknown check {self.check!r}")
        if self.trials < 0:
            raise InvalidInput("trials must be non-negative")
        if any(int(n) != n or n < 1 for n in self.dims):
            raise InvalidInput("dimensions must be positive integers")
        if not self.families or any(f not in FAMILIES for f in self.families):
            raise InvalidInput(f"families must be drawn from {FAMILIES}")
        for t in self.t_grid:
            if not math.isfinite(t) or t <= -2.0:
                raise InvalidInput("t must exceed -2")
            if t > 2.0:
                raise InvalidInput("t must be at most 2")
        for r in self.r_grid:
            lo, hi = (0.5, 1.5) if self.check == "zhan_norm" and not self.allow_unproven else (0.0, 2.0)
            if not (math.isfinite(r) and lo <= r <= hi):
                raise InvalidInput(f"r must lie in [{lo:g}, {hi:g}]")
        if not self.rel_tol > 0:
            raise InvalidInput("rel_tol must be positive")

    def cells(self) -> list[tuple[int, float | None, float | None]]:
        rs = self.r_grid if self.check in USES_R else [None]
        ts = self.t_grid if self.check in USES_T else [None]
        if not rs or not ts:
            return []
        return [(int(n), r, t) for n in self.dims for r in rs for t in ts]

    def to_json(self) -> dict:
        return {
            "check": self.check, "dims": [int(n) for n in self.dims],
            "r_grid": [float(r) for r in self.r_grid], "t_grid": [float(t) for t in self.t_grid],
            "trials": int(self.trials), "families": list(self.families), "seed": int(self.seed),
            "rel_tol": float(self.rel_tol), "recheck": bool(self.recheck),
            "allow_unproven": bool(self.allow_unproven),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CampaignSpec":
        known = cls().to_json().keys()
        extra = set(obj) - set(known)
        if extra:
            raise InvalidInput(f"unknown campaign fields: {sorted(extra)}")
        return cls(**obj)


def trial_seed(master: int, cell: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(cell), int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_case(n: int, family: str, seed: int) -> tuple[PsdMatrix, PsdMatrix, np.ndarray]:
    """Matrices ``(A, B, X)`` for one trial of ``family``."""
    rng = np.random.default_rng(seed)
    if family == "generic":
        a = random_psd(n, "uniform", rng)
        b = random_psd(n, "lognormal" if rng.random() < 0.5 else "uniform", rng)
    elif family == "diagonal":
        a = PsdMatrix.from_array(np.diag(rng.uniform(0.0, 2.0, n)))
        b = PsdMatrix.from_array(np.diag(rng.uniform(0.0, 2.0, n)))
    elif family == "rank_deficient":
        spectra = []
        for _ in range(2):
            lam = rng.uniform(0.0, 2.0, n)
            zeros = int(rng.integers(1, max(n, 2)))
            lam[rng.permutation(n)[:zeros]] = 0.0
            spectra.append(lam)
        a = random_psd(n, spectra[0], rng)
        b = random_psd(n, spectra[1], rng)
    elif family == "near_commuting":
        eps = NEAR_COMMUTING_EPS[int(rng.integers(len(NEAR_COMMUTING_EPS)))]
        a = random_psd(n, "uniform", rng)
        e = random_psd(n, "uniform", rng).data
        e = e / max(np.linalg.norm(e, 2), 1e-300)
        b = PsdMatrix.from_array(a.data + eps * e)
    else:
        raise InvalidInput(f"unknown matrix family {family!r}")
    return a, b, random_complex(n, rng)


def _digest(*mats) -> str:
    h = hashlib.sha256()
    for m in mats:
        h.update(np.ascontiguousarray(np.asarray(m, dtype=np.complex128)).tobytes())
    return h.hexdigest()[:16]


@dataclass
class Violation:
    check: str
    n: int
    r: float | None
    t: float | None
    family: str
    seed: int | None
    A: np.ndarray
    B: np.ndarray
    X: np.ndarray | None
    margins: list[float]
    tol: float
    status: str = "unchecked"
    hp_margin: float | None = None
    shrink: str | None = None

    @property
    def min_margin(self) -> float:
        return float(min(self.margins))

    def case(self) -> InequalityCase:
        return InequalityCase(self.A, self.B, 1.0 if self.r is None else self.r,
                              0.0 if self.t is None else self.t, self.X)

    def to_json(self) -> dict:
        return {
            "check": self.check, "n": self.n, "r": self.r, "t": self.t, "family": self.family,
            "seed": self.seed, "A": matrix_to_json(self.A), "B": matrix_to_json(self.B),
            "X": None if self.X is None else matrix_to_json(self.X),
            "margins": [float(m) for m in self.margins], "tol": float(self.tol),
            "status": self.status, "hp_margin": self.hp_margin, "shrink": self.shrink,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Violation":
        obj = dict(obj)
        for key in ("A", "B"):
            obj[key] = matrix_from_json(obj[key])
        obj["X"] = None if obj.get("X") is None else matrix_from_json(obj["X"])
        return cls(**obj)


@dataclass
class CampaignReport:
    check: str
    cells: list[dict]
    violations: list[Violation]
    seed: int | None
    spec: dict | None
    wall_time: float = 0.0
    version: str = __version__

    @property
    def total_trials(self) -> int:
        return sum(c["trials"] for c in self.cells)

    @property
    def confirmed(self) -> list[Violation]:
        return [v for v in self.violations if v.status == "confirmed"]

    def to_json(self, include_wall_time: bool = True) -> dict:
        out = {
            "check": self.check, "seed": self.seed, "spec": self.spec, "version": self.version,
            "cells": self.cells, "violations": [v.to_json() for v in self.violations],
            "evidence_only": any(not c["proven"] for c in self.cells),
            "note": EVIDENCE_NOTE,
        }
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out

    def dumps(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_json(include_wall_time), sort_keys=True, indent=2)

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps(include_wall_time=False).encode()).hexdigest()

    @classmethod
    def from_json(cls, obj: dict) -> "CampaignReport":
        try:
            return cls(
                check=obj["check"], cells=list(obj["cells"]),
                violations=[Violation.from_json(v) for v in obj["violations"]],
                seed=obj.get("seed"), spec=obj.get("spec"),
                wall_time=float(obj.get("wall_time", 0.0)), version=obj.get("version", __version__),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInput("malformed campaign report") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "n", "r", "t", "trials", "min_margin", "violations"])
        for c in self.cells:
            w.writerow([self.check, c["n"], _fmt(c["r"]), _fmt(c["t"]), c["trials"],
                        _fmt(c["min_margin"]), c["violations"]])
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _recheck(check, a, b, r, t, x, rel_tol) -> tuple[str, float | None]:
    if a.shape[0] > HP_MAX_N:
        return "unconfirmed", None
    margin, violated = hp_min_margin(check, a, b, r, t, x, rel_tol=rel_tol)
    return ("confirmed" if violated else "refuted"), margin


def _run_cell(spec: CampaignSpec, index: int, n: int, r, t) -> tuple[dict, list[Violation]]:
    check = CASE_CHECKS[spec.check]
    cell = {
        "n": n, "r": r, "t": t, "trials": 0, "failures": 0, "refuted": 0, "violations": 0,
        "min_margin": None, "min_rel_margin": None, "argmin_seed": None, "argmin_digest": None,
        "proven": is_proven(r, t) if spec.check == "zhan" else (
            r is None or 0.5 <= r <= 1.5),
        "overlapping": False,
    }
    found = []
    kw = {"allow_unproven": spec.allow_unproven} if spec.check == "zhan_norm" else {}
    for trial in range(spec.trials):
        family = spec.families[trial % len(spec.families)]
        seed = trial_seed(spec.seed, index, trial)
        try:
            a, b, x = draw_case(n, family, seed)
            case = InequalityCase(a, b, 1.0 if r is None else r, 0.0 if t is None else t, x)
            records = check(case, rel_tol=spec.rel_tol, seed=seed, **kw)
        except (NumericalFailure, InvalidInput):
            cell["failures"] += 1
            continue
        cell["trials"] += 1
        rel = min(rec.min_margin / rec.tol for rec in records)
        if cell["min_rel_margin"] is None or rel < cell["min_rel_margin"]:
            cell["min_rel_margin"] = rel
            cell["min_margin"] = min(rec.min_margin for rec in records)
            cell["argmin_seed"] = seed
            cell["argmin_digest"] = _digest(a.data, b.data, x)
        if all(rec.passed for rec in records):
            continue
        status, hp = ("unchecked", None)
        if spec.recheck:
            status, hp = _recheck(spec.check, a.data, b.data, r, t, x, spec.rel_tol)
        if status == "refuted":
            cell["refuted"] += 1
            continue
        worst = min(records, key=lambda rec: rec.min_margin / rec.tol)
        cell["violations"] += 1
        found.append(Violation(spec.check, n, r, t, family, seed, a.data.copy(), b.data.copy(),
                               x if spec.check == "zhan_norm" else None,
                               [float(m) for m in worst.margins], worst.tol, status, hp))
    return cell, found


def _workers() -> int:
    raw = os.environ.get("SPECHECK_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        return 1
    return (os.cpu_count() or 1) if k == 0 else max(1, k)


def run_campaign(spec: CampaignSpec, workers: int | None = None) -> CampaignReport:
    """Run every cell of ``spec`` and fold the results in cell order."""
    spec.validate()
    start = time.perf_counter()
    cells = spec.cells()
    jobs = [(spec, i, n, r, t) for i, (n, r, t) in enumerate(cells)]
    workers = _workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_cell(*job), jobs))
    else:
        results = [_run_cell(*job) for job in jobs]
    out_cells = [c for c, _ in results]
    violations = [v for _, vs in results for v in vs]
    return CampaignReport(spec.check, out_cells, violations, spec.seed, spec.to_json(),
                          wall_time=time.perf_counter() - start)


def _cell_key(c: dict):
    return (c["n"], c["r"], c["t"])


def aggregate_report(reports: list[CampaignReport]) -> CampaignReport:
    """Merge reports of the same check; shared cells are summed and flagged ``overlapping``."""
    if not reports:
        raise InvalidInput("nothing to aggregate")
    check = reports[0].check
    if any(rep.check != check for rep in reports):
        raise InvalidInput("cannot aggregate reports of different checks")
    if len(reports) == 1:
        return reports[0]
    merged: dict = {}
    for rep in reports:
        for c in rep.cells:
            key = _cell_key(c)
            if key not in merged:
                merged[key] = dict(c)
                continue
            m = merged[key]
            m["overlapping"] = True
            for field_ in ("trials", "failures", "refuted", "violations"):
                m[field_] += c[field_]
            if c["min_rel_margin"] is not None and (
                    m["min_rel_margin"] is None or c["min_rel_margin"] < m["min_rel_margin"]):
                for field_ in ("min_rel_margin", "min_margin", "argmin_seed", "argmin_digest"):
                    m[field_] = c[field_]
    seen = set()
    violations = []
    for rep in reports:
        for v in rep.violations:
            key = (v.seed, v.n, v.r, v.t)
            if key not in seen:
                seen.add(key)
                violations.append(v)
    seeds = {rep.seed for rep in reports}
    specs = [rep.spec for rep in reports]
    return CampaignReport(
        check, list(merged.values()), violations,
        seeds.pop() if len(seeds) == 1 else None,
        specs[0] if all(s == specs[0] for s in specs) else {"check": check, "merged": len(reports)},
        wall_time=sum(rep.wall_time for rep in reports),
    )


def _violates(check: str, case: InequalityCase, rel_tol: float, allow_unproven: bool) -> bool:
    kw = {"allow_unproven": allow_unproven} if check == "zhan_norm" else {}
    try:
        return not all(rec.passed for rec in CASE_CHECKS[check](case, rel_tol=rel_tol, **kw))
    except SpecheckError:
        return False


def _snap_candidates(x: float, lo: float, hi: float, lo_open: bool) -> list[float]:
    out = []
    for c in (round(x), round(2 * x) / 2, round(10 * x) / 10):
        c = float(c)
        legal = (c > lo if lo_open else c >= lo) and c <= hi
        if legal and abs(c - x) > 1e-12 and c not in out:
            out.append(c)
    return out


def shrink_counterexample(v: Violation, predicate=None, rel_tol: float = REL_TOL,
                          max_rounds: int = 20) -> Violation:
    """Reduce a violating case while ``predicate(case)`` keeps holding.

    Passes, repeated until nothing changes: delete one index in A's eigenframe
    (principal submatrices of both matrices), round eigenvalues to few
    decimals, snap ``t`` and ``r`` to simple fractions.  Without a predicate
    the case must keep failing its own check.
    """
    if predicate is None:
        allow = v.r is not None and not 0.5 <= v.r <= 1.5

        def predicate(case):
            return _violates(v.check, case, rel_tol, allow)

    a, b = as_matrix(v.A), as_matrix(v.B)
    x = None if v.X is None else as_matrix(v.X)
    r, t = v.r, v.t

    def make(a_, b_, r_, t_, x_):
        return InequalityCase(a_, b_, 1.0 if r_ is None else r_, 0.0 if t_ is None else t_, x_)

    def holds(a_, b_, r_, t_, x_):
        try:
            return bool(predicate(make(a_, b_, r_, t_, x_)))
        except SpecheckError:
            return False

    if not holds(a, b, r, t, x):
        return replace(v, shrink="noop")

    if np.count_nonzero(a - np.diag(np.diagonal(a))):
        spec = eigh(a)
        q = spec.frame
        rot_a = np.diag(spec.values).astype(np.complex128)
        rot_b = q.conj().T @ b @ q
        rot_b = (rot_b + rot_b.conj().T) / 2
        rot_x = None if x is None else q.conj().T @ x @ q
        if holds(rot_a, rot_b, r, t, rot_x):
            a, b, x = rot_a, rot_b, rot_x

    for _ in range(max_rounds):
        changed = False
        # Dimension reduction.
        i = 0
        while a.shape[0] > 1 and i < a.shape[0]:
            keep = [k for k in range(a.shape[0]) if k != i]
            sa, sb = a[np.ix_(keep, keep)], b[np.ix_(keep, keep)]
            sx = None if x is None else x[np.ix_(keep, keep)]
            if holds(sa, sb, r, t, sx):
                a, b, x = sa, sb, sx
                changed = True
                i = 0
            else:
                i += 1
        # Spectrum rounding.
        for which in ("A", "B"):
            m = a if which == "A" else b
            diagonal = not np.count_nonzero(m - np.diag(np.diagonal(m)))
            if diagonal:
                vals, frame = np.diagonal(m).real, None
            else:
                s = eigh(m)
                vals, frame = s.values, s.frame
            for digits in (0, 1, 2):
                rounded = np.maximum(np.round(vals, digits), 0.0)
                if np.max(np.abs(rounded - vals)) <= 1e-12:
                    break
                if frame is None:
                    cand = np.diag(rounded).astype(np.complex128)
                else:
                    cand = (frame * rounded) @ frame.conj().T
                    cand = (cand + cand.conj().T) / 2
                trial = (cand, b) if which == "A" else (a, cand)
                if holds(*trial, r, t, x):
                    a, b = trial
                    changed = True
                    break
        # Parameter snapping.
        if t is not None:
            for c in _snap_candidates(t, -2.0, 2.0, lo_open=True):
                if holds(a, b, r, c, x):
                    t, changed = c, True
                    break
        if r is not None:
            for c in _snap_candidates(r, 0.0, 2.0, lo_open=False):
                if holds(a, b, c, t, x):
                    r, changed = c, True
                    break
        if not changed:
            break

    case = make(a, b, r, t, x)
    kw = {"allow_unproven": True} if v.check == "zhan_norm" else {}
    records = CASE_CHECKS[v.check](case, rel_tol=rel_tol, **kw)
    worst = min(records, key=lambda rec: rec.min_margin / rec.tol)
    return replace(v, n=a.shape[0], r=r, t=t, A=a, B=b, X=x,
                   margins=[float(m) for m in worst.margins], tol=worst.tol, shrink="shrunk")
