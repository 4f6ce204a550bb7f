"""Verifiers for singular-value inequalities between matrix means.

Each verifier returns :class:`VerificationRecord` objects holding the per-index
left- and right-hand sides.  A record passes when every margin ``rhs - lhs``
is at least ``-tol`` with ``tol = rel_tol * max(1, max(rhs))``.

When a margin lands in ``[-tol, 0)`` the whole evaluation is repeated with the
Jacobi threshold tightened to ``JACOBI_TOL_TIGHT`` and the tighter values are
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateSpectrum, InvalidInput
from .linalg import (
    JACOBI_TOL,
    JACOBI_TOL_TIGHT,
    PsdMatrix,
    Spectrum,
    as_matrix,
    eigh,
    psd_power,
    singular_values,
)
from .pencil import HermitianPencil, eigen_derivative_simple, track_branches

REL_TOL = 1e-9
PROVEN_R = (0.5, 1.0, 1.5)


@dataclass
class VerificationRecord:
    check: str
    n: int
    lhs: np.ndarray
    rhs: np.ndarray
    margins: np.ndarray
    passed: bool
    tol: float
    r: float | None = None
    t: float | None = None
    k: int | None = None
    proven: bool = True
    seed: int | None = None
    rechecked: bool = False

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins))

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "n": self.n,
            "r": self.r,
            "t": self.t,
            "k": self.k,
            "lhs": [float(x) for x in self.lhs],
            "rhs": [float(x) for x in self.rhs],
            "margins": [float(x) for x in self.margins],
            "pass": bool(self.passed),
            "proven": bool(self.proven),
            "tol": float(self.tol),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationRecord":
        margins = np.asarray(obj["margins"], dtype=float)
        lhs = np.asarray(obj.get("lhs", np.full_like(margins, np.nan)), dtype=float)
        rhs = np.asarray(obj.get("rhs", np.full_like(margins, np.nan)), dtype=float)
        return cls(
            check=obj["check"], n=int(obj["n"]), lhs=lhs, rhs=rhs, margins=margins,
            passed=bool(obj["pass"]), tol=float(obj["tol"]), r=obj.get("r"),
            t=obj.get("t"), k=obj.get("k"), proven=bool(obj.get("proven", True)),
            seed=obj.get("seed"),
        )


def make_record(check: str, lhs, rhs, rel_tol: float = REL_TOL, **meta) -> VerificationRecord:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    margins = rhs - lhs
    tol = rel_tol * max(1.0, float(np.max(rhs)))
    return VerificationRecord(
        check=check, n=meta.pop("n", lhs.shape[0]), lhs=lhs, rhs=rhs, margins=margins,
        passed=bool(np.min(margins) >= -tol), tol=tol, **meta,
    )


def _near_violation(lhs, rhs, rel_tol) -> bool:
    m = np.asarray(rhs) - np.asarray(lhs)
    tol = rel_tol * max(1.0, float(np.max(rhs)))
    return bool(np.any(m < 0) and np.min(m) >= -tol)


def _run(check, evaluate: Callable[[float], tuple], rel_tol, **meta) -> VerificationRecord:
    lhs, rhs = evaluate(JACOBI_TOL)
    rechecked = False
    if _near_violation(lhs, rhs, rel_tol):
        lhs, rhs = evaluate(JACOBI_TOL_TIGHT)
        rechecked = True
    rec = make_record(check, lhs, rhs, rel_tol, **meta)
    rec.rechecked = rechecked
    return rec


def _psd_pair(a, b):
    a = PsdMatrix.from_array(a)
    b = PsdMatrix.from_array(b)
    if a.n != b.n:
        raise InvalidInput(f"dimension mismatch: {a.n} vs {b.n}")
    return a, b


def _fresh(a: PsdMatrix, jtol: float) -> PsdMatrix:
    return a if jtol == JACOBI_TOL else PsdMatrix.from_array(a.data, jacobi_tol=jtol)


def _check_t(t: float, upper: float | None = 2.0) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise InvalidInput("t must be finite")
    if t <= -2.0:
        raise InvalidInput("t must exceed -2")
    if upper is not None and t > upper:
        raise InvalidInput(f"t must be at most {upper:g}")
    return t


def _check_r(r: float, lo: float = 0.0, hi: float = 2.0) -> float:
    r = float(r)
    if not (math.isfinite(r) and lo <= r <= hi):
        raise InvalidInput(f"r must lie in [{lo:g}, {hi:g}]")
    return r


def is_proven(r: float, t: float) -> bool:
    """Whether ``(r, t)`` lies in the region where the conjecture is a theorem."""
    if any(abs(r - p) < 1e-12 for p in PROVEN_R):
        return True
    return t == 0.0 and 0.0 <= r <= 2.0


@dataclass(frozen=True, eq=False)
class InequalityCase:
    """One ``(A, B, r, t)`` instance, optionally with ``X`` for norm checks."""

    A: PsdMatrix
    B: PsdMatrix
    r: float = 1.0
    t: float = 0.0
    X: np.ndarray | None = None

    def __post_init__(self):
        a, b = _psd_pair(self.A, self.B)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "r", _check_r(self.r))
        object.__setattr__(self, "t", _check_t(self.t, upper=None))
        if self.X is not None:
            x = as_matrix(self.X)
            if x.shape != a.data.shape:
                raise InvalidInput("X has the wrong dimension")
            object.__setattr__(self, "X", x)


def mean_expression(a, b, t: float) -> np.ndarray:
    """``A^2 + t AB + B^2`` (not Hermitian unless A and B commute)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    return a @ a + t * (a @ b) + b @ b


def symmetric_mean_expression(a, b, t: float) -> np.ndarray:
    """``A^2 + B^2 + (t/2)(AB + BA)``, the Hermitian part of :func:`mean_expression`."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    ab = a @ b
    m = a @ a + b @ b + 0.5 * t * (ab + ab.conj().T)
    return (m + m.conj().T) / 2


def zhan_singular_value_check(A, B, r: float, t: float, *, rel_tol: float = REL_TOL,
                              seed: int | None = None) -> VerificationRecord:
    """``(2+t) s_j(A^r B^(2-r) + A^(2-r) B^r) <= 2 s_j(A^2 + tAB + B^2)``.

    Any ``r`` in ``[0, 2]`` is accepted; records outside the proven region
    carry ``proven=False``.
    """
    a, b = _psd_pair(A, B)
    r = _check_r(r)
    t = _check_t(t)

    def evaluate(jtol):
        aa, bb = _fresh(a, jtol), _fresh(b, jtol)
        ar = psd_power(aa, r).data
        a2r = psd_power(aa, 2.0 - r).data
        br = psd_power(bb, r).data
        b2r = psd_power(bb, 2.0 - r).data
        lhs = (2.0 + t) * singular_values(ar @ b2r + a2r @ br, tol=jtol)
        rhs = 2.0 * singular_values(mean_expression(a.data, b.data, t), tol=jtol)
        return lhs, rhs

    return _run("zhan", evaluate, rel_tol, r=r, t=t, proven=is_proven(r, t), seed=seed)


def proposition4_check(A, B, t: float, *, rel_tol: float = REL_TOL,
                       seed: int | None = None) -> VerificationRecord:
    """``(2+t) s_j(AB) <= s_j(A^2 + tAB + B^2)``.

    Equivalent to :func:`zhan_singular_value_check` at ``r = 1`` after dividing
    both sides by two.
    """
    a, b = _psd_pair(A, B)
    t = _check_t(t)

    def evaluate(jtol):
        lhs = (2.0 + t) * singular_values(a.data @ b.data, tol=jtol)
        rhs = singular_values(mean_expression(a.data, b.data, t), tol=jtol)
        return lhs, rhs

    return _run("prop4", evaluate, rel_tol, r=1.0, t=t, seed=seed)


def zhan_norm_check(A, B, X, r: float, t: float, k: int | None = None, *,
                    rel_tol: float = REL_TOL, allow_unproven: bool = False,
                    seed: int | None = None) -> VerificationRecord:
    """Ky Fan ``k``-norm form of ``(2+t)||A^r X B^(2-r) + A^(2-r) X B^r|| <= 2||A^2 X + tAXB + XB^2||``.

    With ``k=None`` every order ``1..n`` is compared, one margin per ``k``;
    by Fan dominance that covers every unitarily invariant norm.
    """
    a, b = _psd_pair(A, B)
    x = as_matrix(X)
    if x.shape != a.data.shape:
        raise InvalidInput("X has the wrong dimension")
    r = _check_r(r) if allow_unproven else _check_r(r, 0.5, 1.5)
    t = _check_t(t)
    n = a.n
    if k is not None and not 1 <= k <= n:
        raise InvalidInput(f"Ky Fan order k={k} outside 1..{n}")

    def evaluate(jtol):
        aa, bb = _fresh(a, jtol), _fresh(b, jtol)
        left = psd_power(aa, r).data @ x @ psd_power(bb, 2.0 - r).data
        left = left + psd_power(aa, 2.0 - r).data @ x @ psd_power(bb, r).data
        ad, bd = a.data, b.data
        right = ad @ ad @ x + t * (ad @ x @ bd) + x @ bd @ bd
        sl = np.cumsum(singular_values(left, tol=jtol))
        sr = np.cumsum(singular_values(right, tol=jtol))
        if k is not None:
            sl, sr = sl[k - 1:k], sr[k - 1:k]
        return (2.0 + t) * sl, 2.0 * sr

    proven = 0.5 <= r <= 1.5
    return _run("zhan_norm", evaluate, rel_tol, n=n, r=r, t=t, k=k, proven=proven, seed=seed)


def ag_mean_check(A, B, *, rel_tol: float = REL_TOL, seed: int | None = None) -> VerificationRecord:
    """``2 s_j(A B*) <= s_j(A* A + B* B)`` for arbitrary square ``A``, ``B``."""
    a = as_matrix(A)
    b = as_matrix(B)
    if a.shape != b.shape:
        raise InvalidInput(f"dimension mismatch: {a.shape} vs {b.shape}")

    def evaluate(jtol):
        lhs = 2.0 * singular_values(a @ b.conj().T, tol=jtol)
        rhs = singular_values(a.conj().T @ a + b.conj().T @ b, tol=jtol)
        return lhs, rhs

    return _run("ag_mean", evaluate, rel_tol, seed=seed)


def bhatia_kittaneh_check(A, B, *, rel_tol: float = REL_TOL,
                          seed: int | None = None) -> VerificationRecord:
    """``2 s_j(A^(1/2) B^(3/2) + A^(3/2) B^(1/2)) <= s_j((A+B)^2)``."""
    a, b = _psd_pair(A, B)

    def evaluate(jtol):
        aa, bb = _fresh(a, jtol), _fresh(b, jtol)
        m = psd_power(aa, 0.5).data @ psd_power(bb, 1.5).data
        m = m + psd_power(aa, 1.5).data @ psd_power(bb, 0.5).data
        s = a.data + b.data
        return 2.0 * singular_values(m, tol=jtol), singular_values(s @ s, tol=jtol)

    return _run("bhatia_kittaneh", evaluate, rel_tol, seed=seed)


def drury_check(A, B, *, rel_tol: float = REL_TOL, seed: int | None = None) -> VerificationRecord:
    """``4 s_j(AB) <= s_j((A+B)^2)``."""
    a, b = _psd_pair(A, B)

    def evaluate(jtol):
        s = a.data + b.data
        return 4.0 * singular_values(a.data @ b.data, tol=jtol), singular_values(s @ s, tol=jtol)

    return _run("drury", evaluate, rel_tol, seed=seed)


def mean_comparison_check(A, B, t: float, *, rel_tol: float = REL_TOL,
                          seed: int | None = None) -> tuple[VerificationRecord, VerificationRecord]:
    """Two comparisons against ``C = A^2 + tAB + B^2``.

    The first record is ``s_j(Re C) <= s_j(C)``; the second is
    ``((2+t)/4) s_j((A+B)^2) <= s_j(C)``.
    """
    a, b = _psd_pair(A, B)
    t = _check_t(t)
    c = mean_expression(a.data, b.data, t)

    def hermitian_part(jtol):
        return (singular_values(symmetric_mean_expression(a.data, b.data, t), tol=jtol),
                singular_values(c, tol=jtol))

    def sum_square(jtol):
        s = a.data + b.data
        return ((2.0 + t) / 4.0 * singular_values(s @ s, tol=jtol),
                singular_values(c, tol=jtol))

    return (_run("mean_hermitian_part", hermitian_part, rel_tol, t=t, seed=seed),
            _run("mean_sum_square", sum_square, rel_tol, t=t, seed=seed))


def corollary2_check(A, B, t: float, *, rel_tol: float = REL_TOL,
                     seed: int | None = None) -> tuple[VerificationRecord, VerificationRecord]:
    """Positivity of ``M(t) = A^2 + B^2 + (t/2)(AB+BA)`` and ``s_j(M(t))/(2+t) >= s_j((A+B)^2)/4``.

    The first record has ``lhs = 0`` and ``rhs`` the eigenvalues of ``M(t)``.
    """
    a, b = _psd_pair(A, B)
    t = _check_t(t)
    m = symmetric_mean_expression(a.data, b.data, t)

    def positivity(jtol):
        ev = eigh(m, tol=jtol).values
        return np.zeros_like(ev), ev

    def lower_bound(jtol):
        s = a.data + b.data
        return (0.25 * singular_values(s @ s, tol=jtol),
                singular_values(m, tol=jtol) / (2.0 + t))

    return (_run("corollary2_psd", positivity, rel_tol, t=t, seed=seed),
            _run("corollary2_bound", lower_bound, rel_tol, t=t, seed=seed))


@dataclass
class MonotonicityTrace:
    """``f_j(t) = lambda_j(M(t)) / (2+t)`` along tracked branches.

    ``violations`` holds ``(j, t_k, t_k+1, increase)`` for every adjacent
    increase above ``1e-9 * max(1, |f_j(t_k)|)``.  ``derivative_mismatch`` is
    the largest gap between the quotient-rule derivative and
    ``-u*(A-B)^2 u / (2+t)^2`` over simple-spectrum points, and
    ``max_derivative`` the largest quotient-rule derivative seen there.
    """

    grid: np.ndarray
    f_values: np.ndarray
    violations: list = field(default_factory=list)
    derivative_mismatch: float = 0.0
    max_derivative: float = -math.inf
    simple_points: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations and self.derivative_mismatch <= 1e-8 and self.max_derivative <= 1e-9


def monotonicity_pencil(A, B) -> HermitianPencil:
    a, b = _psd_pair(A, B)
    ab = a.data @ b.data
    return HermitianPencil(a.data @ a.data + b.data @ b.data, (ab + ab.conj().T) / 2)


def monotonicity_trace(A, B, grid, gap_tol: float | None = None) -> MonotonicityTrace:
    """Trace ``lambda_j(A^2 + B^2 + (t/2)(AB+BA)) / (2+t)`` over ``grid``."""
    a, b = _psd_pair(A, B)
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size and grid.min() <= -2.0:
        raise InvalidInput("t must exceed -2")
    p = monotonicity_pencil(a, b)
    branches = track_branches(p, grid, gap_tol=gap_tol)
    scale = 2.0 + grid
    f = branches.branches / scale[:, None]

    violations = []
    for j in range(p.n):
        rise = np.diff(f[:, j])
        bound = 1e-9 * np.maximum(1.0, np.abs(f[:-1, j]))
        for k in np.nonzero(rise > bound)[0]:
            violations.append((j, float(grid[k]), float(grid[k + 1]), float(rise[k])))

    d = a.data - b.data
    dsq = d @ d
    trace = MonotonicityTrace(grid, f, violations)
    for k, t in enumerate(grid):
        order = np.argsort(-branches.branches[k], kind="stable")
        spec = Spectrum(branches.branches[k][order], branches.frames[k][:, order])
        for j in range(p.n):
            try:
                dl = eigen_derivative_simple(p, t, j, gap_tol=gap_tol, spectrum=spec)
            except DegenerateSpectrum:
                continue
            u = spec.frame[:, j]
            quotient = (dl * scale[k] - spec.values[j]) / scale[k] ** 2
            closed = -np.vdot(u, dsq @ u).real / scale[k] ** 2
            trace.derivative_mismatch = max(trace.derivative_mismatch, abs(quotient - closed))
            trace.max_derivative = max(trace.max_derivative, quotient)
            trace.simple_points += 1
    return trace


def _zhan_case(c: InequalityCase, **kw):
    return [zhan_singular_value_check(c.A, c.B, c.r, c.t, **kw)]


def _norm_case(c: InequalityCase, allow_unproven: bool = False, **kw):
    x = c.X if c.X is not None else np.eye(c.A.n)
    return [zhan_norm_check(c.A, c.B, x, c.r, c.t, allow_unproven=allow_unproven, **kw)]


# Verifiers runnable on an InequalityCase, keyed by campaign check name.
CASE_CHECKS: dict[str, Callable] = {
    "zhan": _zhan_case,
    "zhan_norm": _norm_case,
    "prop4": lambda c, **kw: [proposition4_check(c.A, c.B, c.t, **kw)],
    "drury": lambda c, **kw: [drury_check(c.A, c.B, **kw)],
    "bhatia_kittaneh": lambda c, **kw: [bhatia_kittaneh_check(c.A, c.B, **kw)],
    "ag_mean": lambda c, **kw: [ag_mean_check(c.A.data, c.B.data, **kw)],
    "mean_comparison": lambda c, **kw: list(mean_comparison_check(c.A, c.B, c.t, **kw)),
    "corollary2": lambda c, **kw: list(corollary2_check(c.A, c.B, c.t, **kw)),
}
