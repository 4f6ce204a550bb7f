"""Slow high-precision re-evaluation of flagged cases (mpmath, 50 digits).

Singular values come from the roots of the characteristic polynomial of
``X* X`` (Faddeev-LeVerrier coefficients, then ``polyroots``); fractional
powers use mpmath's Hermitian eigensolver.  Only meant for ``n <= MAX_N``.
"""

from __future__ import annotations

import mpmath
import numpy as np

from .errors import InvalidInput

DPS = 50
MAX_N = 4


def _mp(x) -> mpmath.matrix:
    a = np.asarray(x, dtype=np.complex128)
    return mpmath.matrix([[mpmath.mpc(float(z.real), float(z.imag)) for z in row] for row in a])


def _adjoint(m):
    return m.transpose_conj()


def charpoly(m) -> list:
    """Coefficients of ``det(lambda I - M)``, leading coefficient first."""
    n = m.rows
    coeffs = [mpmath.mpf(1)]
    eye = mpmath.eye(n)
    mk = mpmath.zeros(n, n)
    c = mpmath.mpf(1)
    for k in range(1, n + 1):
        mk = m * mk + c * eye
        c = -sum((m * mk)[i, i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


def hp_singular_values(x) -> list:
    gram = _adjoint(x) * x
    coeffs = [mpmath.re(c) for c in charpoly(gram)]
    try:
        roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=4 * DPS)
        lam = [max(mpmath.re(z), mpmath.mpf(0)) for z in roots]
    except mpmath.libmp.NoConvergence:
        lam = [max(mpmath.re(z), mpmath.mpf(0)) for z in mpmath.eigh(gram, eigvals_only=True)]
    return sorted((mpmath.sqrt(v) for v in lam), reverse=True)


def hp_psd_power(a, r) -> mpmath.matrix:
    """``A**r`` with round-off negatives clamped to zero."""
    a = (a + _adjoint(a)) / 2
    e, q = mpmath.eighe(a)
    r = mpmath.mpf(r)
    n = a.rows
    d = mpmath.zeros(n, n)
    for i in range(n):
        v = max(mpmath.re(e[i]), mpmath.mpf(0))
        d[i, i] = mpmath.mpf(1) if r == 0 else v ** r
    return q * d * _adjoint(q)


def _psd(a):
    return hp_psd_power(a, 1)


def hp_evaluate(check: str, A, B, r=None, t=None, X=None) -> list[tuple[list, list]]:
    """(lhs, rhs) pairs of mpf lists for ``check``, one pair per record."""
    with mpmath.workdps(DPS):
        a, b = _psd(_mp(A)), _psd(_mp(B))
        t = None if t is None else mpmath.mpf(float(t))
        sv = hp_singular_values
        if check == "zhan":
            r = mpmath.mpf(float(r))
            m = hp_psd_power(a, r) * hp_psd_power(b, 2 - r) + hp_psd_power(a, 2 - r) * hp_psd_power(b, r)
            c = a * a + t * a * b + b * b
            return [([(2 + t) * s for s in sv(m)], [2 * s for s in sv(c)])]
        if check == "zhan_norm":
            r = mpmath.mpf(float(r))
            x = _mp(X) if X is not None else mpmath.eye(a.rows)
            left = hp_psd_power(a, r) * x * hp_psd_power(b, 2 - r) + hp_psd_power(a, 2 - r) * x * hp_psd_power(b, r)
            right = a * a * x + t * a * x * b + x * b * b
            sl, sr = np.cumsum(sv(left)), np.cumsum(sv(right))
            return [([(2 + t) * s for s in sl], [2 * s for s in sr])]
        if check == "prop4":
            c = a * a + t * a * b + b * b
            return [([(2 + t) * s for s in sv(a * b)], sv(c))]
        if check == "drury":
            s = a + b
            return [([4 * v for v in sv(a * b)], sv(s * s))]
        if check == "bhatia_kittaneh":
            m = hp_psd_power(a, 0.5) * hp_psd_power(b, 1.5) + hp_psd_power(a, 1.5) * hp_psd_power(b, 0.5)
            s = a + b
            return [([2 * v for v in sv(m)], sv(s * s))]
        if check == "ag_mean":
            a, b = _mp(A), _mp(B)
            return [([2 * v for v in sv(a * _adjoint(b))], sv(_adjoint(a) * a + _adjoint(b) * b))]
        if check in ("mean_comparison", "corollary2"):
            c = a * a + t * a * b + b * b
            herm = (c + _adjoint(c)) / 2
            s = a + b
            low = sv(s * s)
            if check == "mean_comparison":
                sc = sv(c)
                return [(sv(herm), sc), ([(2 + t) / 4 * v for v in low], sc)]
            ev = sorted((mpmath.re(v) for v in mpmath.eigh(herm, eigvals_only=True)), reverse=True)
            return [([mpmath.mpf(0)] * len(ev), ev),
                    ([v / 4 for v in low], [v / (2 + t) for v in sv(herm)])]
    raise InvalidInput(f"no high-precision path for check {check!r}")


def hp_min_margin(check: str, A, B, r=None, t=None, X=None, rel_tol: float = 1e-9) -> tuple[float, bool]:
    """Smallest margin over all records and whether it stays below ``-tol``."""
    worst = None
    violated = False
    with mpmath.workdps(DPS):
        for lhs, rhs in hp_evaluate(check, A, B, r, t, X):
            tol = rel_tol * max(1.0, float(max(rhs)))
            m = min(float(h - l) for l, h in zip(lhs, rhs))
            worst = m if worst is None else min(worst, m)
            violated = violated or m < -tol
    return worst, violated
