"""Dense Hermitian and PSD matrix primitives.

Everything here works on complex ``n x n`` numpy arrays.  The eigensolver is a
cyclic complex Jacobi method compiled with numba; the other routines are thin
spectral wrappers around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import InvalidInput, NumericalFailure

JACOBI_TOL = 1e-14
JACOBI_TOL_TIGHT = 1e-16
MAX_SWEEPS = 100
HERMITIAN_TOL = 1e-12
PSD_CLAMP_TOL = 1e-10
# Eigenvalues this small relative to ||A||_2 are Jacobi round-off; fractional
# powers would amplify them to O(sqrt(eps)), so they are stored as exact zeros.
ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues with the matching orthonormal eigenvector frame.

    Column ``j`` of ``frame`` is the eigenvector for ``values[j]``.
    """

    values: np.ndarray
    frame: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.frame * self.values) @ self.frame.conj().T


@dataclass(frozen=True, eq=False)
class PsdMatrix:
    """A Hermitian positive semidefinite matrix with its cached spectrum.

    Build instances with :meth:`from_array`.  The cached spectrum has
    round-off negatives and eigenvalues below ``ZERO_FLOOR * ||A||_2`` set to
    exactly zero; ``data`` is kept as given.
    """

    data: np.ndarray
    spectrum: Spectrum = field(repr=False)
    certified_min_eig: float = 0.0

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_array(cls, x, jacobi_tol: float = JACOBI_TOL) -> "PsdMatrix":
        if isinstance(x, PsdMatrix):
            if jacobi_tol == JACOBI_TOL:
                return x
            x = x.data
        h = as_hermitian(x)
        spec = eigh(h, tol=jacobi_tol)
        lo = float(spec.values[-1])
        norm2 = float(np.max(np.abs(spec.values)))
        if lo < -PSD_CLAMP_TOL * max(1.0, norm2):
            raise InvalidInput(f"matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
        values = np.where(spec.values <= ZERO_FLOOR * norm2, 0.0, spec.values)
        return cls._build(h, Spectrum(values, spec.frame), lo)

    @classmethod
    def _build(cls, data: np.ndarray, spectrum: Spectrum, min_eig: float) -> "PsdMatrix":
        data = np.array(data, dtype=np.complex128)
        data.setflags(write=False)
        spectrum.values.setflags(write=False)
        spectrum.frame.setflags(write=False)
        return cls(data, spectrum, min_eig)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def as_matrix(x) -> np.ndarray:
    """Validate ``x`` as a finite square complex matrix and return a copy."""
    if isinstance(x, PsdMatrix):
        x = x.data
    a = np.array(x, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return a


def as_hermitian(x, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate near-Hermitian input and return the exactly symmetrized matrix."""
    a = as_matrix(x)
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.conj().T) > tol * scale:
        raise InvalidInput("matrix is not Hermitian")
    return (a + a.conj().T) / 2


@numba.njit(cache=True, nogil=True)
def _jacobi(h, tol, max_sweeps):
    n = h.shape[0]
    a = h.copy()
    v = np.eye(n, dtype=np.complex128)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j].real ** 2 + a[i, j].imag ** 2
    thresh = tol * math.sqrt(fro)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * (a[p, q].real ** 2 + a[p, q].imag ** 2)
        if math.sqrt(off) <= thresh:
            w = np.empty(n)
            for i in range(n):
                w[i] = a[i, i].real
            return w, v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                phase = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                elif tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                uqp = -s * phase.conjugate()
                uqq = c * phase.conjugate()
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * c + akq * uqp
                    a[k, q] = akp * s + akq * uqq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk + uqp.conjugate() * aqk
                    a[q, k] = s * apk + uqq.conjugate() * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = vkp * c + vkq * uqp
                    v[k, q] = vkp * s + vkq * uqq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    return w, v, max_sweeps, False


def eigh(h, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius mass drops to ``tol * ||H||_F``.
    Eigenvalues come back non-increasing; ties keep the Jacobi output order.

    Raises
    ------
    InvalidInput
        If ``h`` is not a finite Hermitian matrix.
    NumericalFailure
        If ``max_sweeps`` sweeps do not reach the threshold.
    """
    a = as_hermitian(h)
    w, v, sweeps, ok = _jacobi(a, float(tol), int(max_sweeps))
    if not ok:
        raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps")
    order = np.argsort(-w, kind="stable")
    return Spectrum(w[order], v[:, order])


def singular_values(x, tol: float = JACOBI_TOL) -> np.ndarray:
    """Singular values of ``x`` in non-increasing order.

    The right singular frame comes from the eigenvectors of ``X* X``; each
    value is then taken as ``||X v_j||`` rather than ``sqrt(lambda_j)`` so the
    small singular values keep absolute accuracy ``O(eps ||X||)``.
    """
    a = as_matrix(x)
    gram = a.conj().T @ a
    spec = eigh((gram + gram.conj().T) / 2, tol=tol)
    s = np.linalg.norm(a @ spec.frame, axis=0)
    return -np.sort(-s)


def ky_fan_norm(x, k: int, tol: float = JACOBI_TOL) -> float:
    """Sum of the ``k`` largest singular values."""
    s = singular_values(x, tol=tol)
    if not 1 <= k <= s.shape[0]:
        raise InvalidInput(f"Ky Fan order k={k} outside 1..{s.shape[0]}")
    return float(np.sum(s[:k]))


def psd_power(a, r: float, jacobi_tol: float | None = None) -> PsdMatrix:
    """``A**r`` for PSD ``A`` and real ``r >= 0`` through A's spectrum.

    ``r == 1`` returns ``A`` itself.  Passing ``jacobi_tol`` forces a fresh
    eigendecomposition at that threshold instead of the cached one.
    """
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise InvalidInput(f"power must be finite and non-negative, got {r}")
    if jacobi_tol is None:
        a = PsdMatrix.from_array(a)
    else:
        a = PsdMatrix.from_array(a, jacobi_tol=jacobi_tol)
    if r == 1.0:
        return a
    spec = a.spectrum
    powered = spec.values ** r
    q = spec.frame
    out = (q * powered) @ q.conj().T
    out = (out + out.conj().T) / 2
    return PsdMatrix._build(out, Spectrum(powered, q.copy()), float(powered[-1]))


def re_part(x) -> np.ndarray:
    """Hermitian part ``(X + X*) / 2``."""
    a = as_matrix(x)
    return (a + a.conj().T) / 2


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def spectrum_from_spec(n: int, spectrum_spec, rng: np.random.Generator) -> np.ndarray:
    """Turn a spectrum descriptor into ``n`` non-negative eigenvalues.

    ``spectrum_spec`` is either an explicit list of eigenvalues or one of
    ``"uniform"`` (U[0, 2)), ``"lognormal"`` (exp N(0, 1)) or ``"integer"``
    (uniform on {0, ..., 4}).
    """
    if isinstance(spectrum_spec, str):
        if spectrum_spec == "uniform":
            return rng.uniform(0.0, 2.0, size=n)
        if spectrum_spec == "lognormal":
            return np.exp(rng.standard_normal(n))
        if spectrum_spec == "integer":
            return rng.integers(0, 5, size=n).astype(float)
        raise InvalidInput(f"unknown spectrum descriptor {spectrum_spec!r}")
    values = np.asarray(spectrum_spec, dtype=float).ravel()
    if values.shape[0] != n:
        raise InvalidInput(f"expected {n} eigenvalues, got {values.shape[0]}")
    if not np.all(np.isfinite(values)):
        raise InvalidInput("eigenvalues must be finite")
    if np.any(values < 0):
        raise InvalidInput("requested eigenvalues must be non-negative")
    return values


def random_psd(n: int, spectrum_spec: Sequence[float] | str = "uniform",
               seed: int | np.random.Generator = 0) -> PsdMatrix:
    """Random PSD matrix ``Q diag(lambda) Q*`` with a Haar-like unitary ``Q``."""
    if n < 1:
        raise InvalidInput("dimension must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    values = spectrum_from_spec(n, spectrum_spec, rng)
    q = haar_unitary(n, rng)
    a = (q * values) @ q.conj().T
    return PsdMatrix.from_array((a + a.conj().T) / 2)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (z + z.conj().T) / 2


def random_complex(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def spectral_norm(x) -> float:
    return float(singular_values(x)[0])


def matrix_to_json(x) -> dict:
    a = as_matrix(x)
    return {
        "n": int(a.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in a.ravel()],
    }


def matrix_from_json(obj) -> np.ndarray:
    """Parse ``{"n": int, "entries": [[re, im], ...]}`` (row-major, length n**2)."""
    try:
        n = obj["n"]
        entries = obj["entries"]
    except (TypeError, KeyError) as exc:
        raise InvalidInput("matrix JSON needs 'n' and 'entries'") from exc
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InvalidInput(f"matrix JSON has invalid n={n!r}")
    if not isinstance(entries, list) or len(entries) != n * n:
        raise InvalidInput(f"matrix JSON expects {n * n} entries")
    out = np.empty(n * n, dtype=np.complex128)
    for i, pair in enumerate(entries):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise InvalidInput(f"entry {i} is not a [re, im] pair")
        try:
            re, im = float(pair[0]), float(pair[1])
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"entry {i} is not numeric") from exc
        if not (math.isfinite(re) and math.isfinite(im)):
            raise InvalidInput(f"entry {i} is not finite")
        out[i] = complex(re, im)
    return out.reshape(n, n)
