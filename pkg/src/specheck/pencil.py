"""Eigenvalue curves of a Hermitian pencil ``M(t) = M0 + t M1``.

Branches are followed across a parameter grid by matching eigenvectors
(optimal assignment on squared overlaps), so that crossing analytic branches
keep their identity instead of being re-sorted at every point.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateSpectrum, InvalidInput
from .linalg import (
    JACOBI_TOL,
    Spectrum,
    as_hermitian,
    eigh,
    matrix_from_json,
    matrix_to_json,
)

MAX_REFINE_DEPTH = 8
# Matched overlaps below this trigger local bisection of the grid step.
AMBIGUOUS_OVERLAP = 0.5


@dataclass(frozen=True, eq=False)
class HermitianPencil:
    M0: np.ndarray
    M1: np.ndarray

    def __post_init__(self):
        m0 = as_hermitian(self.M0)
        m1 = as_hermitian(self.M1)
        if m0.shape != m1.shape:
            raise InvalidInput(f"pencil dimensions differ: {m0.shape} vs {m1.shape}")
        object.__setattr__(self, "M0", m0)
        object.__setattr__(self, "M1", m1)

    @property
    def n(self) -> int:
        return self.M0.shape[0]

    def at(self, t: float) -> np.ndarray:
        return self.M0 + t * self.M1

    def lipschitz(self) -> float:
        """``||M1||_2``, the Weyl bound on every branch slope."""
        return float(np.max(np.abs(eigh(self.M1).values)))

    def to_json(self) -> dict:
        return {"M0": matrix_to_json(self.M0), "M1": matrix_to_json(self.M1)}

    @classmethod
    def from_json(cls, obj) -> "HermitianPencil":
        try:
            return cls(matrix_from_json(obj["M0"]), matrix_from_json(obj["M1"]))
        except (TypeError, KeyError) as exc:
            raise InvalidInput("pencil JSON needs 'M0' and 'M1'") from exc


@dataclass(frozen=True)
class DegenerateCluster:
    """A group of numerically equal eigenvalues and its spectral projector."""

    indices: tuple[int, ...]
    multiplicity: int
    projector: np.ndarray


@dataclass(frozen=True, eq=False)
class EigenBranchSet:
    """Tracked branches on a grid.

    ``branches[k, j]`` is branch ``j`` at ``grid[k]`` and ``frames[k][:, j]``
    its eigenvector.  ``exceptional_flags[k]`` lists clusters of branch
    indices whose eigenvalues are closer than the gap tolerance at ``grid[k]``.
    """

    grid: np.ndarray
    branches: np.ndarray
    frames: np.ndarray
    exceptional_flags: list[list[tuple[int, ...]]]

    @property
    def n(self) -> int:
        return self.branches.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"branch_{j + 1}" for j in range(self.n)] + ["flags"])
        for k, t in enumerate(self.grid):
            flags = ";".join("+".join(str(i + 1) for i in c) for c in self.exceptional_flags[k])
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in self.branches[k]] + [flags])
        return buf.getvalue()


def default_gap_tol(m: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.linalg.norm(m, 2)))


def detect_clusters(s: Spectrum, gap_tol: float) -> list[DegenerateCluster]:
    """Split the (sorted) spectrum into maximal runs with consecutive gaps below ``gap_tol``."""
    if not gap_tol > 0:
        raise InvalidInput("gap_tol must be positive")
    groups: list[list[int]] = [[0]]
    for j in range(1, s.n):
        if abs(s.values[j - 1] - s.values[j]) < gap_tol:
            groups[-1].append(j)
        else:
            groups.append([j])
    out = []
    for g in groups:
        u = s.frame[:, g]
        out.append(DegenerateCluster(tuple(g), len(g), u @ u.conj().T))
    return out


def _clusters_of(values: np.ndarray, gap_tol: float) -> list[list[int]]:
    """Clusters of (unsorted) values, as index lists in ascending-value order runs."""
    order = np.argsort(-values, kind="stable")
    groups = [[int(order[0])]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(values[a] - values[b]) < gap_tol:
            groups[-1].append(int(b))
        else:
            groups.append([int(b)])
    return groups


def _match(prev_frame: np.ndarray, spec: Spectrum) -> tuple[np.ndarray, float]:
    """Permutation ``perm`` with new column ``perm[j]`` continuing branch ``j``."""
    overlap = np.abs(prev_frame.conj().T @ spec.frame) ** 2
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm, float(np.min(overlap[rows, cols]))


def _align_clusters(values, frame, prev_frame, gap_tol):
    """Rotate eigenvectors inside each degenerate cluster onto the previous frame."""
    frame = frame.copy()
    for g in _clusters_of(values, gap_tol):
        if len(g) < 2:
            continue
        w = frame[:, g]
        m = w.conj().T @ prev_frame[:, g]
        x, _, yh = np.linalg.svd(m)
        frame[:, g] = w @ (x @ yh)
    return frame


def _crosses(prev_values, values, gap_tol) -> bool:
    """True if two branches separated at both ends swap order within the step."""
    d0 = prev_values[:, None] - prev_values[None, :]
    d1 = values[:, None] - values[None, :]
    return bool(np.any((d0 > gap_tol) & (d1 < -gap_tol)))


def _step(p, t0, t1, prev_values, prev_frame, gap_tol, lip, depth, tol):
    spec = eigh(p.at(t1), tol=tol)
    perm, worst = _match(prev_frame, spec)
    ambiguous = worst < AMBIGUOUS_OVERLAP or _crosses(prev_values, spec.values[perm], gap_tol)
    if ambiguous and depth < MAX_REFINE_DEPTH:
        tm = 0.5 * (t0 + t1)
        mv, mf = _step(p, t0, tm, prev_values, prev_frame, gap_tol, lip, depth + 1, tol)
        return _step(p, tm, t1, mv, mf, gap_tol, lip, depth + 1, tol)
    values = spec.values[perm]
    frame = spec.frame[:, perm]
    if np.any(np.abs(values - prev_values) > lip * (t1 - t0) + 1e-8):
        # Unresolved avoided crossing: keep each branch at its rank position.
        rank = np.argsort(np.argsort(-prev_values, kind="stable"), kind="stable")
        values = spec.values[rank]
        frame = spec.frame[:, rank]
    frame = _align_clusters(values, frame, prev_frame, gap_tol)
    return values, frame


def track_branches(p: HermitianPencil, grid, gap_tol: float | None = None,
                   tol: float = JACOBI_TOL) -> EigenBranchSet:
    """Follow the eigenvalue branches of ``p`` over a strictly increasing grid.

    Consecutive points are matched by maximising total squared eigenvector
    overlap.  When a matched overlap is poor, or the matching makes two
    separated branches swap order, the step is bisected (up to
    ``MAX_REFINE_DEPTH`` levels) before matching; the extra points are not
    part of the output.  A narrow avoided crossing then resolves into rank
    order while a true crossing keeps its swap at every level.  ``gap_tol`` defaults to ``1e-8 * max(1, ||M(t)||_2)``
    per point.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.shape[0] < 2:
        raise InvalidInput("grid needs at least two points")
    if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
        raise InvalidInput("grid must be finite and strictly increasing")
    lip = p.lipschitz()
    n = p.n
    branches = np.empty((grid.shape[0], n))
    frames = np.empty((grid.shape[0], n, n), dtype=np.complex128)
    flags = []

    spec = eigh(p.at(grid[0]), tol=tol)
    branches[0] = spec.values
    frames[0] = spec.frame
    for k, t in enumerate(grid):
        if k > 0:
            branches[k], frames[k] = _step(
                p, grid[k - 1], t, branches[k - 1], frames[k - 1],
                _gap(p, t, gap_tol), lip, 0, tol,
            )
        g = _gap(p, t, gap_tol)
        flags.append([tuple(sorted(c)) for c in _clusters_of(branches[k], g) if len(c) > 1])
    return EigenBranchSet(grid, branches, frames, flags)


def _gap(p, t, gap_tol):
    return default_gap_tol(p.at(t)) if gap_tol is None else gap_tol


def eigen_derivative_simple(p: HermitianPencil, t: float, j: int,
                            gap_tol: float | None = None,
                            spectrum: Spectrum | None = None) -> float:
    """Derivative of the ``j``-th largest eigenvalue of ``M(t)``: ``u_j* M1 u_j``.

    ``j`` is 0-based.  Raises :class:`DegenerateSpectrum` when ``lambda_j`` is
    within ``gap_tol`` of a neighbour.
    """
    s = eigh(p.at(t)) if spectrum is None else spectrum
    if not 0 <= j < s.n:
        raise InvalidInput(f"index {j} outside 0..{s.n - 1}")
    g = _gap(p, t, gap_tol)
    v = s.values
    if (j > 0 and v[j - 1] - v[j] <= g) or (j < s.n - 1 and v[j] - v[j + 1] <= g):
        raise DegenerateSpectrum(f"eigenvalue {j} is not simple at t={t}")
    u = s.frame[:, j]
    d = np.vdot(u, p.M1 @ u)
    return float(d.real)


def eigen_derivative_projector(p: HermitianPencil, cluster: DegenerateCluster) -> float:
    """``Tr(M1 P) / m`` for a cluster that stays degenerate on the interval."""
    proj = np.asarray(cluster.projector, dtype=np.complex128)
    m = cluster.multiplicity
    if proj.shape != p.M1.shape:
        raise InvalidInput("projector shape does not match the pencil")
    if np.linalg.norm(proj @ proj - proj) > 1e-9:
        raise InvalidInput("projector is not idempotent")
    if abs(np.trace(proj).real - m) > 1e-9 or m != len(cluster.indices):
        raise InvalidInput("projector rank does not match the cluster multiplicity")
    return float(np.trace(p.M1 @ proj).real / m)


@dataclass(frozen=True)
class WeylSlack:
    lower: np.ndarray
    upper: np.ndarray

    def min(self) -> float:
        return float(min(self.lower.min(), self.upper.min()))


def weyl_envelope_check(p: HermitianPencil, t: float) -> WeylSlack:
    """Slack in ``l_j(M0) + l_n(tM1) <= l_j(M0 + tM1) <= l_j(M0) + l_1(tM1)``."""
    mid = eigh(p.at(t)).values
    base = eigh(p.M0).values
    pert = eigh(t * p.M1).values
    return WeylSlack(mid - (base + pert[-1]), (base + pert[0]) - mid)
