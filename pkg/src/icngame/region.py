"""Geometry of the feasible throughput region.

The feasible region is the convex hull of the state vectors; a target is
strictly feasible when some state distribution with *all* entries positive
reproduces it.  Membership is decided by one linear program: writing every
state probability as ``p_s = t + q_s`` with ``q >= 0`` and maximizing the
common floor ``t``.  The LP is infeasible exactly when the target lies
outside the hull, and its optimum is positive exactly when the target is
strictly feasible.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import StateSpace

STRICTNESS_TOL = 1e-9
PIVOT_TOL = 1e-9


class Verdict(str, enum.Enum):
    STRICTLY_INSIDE = "StrictlyInside"
    ON_BOUNDARY = "OnBoundaryOrOutsideStrict"
    OUTSIDE = "Outside"


@dataclass(frozen=True)
class MembershipVerdict:
    verdict: Verdict
    witness: Optional[np.ndarray] = None
    min_probability: float = float("nan")

    @property
    def feasible(self) -> bool:
        return self.verdict is not Verdict.OUTSIDE


class _Infeasible(Exception):
    pass


def _pivot(T: np.ndarray, basis: list, row: int, col: int) -> None:
    T[row] /= T[row, col]
    f = T[:, col].copy()
    f[row] = 0.0
    T -= np.outer(f, T[row])
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: list, ncols: int, tol: float) -> None:
    """Minimize over the tableau in place with Bland's rule.

    The last row holds reduced costs, the last column the right-hand side.
    Only the first ``ncols`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    while True:
        reduced = T[-1, :ncols]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise ArithmeticError("LP unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol]
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, basis, row, col)


def solve_standard_lp(A, b, c, tol: float = PIVOT_TOL) -> np.ndarray:
    """Minimize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``.

    Dense two-phase simplex.  Raises ``_Infeasible`` when phase one cannot
    drive the artificial variables to zero.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run_simplex(T, basis, n + m, tol)
    if -T[-1, -1] > tol * max(1.0, np.abs(b).sum()):
        raise _Infeasible

    # Pivot leftover artificials out; rows with no usable entry are redundant.
    keep = []
    for row in range(m):
        if basis[row] >= n:
            cand = np.flatnonzero(np.abs(T[row, :n]) > tol)
            if cand.size == 0:
                continue
            _pivot(T, basis, row, int(cand[0]))
        keep.append(row)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros(n + 1)])
    basis = [basis[row] for row in keep]

    T[-1, :n] = c
    for row, var in enumerate(basis):
        T[-1] -= c[var] * T[row]
    _run_simplex(T, basis, n, tol)

    x = np.zeros(n)
    for row, var in enumerate(basis):
        x[var] = T[row, -1]
    return np.maximum(x, 0.0)


def membership(space: StateSpace, targets, strict_tol: float = STRICTNESS_TOL) -> MembershipVerdict:
    """Classify ``targets`` against the feasible and strictly feasible regions.

    ``strict_tol`` is the resolution at which a boundary can be told apart
    from the interior: a target whose best positive representation has
    smallest probability at or below it is reported as on the boundary.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (space.n,):
        raise ValueError(f"targets must have shape ({space.n},), got {targets.shape}")
    if not np.isfinite(targets).all():
        raise ValueError("targets must be finite")
    S = len(space)
    inc = space.incidence
    # columns: t, q_1..q_S ; rows: one per link, then normalization
    A = np.zeros((space.n + 1, S + 1))
    A[:space.n, 0] = inc.sum(axis=0)
    A[:space.n, 1:] = inc.T
    A[space.n, 0] = S
    A[space.n, 1:] = 1.0
    b = np.append(targets, 1.0)
    c = np.zeros(S + 1)
    c[0] = -1.0
    try:
        x = solve_standard_lp(A, b, c)
    except _Infeasible:
        return MembershipVerdict(Verdict.OUTSIDE)
    floor = x[0]
    p = floor + x[1:]
    p = p / p.sum()
    verdict = Verdict.STRICTLY_INSIDE if floor > strict_tol else Verdict.ON_BOUNDARY
    return MembershipVerdict(verdict, p, float(floor))


def project_zero_link(space: StateSpace, p, link: int) -> np.ndarray:
    """Silence one link by merging each state containing it into the state without it.

    Throughputs of every other link are unchanged and the silenced link's
    throughput drops to zero.
    """
    if not 1 <= link <= space.n:
        raise ValueError(f"link id {link} outside 1..{space.n}")
    p = np.asarray(p, dtype=float)
    if p.shape != (len(space),):
        raise ValueError("distribution does not match the state space")
    bit = np.int64(1 << (link - 1))
    with_link = (space.states & bit) != 0
    dest = np.searchsorted(space.states, space.states[with_link] & ~bit)
    out = p.copy()
    out[with_link] = 0.0
    np.add.at(out, dest, p[with_link])
    return out


def random_feasible_point(space: StateSpace, rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """A throughput vector generated by a strictly positive random state law.

    Returns ``(targets, witness)``.
    """
    rng = np.random.default_rng(rng_seed)
    w = rng.uniform(0.05, 1.0, size=len(space))
    p = w / w.sum()
    return p @ space.incidence, p
