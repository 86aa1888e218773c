"""Product-form stationary law of an ideal CSMA network.

A link's transmission aggressiveness ``r`` is the log of its access intensity
``rho = E[t_tr] / E[t_cd]``.  For a profile ``r`` the stationary probability
of a feasible state ``s`` is ``exp(s . r) / Z``, and the throughput of a link
is the probability mass of the states in which it transmits.

Every exponential goes through a max-shifted log-sum-exp, so the partition
function is never formed in raw scale.
"""
from __future__ import annotations

import numpy as np

from .graph import StateSpace

R_MIN = -30.0
R_MAX = 30.0


def as_profile(r, n: int) -> np.ndarray:
    """Validate a TA vector and clamp it to ``[R_MIN, R_MAX]``.

    A scalar is broadcast to all ``n`` links.
    """
    arr = np.asarray(r, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"expected {n} TA entries, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("TA vector contains NaN")
    return np.clip(arr, R_MIN, R_MAX)


def access_intensity(r) -> np.ndarray:
    """``rho = exp(r)``."""
    return np.exp(np.asarray(r, dtype=float))


def _vector(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def _log_weights(space: StateSpace, r) -> np.ndarray:
    return space.incidence @ as_profile(r, space.n)


def log_partition(space: StateSpace, r) -> float:
    w = _log_weights(space, r)
    top = w.max()
    return float(top + np.log(np.exp(w - top).sum()))


def stationary_distribution(space: StateSpace, r) -> np.ndarray:
    """State probabilities aligned with ``space.states``."""
    w = _log_weights(space, r)
    p = np.exp(w - w.max())
    return p / p.sum()


def throughput(space: StateSpace, r) -> np.ndarray:
    """Fraction of time each link transmits."""
    return stationary_distribution(space, r) @ space.incidence


def log_likelihood(space: StateSpace, r, targets) -> float:
    """``F(r) = targets . r - log Z(r)``; concave in ``r``."""
    r = as_profile(r, space.n)
    targets = _vector(targets, space.n, "targets")
    return float(targets @ r - log_partition(space, r))


def log_likelihood_gradient(space: StateSpace, r, targets) -> np.ndarray:
    """Gradient of :func:`log_likelihood`: ``targets - throughput(r)``."""
    targets = _vector(targets, space.n, "targets")
    return targets - throughput(space, r)


def entropy(p) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
