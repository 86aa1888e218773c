"""Event-driven simulation of ideal CSMA timer dynamics.

Each link alternates between a countdown and a transmission.  A countdown
runs only while no neighbor transmits; it is frozen otherwise and resumes
with exactly the remaining time once the channel clears.  When it expires
the link transmits for a random holding time and freezes its idle
neighbors.  Time is in milliseconds.

Timer laws (``law``):

``"uniform"``
    countdown ~ U[0, 2 exp(-r)], transmission ~ U[0.5, 1.5]
``"exponential"``
    countdown ~ Exp(mean exp(-r)), transmission ~ Exp(mean 1)

Both keep ``E[t_tr] / E[t_cd] = exp(r)``.

Every link draws from its own stream seeded by ``(seed, link id)``, so adding
links to a scenario leaves the draws of existing links unchanged.  The inner
loop picks the next event by scanning the per-link expiry times; ties go to
the lowest link id.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .graph import ContentionGraph
from .icn import as_profile

COUNTING, FROZEN, TRANSMITTING = 0, 1, 2
EV_START_TX, EV_END_TX, EV_FREEZE, EV_RESUME = 0, 1, 2, 3
EVENT_NAMES = ("start_tx", "end_tx", "freeze", "resume")
LAWS = ("uniform", "exponential")

_BLOCK = 1 << 14
_MAX_OCCUPANCY_LINKS = 16

_STATUS_DONE, _STATUS_REFILL, _STATUS_FLUSH = 0, 1, 2


@numba.njit(cache=True)
def _draw(u, mean, law_exp, is_tx):
    if law_exp:
        return -np.log1p(-u) * mean
    if is_tx:
        return 0.5 + u
    return 2.0 * u * mean


@numba.njit(cache=True)
def _advance(t_end, clock, mode, expiry, remaining, blockers, cd_mean,
             nbr_ptr, nbr_idx, law_exp, uniforms, upos, busy, occupancy,
             track_occ, mask_box, ev_time, ev_link, ev_code, ev_fill, trace,
             stats):
    n = mode.shape[0]
    block = uniforms.shape[1]
    t = clock[0]
    mask = mask_box[0]
    while True:
        j = 0
        te = expiry[0]
        for k in range(1, n):
            if expiry[k] < te:
                te = expiry[k]
                j = k
        if te > t_end:
            dt = t_end - t
            if dt > 0.0:
                for k in range(n):
                    if mode[k] == TRANSMITTING:
                        busy[k] += dt
                if track_occ:
                    occupancy[mask] += dt
            clock[0] = t_end
            mask_box[0] = mask
            return _STATUS_DONE
        if upos[j] >= block:
            clock[0] = t
            mask_box[0] = mask
            stats[2] = j
            return _STATUS_REFILL
        if trace and ev_fill[0] + 1 + (nbr_ptr[j + 1] - nbr_ptr[j]) > ev_time.shape[0]:
            clock[0] = t
            mask_box[0] = mask
            return _STATUS_FLUSH

        dt = te - t
        if dt > 0.0:
            for k in range(n):
                if mode[k] == TRANSMITTING:
                    busy[k] += dt
            if track_occ:
                occupancy[mask] += dt
        t = te
        stats[0] += 1
        u = uniforms[j, upos[j]]
        upos[j] += 1
        if mode[j] == COUNTING:
            if blockers[j] != 0:
                stats[1] += 1
            mode[j] = TRANSMITTING
            expiry[j] = t + _draw(u, 1.0, law_exp, True)
            mask |= 1 << j
            if trace:
                f = ev_fill[0]
                ev_time[f] = t
                ev_link[f] = j
                ev_code[f] = EV_START_TX
                ev_fill[0] = f + 1
            for q in range(nbr_ptr[j], nbr_ptr[j + 1]):
                k = nbr_idx[q]
                blockers[k] += 1
                if mode[k] == COUNTING:
                    remaining[k] = expiry[k] - t
                    expiry[k] = np.inf
                    mode[k] = FROZEN
                    if trace:
                        f = ev_fill[0]
                        ev_time[f] = t
                        ev_link[f] = k
                        ev_code[f] = EV_FREEZE
                        ev_fill[0] = f + 1
        else:
            mode[j] = COUNTING
            expiry[j] = t + _draw(u, cd_mean[j], law_exp, False)
            mask &= ~(1 << j)
            if trace:
                f = ev_fill[0]
                ev_time[f] = t
                ev_link[f] = j
                ev_code[f] = EV_END_TX
                ev_fill[0] = f + 1
            for q in range(nbr_ptr[j], nbr_ptr[j + 1]):
                k = nbr_idx[q]
                blockers[k] -= 1
                if blockers[k] == 0 and mode[k] == FROZEN:
                    mode[k] = COUNTING
                    expiry[k] = t + remaining[k]
                    if trace:
                        f = ev_fill[0]
                        ev_time[f] = t
                        ev_link[f] = k
                        ev_code[f] = EV_RESUME
                        ev_fill[0] = f + 1


@dataclass
class SimTrace:
    """Outcome of a simulation run.

    ``busy[k]`` is the accumulated transmission time of link ``k+1`` in ms.
    ``violations`` counts transmissions that started while a neighbor was
    transmitting; the timer rules make it zero.
    """

    busy: np.ndarray
    elapsed: float
    events: int
    seed: int
    violations: int = 0
    occupancy: Optional[np.ndarray] = None

    @property
    def busy_fraction(self) -> np.ndarray:
        return self.busy / self.elapsed


class IcnSimulator:
    """Stateful simulator; successive calls continue the same sample path."""

    def __init__(self, g: ContentionGraph, r, seed: int = 0, law: str = "uniform",
                 track_occupancy: bool = False, trace_capacity: int = 0):
        if law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}, got {law!r}")
        self.graph = g
        self.seed = int(seed)
        self.law = law
        n = g.n
        ptr = [0]
        idx: list[int] = []
        for link in range(1, n + 1):
            idx.extend(k - 1 for k in g.neighbors(link))
            ptr.append(len(idx))
        self._nbr_ptr = np.array(ptr, dtype=np.int64)
        self._nbr_idx = np.array(idx, dtype=np.int64)

        self._rngs = [np.random.default_rng([self.seed, link]) for link in range(1, n + 1)]
        self._uniforms = np.empty((n, _BLOCK))
        for k in range(n):
            self._uniforms[k] = self._rngs[k].random(_BLOCK)
        self._upos = np.zeros(n, dtype=np.int64)

        self.r = as_profile(r, n)
        self._cd_mean = np.exp(-self.r)
        self._clock = np.zeros(1)
        self._mask = np.zeros(1, dtype=np.int64)
        self._mode = np.full(n, COUNTING, dtype=np.int64)
        self._remaining = np.zeros(n)
        self._blockers = np.zeros(n, dtype=np.int64)
        self._expiry = np.empty(n)
        law_exp = law == "exponential"
        for k in range(n):
            self._expiry[k] = _draw(self._next_uniform(k), self._cd_mean[k], law_exp, False)

        self.busy = np.zeros(n)
        self._stats = np.zeros(3, dtype=np.int64)
        self.track_occupancy = track_occupancy and n <= _MAX_OCCUPANCY_LINKS
        self.occupancy = np.zeros(1 << n if self.track_occupancy else 1)

        self._tracing = trace_capacity > 0
        cap = max(int(trace_capacity), 1)
        self._ev_time = np.empty(cap)
        self._ev_link = np.empty(cap, dtype=np.int64)
        self._ev_code = np.empty(cap, dtype=np.int64)
        self._ev_fill = np.zeros(1, dtype=np.int64)
        self.events_log: list[tuple[float, int, str]] = []

    def _next_uniform(self, k: int) -> float:
        if self._upos[k] >= _BLOCK:
            self._refill(k)
        u = self._uniforms[k, self._upos[k]]
        self._upos[k] += 1
        return float(u)

    def _refill(self, k: int) -> None:
        self._uniforms[k] = self._rngs[k].random(_BLOCK)
        self._upos[k] = 0

    def _flush(self) -> None:
        f = int(self._ev_fill[0])
        for t, k, c in zip(self._ev_time[:f], self._ev_link[:f], self._ev_code[:f]):
            self.events_log.append((float(t), int(k) + 1, EVENT_NAMES[c]))
        self._ev_fill[0] = 0

    @property
    def now(self) -> float:
        return float(self._clock[0])

    @property
    def events(self) -> int:
        return int(self._stats[0])

    @property
    def violations(self) -> int:
        return int(self._stats[1])

    def transmitting(self) -> frozenset[int]:
        return frozenset(int(k) + 1 for k in np.flatnonzero(self._mode == TRANSMITTING))

    def set_profile(self, r) -> None:
        """Change the TA vector.

        Pending countdowns (running or frozen) are rescaled by the ratio of
        new to old mean countdown, as if freshly drawn under the new TA.
        """
        r = as_profile(r, self.graph.n)
        scale = np.exp(self.r - r)
        counting = self._mode == COUNTING
        now = self._clock[0]
        self._expiry[counting] = now + (self._expiry[counting] - now) * scale[counting]
        frozen = self._mode == FROZEN
        self._remaining[frozen] *= scale[frozen]
        self.r = r
        self._cd_mean = np.exp(-r)

    def advance(self, duration: float) -> np.ndarray:
        """Run for ``duration`` ms and return per-link busy time in that span."""
        if not duration > 0:
            raise ValueError(f"duration must be positive, got {duration}")
        start = self.busy.copy()
        t_end = self.now + float(duration)
        law_exp = self.law == "exponential"
        while True:
            status = _advance(
                t_end, self._clock, self._mode, self._expiry, self._remaining,
                self._blockers, self._cd_mean, self._nbr_ptr, self._nbr_idx,
                law_exp, self._uniforms, self._upos, self.busy, self.occupancy,
                self.track_occupancy, self._mask, self._ev_time, self._ev_link,
                self._ev_code, self._ev_fill, self._tracing, self._stats)
            if status == _STATUS_REFILL:
                self._refill(int(self._stats[2]))
            elif status == _STATUS_FLUSH:
                self._flush()
            else:
                break
        if self._tracing:
            self._flush()
        return self.busy - start

    def trace(self) -> SimTrace:
        occ = self.occupancy.copy() if self.track_occupancy else None
        return SimTrace(self.busy.copy(), self.now, self.events, self.seed,
                        self.violations, occ)

    def write_events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ms", "link", "event"])
            for t, k, name in self.events_log:
                w.writerow([repr(t), k, name])


def simulate(g: ContentionGraph, r, duration: float, seed: int = 0,
             law: str = "uniform", track_occupancy: bool = False,
             trace_capacity: int = 0) -> SimTrace:
    """Simulate ``duration`` ms from a fresh start and return the trace."""
    sim = IcnSimulator(g, r, seed, law, track_occupancy, trace_capacity)
    sim.advance(duration)
    return sim.trace()


def measure_window(sim: IcnSimulator, r_current, tau: float) -> np.ndarray:
    """Empirical throughput ``T_i / tau`` over the next ``tau`` ms.

    The simulator keeps its timers between windows, so TA changes act on a
    running system rather than a restarted one.
    """
    if not tau > 0:
        raise ValueError(f"measurement window must be positive, got {tau}")
    sim.set_profile(r_current)
    return sim.advance(tau) / tau


def insensitivity_check(g: ContentionGraph, r, law: str, duration: float,
                        seed: int = 0) -> np.ndarray:
    """Long-run busy fractions under the chosen timer law."""
    return simulate(g, r, duration, seed, law).busy_fraction
