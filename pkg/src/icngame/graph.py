"""Contention graphs and their feasible transmission states.

Links are identified externally by ids ``1..n``.  Internally link ``i`` maps
to bit ``i - 1`` of an integer mask, so a state (a set of links transmitting
together) is a single non-negative integer.  The 3-link chain ``1-2-3`` has
the states ``0b000, 0b001, 0b010, 0b100, 0b101``, i.e. the empty set,
``{1}``, ``{2}``, ``{3}`` and ``{1, 3}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

MAX_ENUMERATION_LINKS = 24


class GraphError(ValueError):
    """Raised for malformed contention graphs."""


@dataclass(frozen=True)
class ContentionGraph:
    """Undirected conflict relation among ``n`` links.

    ``edges`` holds normalized pairs ``(i, j)`` with ``1 <= i < j <= n``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def neighbors(self, link: int) -> tuple[int, ...]:
        out = [j if i == link else i for i, j in self.edges if link in (i, j)]
        return tuple(sorted(out))

    @property
    def neighbor_masks(self) -> np.ndarray:
        """``masks[k]`` has bit ``b`` set when links ``k+1`` and ``b+1`` conflict."""
        masks = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            masks[i - 1] |= 1 << (j - 1)
            masks[j - 1] |= 1 << (i - 1)
        return masks

    def adjacent(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def new_graph(n: int, edges: Iterable[tuple[int, int]] = ()) -> ContentionGraph:
    """Build a validated contention graph.

    Raises
    ------
    GraphError
        On ``n < 1``, endpoints outside ``1..n`` or self-loops.
    """
    if int(n) != n or n < 1:
        raise GraphError(f"link count must be a positive integer, got {n!r}")
    n = int(n)
    normalized = set()
    for pair in edges:
        try:
            i, j = pair
        except (TypeError, ValueError):
            raise GraphError(f"edge {pair!r} is not a pair of link ids") from None
        if int(i) != i or int(j) != j:
            raise GraphError(f"edge {pair!r} has non-integer endpoints")
        i, j = int(i), int(j)
        for end in (i, j):
            if not 1 <= end <= n:
                raise GraphError(f"edge {pair!r} references link {end} outside 1..{n}")
        if i == j:
            raise GraphError(f"self-loop on link {i}")
        normalized.add((min(i, j), max(i, j)))
    return ContentionGraph(n, frozenset(normalized))


class Component(NamedTuple):
    """A connected piece of a graph.

    ``links[k]`` is the original id of local link ``k + 1``.
    """

    graph: ContentionGraph
    links: tuple[int, ...]


def connected_components(g: ContentionGraph) -> list[Component]:
    """Split ``g`` into connected sub-networks, ordered by smallest link id."""
    adj: dict[int, set[int]] = {k: set() for k in range(1, g.n + 1)}
    for i, j in g.edges:
        adj[i].add(j)
        adj[j].add(i)
    seen: set[int] = set()
    out = []
    for start in range(1, g.n + 1):
        if start in seen:
            continue
        stack, members = [start], set()
        while stack:
            k = stack.pop()
            if k in members:
                continue
            members.add(k)
            stack.extend(adj[k] - members)
        seen |= members
        links = tuple(sorted(members))
        local = {orig: pos + 1 for pos, orig in enumerate(links)}
        sub_edges = [(local[i], local[j]) for i, j in g.edges if i in local]
        out.append(Component(new_graph(len(links), sub_edges), links))
    return out


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Independent sets of a contention graph in ascending mask order.

    Attributes
    ----------
    n : int
        Number of links.
    states : ndarray of int64, shape (S,)
        Link-subset masks; ``states[0] == 0`` is the idle state.
    incidence : ndarray of float, shape (S, n)
        ``incidence[s, k] == 1.0`` when link ``k+1`` transmits in state ``s``.
    """

    n: int
    states: np.ndarray
    incidence: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    def index(self, mask: int) -> int:
        pos = int(np.searchsorted(self.states, mask))
        if pos >= len(self.states) or self.states[pos] != mask:
            raise KeyError(f"mask {mask:#b} is not a feasible state")
        return pos

    def __contains__(self, mask: int) -> bool:
        pos = int(np.searchsorted(self.states, mask))
        return pos < len(self.states) and int(self.states[pos]) == int(mask)

    def as_sets(self) -> list[frozenset[int]]:
        return [mask_to_links(int(m)) for m in self.states]

    def as_strings(self) -> list[str]:
        """States written ``s_1 s_2 ... s_n`` as in ``'101'`` for ``{1, 3}``."""
        return ["".join("1" if (int(m) >> k) & 1 else "0" for k in range(self.n))
                for m in self.states]


def mask_to_links(mask: int) -> frozenset[int]:
    return frozenset(k + 1 for k in range(mask.bit_length()) if (mask >> k) & 1)


def links_to_mask(links: Iterable[int]) -> int:
    mask = 0
    for k in links:
        mask |= 1 << (k - 1)
    return mask


def enumerate_states(g: ContentionGraph) -> StateSpace:
    """Enumerate all independent sets of ``g``, the empty set included.

    Links are added one at a time; a partial set is extended by link ``k``
    only when none of ``k``'s neighbors is already in it, so infeasible
    branches are never generated.

    Raises
    ------
    GraphError
        If ``g.n`` exceeds ``MAX_ENUMERATION_LINKS``.
    """
    if g.n > MAX_ENUMERATION_LINKS:
        raise GraphError(
            f"exact enumeration is capped at {MAX_ENUMERATION_LINKS} links, got {g.n}")
    nbr = g.neighbor_masks
    states = np.zeros(1, dtype=np.int64)
    for k in range(g.n):
        ok = states[(states & nbr[k]) == 0]
        states = np.concatenate([states, ok | np.int64(1 << k)])
    states.sort()
    bits = ((states[:, None] >> np.arange(g.n, dtype=np.int64)) & 1).astype(float)
    states.setflags(write=False)
    bits.setflags(write=False)
    return StateSpace(g.n, states, bits)
