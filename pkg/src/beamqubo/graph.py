"""Undirected simple graph plus the greedy independent-set heuristic.

The greedy heuristic repeatedly takes a minimum-degree vertex of the residual
graph, adds it to the independent set, and deletes it together with its
residual neighbors.  Ties in the degree argmin break toward the lowest vertex
index so experiments are reproducible.
"""
from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .errors import FormatError, ValidationError


class ProximityGraph:
    """Immutable undirected simple graph on vertices 0..n-1.

    Stores a dense symmetric boolean adjacency matrix; an edge-list view is
    available through :meth:`edges`.
    """

    def __init__(self, adjacency: np.ndarray):
        adj = np.asarray(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError("adjacency must be a square matrix")
        if np.any(np.diag(adj)):
            raise ValidationError("self-loops are not allowed")
        if not np.array_equal(adj, adj.T):
            raise ValidationError("adjacency must be symmetric")
        self._adj = adj
        self._adj.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "ProximityGraph":
        if n < 0:
            raise ValidationError("vertex count must be >= 0")
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValidationError(f"self-loop at vertex {i}")
            adj[i, j] = adj[j, i] = True
        return cls(adj)

    @property
    def n(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def degree(self, i: int) -> int:
        return int(self._adj[i].sum())

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._adj[i])

    def edges(self) -> list[tuple[int, int]]:
        """Edge list with i < j, sorted lexicographically."""
        ii, jj = np.nonzero(np.triu(self._adj, 1))
        return list(zip(ii.tolist(), jj.tolist()))

    def complement(self) -> "ProximityGraph":
        adj = ~self._adj
        adj = adj.copy()
        np.fill_diagonal(adj, False)
        return ProximityGraph(adj)

    def __eq__(self, other) -> bool:
        return isinstance(other, ProximityGraph) and np.array_equal(self._adj, other._adj)

    def __repr__(self) -> str:
        return f"ProximityGraph(n={self.n}, m={len(self.edges())})"


def _check_subset(g: ProximityGraph, s: Iterable[int]) -> list[int]:
    verts = list(s)
    for v in verts:
        if not 0 <= v < g.n:
            raise ValidationError(f"vertex {v} out of range for n={g.n}")
    return verts


def is_independent(g: ProximityGraph, s: Iterable[int]) -> bool:
    """True iff no edge of g has both endpoints in s."""
    verts = _check_subset(g, s)
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            if g.has_edge(verts[a], verts[b]):
                return False
    return True


def is_clique(g: ProximityGraph, s: Iterable[int]) -> bool:
    """True iff every pair of vertices in s is adjacent."""
    verts = _check_subset(g, s)
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            if not g.has_edge(verts[a], verts[b]):
                return False
    return True


def greedy_independent_set(g: ProximityGraph) -> list[int]:
    """Greedy independent set by repeated minimum residual degree.

    Returns selected vertices in selection order.  Degrees are recomputed on
    the residual graph each iteration; argmin ties break to the lowest index.
    """
    alive = np.ones(g.n, dtype=bool)
    adj = g.adjacency
    chosen: list[int] = []
    while alive.any():
        deg = (adj & alive[None, :])[alive].sum(axis=1)
        candidates = np.flatnonzero(alive)
        v = int(candidates[int(np.argmin(deg))])
        chosen.append(v)
        alive[v] = False
        alive[adj[v]] = False
    return chosen


def write_edge_list(g: ProximityGraph) -> str:
    """Serialize to the edge-list text format: `n` on line 1, then `i j` lines."""
    lines = [str(g.n)]
    lines.extend(f"{i} {j}" for i, j in g.edges())
    return "\n".join(lines) + "\n"


def read_edge_list(text: str) -> ProximityGraph:
    """Parse the edge-list text format produced by :func:`write_edge_list`."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise FormatError("empty edge-list document")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise FormatError(f"first line must be the vertex count, got {lines[0]!r}") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise FormatError(f"expected 'i j' pair, got {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    try:
        return ProximityGraph.from_edges(n, edges)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc
