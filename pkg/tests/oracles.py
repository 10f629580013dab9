"""Independent reference implementations used to check the library.

Everything here is deliberately written from the problem statement, not from
the library code: exhaustive search over set partitions for optimal beam
counts, and dense matrix evaluation for energies.
"""
from __future__ import annotations

import numpy as np


def random_graph(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Symmetric irreflexive boolean adjacency with edge probability p."""
    upper = np.triu(rng.random((n, n)) < p, 1)
    return upper | upper.T


def is_clique_set(adj: np.ndarray, group: list[int]) -> bool:
    for a in range(len(group)):
        for b in range(a + 1, len(group)):
            if not adj[group[a], group[b]]:
                return False
    return True


def clique_cover_opt(adj: np.ndarray, W: int, B: int) -> int | None:
    """Minimum number of cliques of size <= W partitioning all vertices.

    Exhaustive branch and bound over set partitions; returns None when no
    partition with at most B blocks exists.
    """
    n = adj.shape[0]
    best: list[int | None] = [None]

    def recurse(v: int, groups: list[list[int]]):
        if best[0] is not None and len(groups) >= best[0]:
            return
        if v == n:
            best[0] = len(groups)
            return
        for g in groups:
            if len(g) < W and all(adj[v, u] for u in g):
                g.append(v)
                recurse(v + 1, groups)
                g.pop()
        if len(groups) < B:
            groups.append([v])
            recurse(v + 1, groups)
            groups.pop()

    recurse(0, [])
    return best[0]


def extension_opt(adj: np.ndarray, pre_users: list[int], W: int, B: int) -> int | None:
    """Minimum number of NEW beams completing a one-user-per-beam pre-assignment.

    Remaining users may join a pre-assigned beam (staying a clique within
    capacity) or new beams; at most B beams in total may be used.  Returns
    None if no completion exists.
    """
    n = adj.shape[0]
    rest = [v for v in range(n) if v not in set(pre_users)]
    best: list[int | None] = [None]

    def recurse(idx: int, pre_groups: list[list[int]], new_groups: list[list[int]]):
        if best[0] is not None and len(new_groups) >= best[0]:
            return
        if idx == len(rest):
            best[0] = len(new_groups)
            return
        v = rest[idx]
        for g in pre_groups:
            if len(g) < W and all(adj[v, u] for u in g):
                g.append(v)
                recurse(idx + 1, pre_groups, new_groups)
                g.pop()
        for g in new_groups:
            if len(g) < W and all(adj[v, u] for u in g):
                g.append(v)
                recurse(idx + 1, pre_groups, new_groups)
                g.pop()
        if len(pre_groups) + len(new_groups) < B:
            new_groups.append([v])
            recurse(idx + 1, pre_groups, new_groups)
            new_groups.pop()

    recurse(0, [[u] for u in pre_users], [])
    return best[0]


def dense_energy(q, x) -> float:
    """Re-evaluate a QUBO energy through the dense matrix, independently."""
    bits = np.asarray(x, dtype=np.float64)
    m = q.dense()
    return float(q.offset + bits @ m @ bits)


def all_bitstrings(S: int):
    """Yield all length-S bit vectors, lexicographically."""
    for v in range(2 ** S):
        yield np.array([(v >> (S - 1 - k)) & 1 for k in range(S)], dtype=np.int8)


def bitstring_matrix(S: int) -> np.ndarray:
    """All length-S bit vectors as rows, lexicographic order."""
    v = np.arange(2 ** S, dtype=np.int64)
    return ((v[:, None] >> (S - 1 - np.arange(S))) & 1).astype(np.float64)


def exhaustive_energies(q) -> np.ndarray:
    """Energy of every bit vector via the dense matrix (row i = bitstring i)."""
    X = bitstring_matrix(q.size)
    m = q.dense()
    return q.offset + np.einsum("ij,jk,ik->i", X, m, X)


def violations_reference(a: np.ndarray, z: np.ndarray, adj: np.ndarray, W: int):
    """Direct restatement of the four feasibility constraints."""
    N, B = a.shape
    out = []
    for i in range(N):
        if a[i].sum() != 1:
            out.append(("C1", (i,)))
    for i in range(N):
        for b in range(B):
            if a[i, b] and not z[b]:
                out.append(("C2", (i, b)))
    for b in range(B):
        users = [i for i in range(N) if a[i, b]]
        for s in range(len(users)):
            for t in range(s + 1, len(users)):
                if not adj[users[s], users[t]]:
                    out.append(("C3", (users[s], users[t], b)))
    for b in range(B):
        if a[:, b].sum() > W:
            out.append(("C4", (b,)))
    return out
