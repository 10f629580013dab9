"""Clique-cover QUBO for beam placement.

Problem: choose active beams (z_b) and a user-to-beam assignment (a_ib)
minimizing the number of active beams, subject to

  C1  every user sits in exactly one beam,
  C2  users may only sit in active beams,
  C3  users sharing a beam must be adjacent in the proximity graph,
  C4  no beam serves more than W users.

C4 is turned into an equality with binary slack bits s_bw of weight
w = 1..W, and all constraints become quadratic penalties scaled by a factor
``lam`` (default B+1, large enough that any violation costs more than the
whole objective can gain).  The decision vector is laid out as

    x = [a-block | z-block | s-block]

with the a-block grouped by beam (users contiguous within a beam) and the
slack block grouped by beam (weights 1..W contiguous).  Penalty expansion
constants are folded into the matrix offset, so the energy of a feasible
vector equals its active-beam count exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CapacityError, FormatError, ValidationError
from .graph import ProximityGraph

DEFAULT_MAX_VARIABLES = 100_000


@dataclass(frozen=True)
class ProblemInstance:
    """Proximity graph plus beam budget B and per-beam capacity W."""

    graph: ProximityGraph
    B: int
    W: int

    def __post_init__(self):
        if self.graph.n < 1:
            raise ValidationError("instance needs at least one user")
        if self.B < 1:
            raise ValidationError("beam budget B must be >= 1")
        if self.W < 1:
            raise ValidationError("beam capacity W must be >= 1")

    @property
    def N(self) -> int:
        return self.graph.n


def qubit_count(N: int, B: int, W: int) -> int:
    """Number of binary variables: N*B assignments + B indicators + W*B slacks."""
    if N < 1 or B < 1 or W < 1:
        raise ValidationError("N, B, W must all be >= 1")
    return N * B + B + W * B


@dataclass(frozen=True)
class VariableLayout:
    """Index map for the flat decision vector x = [a-block, z-block, s-block]."""

    N: int
    B: int
    W: int

    @property
    def size(self) -> int:
        return qubit_count(self.N, self.B, self.W)

    def a_index(self, i: int, b: int) -> int:
        """Assignment bit of user i (0-based) in beam b (0-based)."""
        if not (0 <= i < self.N and 0 <= b < self.B):
            raise ValidationError(f"a({i},{b}) out of range")
        return b * self.N + i

    def z_index(self, b: int) -> int:
        """Activity bit of beam b (0-based)."""
        if not 0 <= b < self.B:
            raise ValidationError(f"z({b}) out of range")
        return self.N * self.B + b

    def s_index(self, b: int, w: int) -> int:
        """Slack bit of weight w (1..W) for beam b (0-based)."""
        if not (0 <= b < self.B and 1 <= w <= self.W):
            raise ValidationError(f"s({b},{w}) out of range")
        return self.N * self.B + self.B + b * self.W + (w - 1)


def _coalesce(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray):
    """Sort entries lexicographically by (row, col), merge duplicates, drop zeros."""
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        new_group = np.empty(rows.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new_group)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return rows, cols, vals


class QuboMatrix:
    """Upper-triangular sparse quadratic form plus a constant offset.

    Energy of a bit vector x is  offset + sum_{i<=j} Q_ij x_i x_j.  Entries
    are kept as parallel arrays sorted by (row, col); the map view is
    available through :meth:`items` / :meth:`to_dict`.
    """

    def __init__(self, size: int, rows: np.ndarray, cols: np.ndarray,
                 vals: np.ndarray, offset: float = 0.0):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValidationError("rows, cols, vals must have equal length")
        if rows.size and (rows.min() < 0 or cols.max() >= size):
            raise ValidationError("entry index out of range")
        if np.any(rows > cols):
            raise ValidationError("matrix must be upper-triangular (row <= col)")
        if not np.isfinite(offset):
            raise ValidationError("offset must be finite")
        self.size = int(size)
        self.rows, self.cols, self.vals = _coalesce(rows, cols, vals)
        self.offset = float(offset)
        for arr in (self.rows, self.cols, self.vals):
            arr.setflags(write=False)

    @classmethod
    def from_dict(cls, size: int, entries: dict[tuple[int, int], float],
                  offset: float = 0.0) -> "QuboMatrix":
        if entries:
            rr, cc = zip(*entries.keys())
            vv = list(entries.values())
        else:
            rr, cc, vv = [], [], []
        return cls(size, np.array(rr, dtype=np.int64), np.array(cc, dtype=np.int64),
                   np.array(vv, dtype=np.float64), offset)

    def items(self):
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()):
            yield (r, c), v

    def to_dict(self) -> dict[tuple[int, int], float]:
        return dict(self.items())

    @property
    def num_entries(self) -> int:
        return self.rows.size

    def max_abs_coefficient(self) -> float:
        return float(np.abs(self.vals).max()) if self.vals.size else 0.0

    def dense(self) -> np.ndarray:
        """Dense upper-triangular matrix (oracle/debug use only)."""
        m = np.zeros((self.size, self.size))
        m[self.rows, self.cols] = self.vals
        return m

    def __repr__(self) -> str:
        return f"QuboMatrix(size={self.size}, entries={self.num_entries}, offset={self.offset})"


def _validate_bits(x, size: int) -> np.ndarray:
    bits = np.asarray(x)
    if bits.ndim != 1 or bits.shape[0] != size:
        raise ValidationError(f"bit vector length {bits.shape} does not match size {size}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValidationError("bit vector entries must be 0 or 1")
    return bits.astype(np.float64)


def energy(q: QuboMatrix, x) -> float:
    """offset + sum of Q_ij x_i x_j over stored entries."""
    bits = _validate_bits(x, q.size)
    return float(q.offset + np.dot(q.vals, bits[q.rows] * bits[q.cols]))


def build_qubo(inst: ProblemInstance, lam: float | None = None,
               max_variables: int = DEFAULT_MAX_VARIABLES
               ) -> tuple[QuboMatrix, VariableLayout]:
    """Assemble the penalized clique-cover QUBO for an instance.

    ``lam`` is the penalty weight on every constraint; the default B+1
    exceeds the largest possible objective value, so the global minimizer is
    always feasible when a feasible assignment exists.
    """
    N, B, W = inst.N, inst.B, inst.W
    if lam is None:
        lam = float(inst.B + 1)
    if lam <= 0:
        raise ValidationError("penalty weight must be positive")
    layout = VariableLayout(N, B, W)
    S = layout.size
    if S > max_variables:
        raise CapacityError(f"instance needs {S} variables, above the cap {max_variables}")

    a0 = 0                # a-block start: a(i,b) = b*N + i
    z0 = N * B            # z-block start
    s0 = N * B + B        # s-block start: s(b,w) = s0 + b*W + (w-1)

    parts_r: list[np.ndarray] = []
    parts_c: list[np.ndarray] = []
    parts_v: list[np.ndarray] = []

    def emit(r, c, v):
        parts_r.append(np.asarray(r, dtype=np.int64).ravel())
        parts_c.append(np.asarray(c, dtype=np.int64).ravel())
        parts_v.append(np.broadcast_to(np.asarray(v, dtype=np.float64),
                                       parts_r[-1].shape).ravel().copy())

    # Diagonals.  Assignment bits collect -1 (one-beam equality), +1 (activity
    # coupling) and 1-2W (capacity equality); the first two cancel.
    a_diag = np.arange(a0, a0 + N * B)
    emit(a_diag, a_diag, lam * (1.0 - 2.0 * W))
    z_diag = np.arange(z0, z0 + B)
    emit(z_diag, z_diag, 1.0)
    ww = np.arange(1, W + 1, dtype=np.float64)
    s_diag = np.arange(s0, s0 + W * B)
    emit(s_diag, s_diag, np.tile(lam * (ww * ww - 2.0 * W * ww), B))

    # Same user, two beams (one-beam equality cross terms).
    if B >= 2:
        b1, b2 = np.triu_indices(B, 1)
        ii = np.arange(N)
        r = (b1[None, :] * N + ii[:, None]).ravel()
        c = (b2[None, :] * N + ii[:, None]).ravel()
        emit(r, c, 2.0 * lam)

    # Assignment-activity coupling: a_ib may not exceed z_b.
    r = np.arange(N * B)
    c = z0 + np.repeat(np.arange(B), N)
    emit(r, c, -lam)

    # Same beam, two users: capacity cross terms for every pair, plus the
    # complement-graph conflict penalty when the pair may not share a beam.
    if N >= 2:
        i1, i2 = np.triu_indices(N, 1)
        non_adj = (~inst.graph.adjacency[i1, i2]).astype(np.float64)
        pair_vals = 2.0 * lam * (1.0 + non_adj)
        for b in range(B):
            emit(b * N + i1, b * N + i2, pair_vals)

    # Assignment-slack and slack-slack capacity cross terms.
    ii = np.arange(N)
    for b in range(B):
        r = (b * N + ii)[:, None].repeat(W, axis=1).ravel()
        c = np.tile(s0 + b * W + np.arange(W), N)
        emit(r, c, np.tile(2.0 * lam * ww, N))
    if W >= 2:
        w1, w2 = np.triu_indices(W, 1)
        for b in range(B):
            emit(s0 + b * W + w1, s0 + b * W + w2, 2.0 * lam * ww[w1] * ww[w2])

    rows = np.concatenate(parts_r)
    cols = np.concatenate(parts_c)
    vals = np.concatenate(parts_v)
    offset = lam * (N + W * W * B)
    return QuboMatrix(S, rows, cols, vals, offset), layout


class Violation(NamedTuple):
    """One violated constraint instance: kind is 'C1'..'C4', where gives the indices."""

    constraint: str
    where: tuple[int, ...]


@dataclass(frozen=True)
class BeamSolution:
    """Decoded assignment: a (N x B), z (B), active-beam count, and violations."""

    assignment: np.ndarray
    active: np.ndarray
    objective: int
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations


def _violations(a: np.ndarray, z: np.ndarray, inst: ProblemInstance) -> tuple[Violation, ...]:
    out: list[Violation] = []
    adj = inst.graph.adjacency
    N, B = inst.N, inst.B
    for i in range(N):
        if int(a[i].sum()) != 1:
            out.append(Violation("C1", (i,)))
    for i in range(N):
        for b in range(B):
            if a[i, b] and not z[b]:
                out.append(Violation("C2", (i, b)))
    for b in range(B):
        members = np.flatnonzero(a[:, b])
        for p in range(len(members)):
            for r in range(p + 1, len(members)):
                i, j = int(members[p]), int(members[r])
                if not adj[i, j]:
                    out.append(Violation("C3", (i, j, b)))
    for b in range(B):
        if int(a[:, b].sum()) > inst.W:
            out.append(Violation("C4", (b,)))
    return tuple(out)


def check_feasibility(sol: BeamSolution, inst: ProblemInstance) -> tuple[Violation, ...]:
    """All violated constraint instances of the original problem."""
    a = np.asarray(sol.assignment, dtype=bool)
    z = np.asarray(sol.active, dtype=bool)
    if a.shape != (inst.N, inst.B) or z.shape != (inst.B,):
        raise ValidationError("solution dimensions do not match the instance")
    return _violations(a, z, inst)


def decode(x, layout: VariableLayout, inst: ProblemInstance) -> BeamSolution:
    """Split a flat bit vector into (a, z), count active beams, check feasibility.

    The instance is needed because the conflict constraint depends on the
    proximity graph, which the layout does not carry.
    """
    bits = _validate_bits(x, layout.size).astype(bool)
    if (layout.N, layout.B, layout.W) != (inst.N, inst.B, inst.W):
        raise ValidationError("layout does not match the instance")
    a = bits[: layout.N * layout.B].reshape(layout.B, layout.N).T
    z = bits[layout.N * layout.B: layout.N * layout.B + layout.B]
    return BeamSolution(
        assignment=a,
        active=z,
        objective=int(z.sum()),
        violations=_violations(a, z, inst),
    )


def feasible_bits(sol: BeamSolution, layout: VariableLayout) -> np.ndarray:
    """Full bit vector for a solution, slacks chosen to meet the capacity equality.

    Each beam gets a single slack bit at weight W - load (none when the beam
    is exactly full).  Only well-defined when every beam load is <= W.
    """
    x = np.zeros(layout.size, dtype=np.int8)
    a = np.asarray(sol.assignment, dtype=bool)
    z = np.asarray(sol.active, dtype=bool)
    for b in range(layout.B):
        for i in range(layout.N):
            if a[i, b]:
                x[layout.a_index(i, b)] = 1
        if z[b]:
            x[layout.z_index(b)] = 1
        residual = layout.W - int(a[:, b].sum())
        if residual < 0:
            raise ValidationError(f"beam {b} load exceeds capacity")
        if residual >= 1:
            x[layout.s_index(b, residual)] = 1
    return x


@dataclass(frozen=True)
class IsingModel:
    """Spin-model twin of a QUBO: biases per spin, couplers for i < j, offset."""

    biases: np.ndarray
    coupler_rows: np.ndarray
    coupler_cols: np.ndarray
    coupler_vals: np.ndarray
    offset: float

    @property
    def size(self) -> int:
        return self.biases.shape[0]


def qubo_to_ising(q: QuboMatrix) -> IsingModel:
    """Map bits to spins via s = 2x - 1.

    Biases get half the diagonal plus a quarter of each incident off-diagonal
    coefficient; couplers are a quarter of the off-diagonal coefficients.  The
    offset is set so both energies agree for every configuration.
    """
    f = np.zeros(q.size)
    diag_mask = q.rows == q.cols
    np.add.at(f, q.rows[diag_mask], 0.5 * q.vals[diag_mask])
    off_r, off_c, off_v = q.rows[~diag_mask], q.cols[~diag_mask], q.vals[~diag_mask]
    np.add.at(f, off_r, 0.25 * off_v)
    np.add.at(f, off_c, 0.25 * off_v)
    offset = q.offset + 0.5 * float(q.vals[diag_mask].sum()) + 0.25 * float(off_v.sum())
    return IsingModel(f, off_r.copy(), off_c.copy(), 0.25 * off_v, offset)


def ising_energy(m: IsingModel, s) -> float:
    """offset + sum f_i s_i + sum G_ij s_i s_j over spins in {-1, +1}."""
    spins = np.asarray(s, dtype=np.float64)
    if spins.shape != (m.size,):
        raise ValidationError(f"spin vector length {spins.shape} does not match {m.size}")
    if not np.all(np.abs(spins) == 1.0):
        raise ValidationError("spins must be -1 or +1")
    pair = np.dot(m.coupler_vals, spins[m.coupler_rows] * spins[m.coupler_cols])
    return float(m.offset + np.dot(m.biases, spins) + pair)


def condition(q: QuboMatrix, fixed: dict[int, int]) -> tuple[QuboMatrix, np.ndarray]:
    """Eliminate fixed variables from a QUBO, exactly.

    Cross terms between a variable fixed to 1 and a free variable fold into
    the free variable's linear coefficient; terms with both ends fixed fold
    into the offset; variables fixed to 0 simply vanish.  Returns the reduced
    matrix over the free variables plus ``free_map`` where ``free_map[new]``
    is the original index of free variable ``new``.
    """
    for k, v in fixed.items():
        if not 0 <= k < q.size:
            raise ValidationError(f"fixed variable {k} out of range")
        if v not in (0, 1):
            raise ValidationError(f"fixed value for {k} must be 0 or 1")
    fixed_vals = np.full(q.size, -1, dtype=np.int8)
    for k, v in fixed.items():
        fixed_vals[k] = v
    free_map = np.flatnonzero(fixed_vals < 0)
    new_index = np.full(q.size, -1, dtype=np.int64)
    new_index[free_map] = np.arange(free_map.size)

    r_fixed = fixed_vals[q.rows]
    c_fixed = fixed_vals[q.cols]
    both_free = (r_fixed < 0) & (c_fixed < 0)
    both_fixed = (r_fixed >= 0) & (c_fixed >= 0)
    row_only = (r_fixed >= 0) & (c_fixed < 0)
    col_only = (r_fixed < 0) & (c_fixed >= 0)

    offset = q.offset + float(np.dot(q.vals[both_fixed],
                                     (r_fixed[both_fixed] * c_fixed[both_fixed]).astype(np.float64)))

    linear = np.zeros(free_map.size)
    sel = row_only & (r_fixed == 1)
    np.add.at(linear, new_index[q.cols[sel]], q.vals[sel])
    sel = col_only & (c_fixed == 1)
    np.add.at(linear, new_index[q.rows[sel]], q.vals[sel])

    keep_r = new_index[q.rows[both_free]]
    keep_c = new_index[q.cols[both_free]]
    keep_v = q.vals[both_free]
    diag_idx = np.flatnonzero(linear != 0.0)
    rows = np.concatenate([keep_r, diag_idx])
    cols = np.concatenate([keep_c, diag_idx])
    vals = np.concatenate([keep_v, linear[diag_idx]])
    return QuboMatrix(free_map.size, rows, cols, vals, offset), free_map


def write_qubo_file(q: QuboMatrix) -> str:
    """Serialize to the text format: header `S offset`, then `i j value` lines."""
    lines = [f"{q.size} {q.offset!r}"]
    lines.extend(f"{r} {c} {v!r}" for (r, c), v in q.items())
    return "\n".join(lines) + "\n"


def read_qubo_file(text: str) -> QuboMatrix:
    """Parse the text format produced by :func:`write_qubo_file`."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise FormatError("empty QUBO document")
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError("header must be 'S offset'")
    try:
        size, offset = int(head[0]), float(head[1])
    except ValueError as exc:
        raise FormatError(f"bad header {lines[0]!r}") from exc
    rows, cols, vals = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise FormatError(f"expected 'i j value', got {ln!r}")
        try:
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            vals.append(float(parts[2]))
        except ValueError as exc:
            raise FormatError(f"bad entry line {ln!r}") from exc
    try:
        return QuboMatrix(size, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                          np.array(vals), offset)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc
