"""Two-step variable presolve and reduced-Hamiltonian construction.

Step 1 pre-assigns a greedy independent set to distinct beams: those users
can never share a beam, so the pre-assignment costs nothing in optimality.
Step 2 solves a linear relaxation of the residual assignment problem and
freezes every variable the relaxation makes integral.  What survives - the
unassigned users, a handful of candidate new beams, and the slack bits of
partially filled active beams - becomes a small QUBO obtained by exact
conditioning of the full matrix.

The residual LP treats the untouched beams as interchangeable: an optimal
solution can always be symmetrized over them, so they collapse into a single
aggregate beam column without changing the optimum.  Pairwise conflict rows
are generated lazily, since almost all of them are slack at the optimum.
Both reductions are exact; tests compare them against the plain formulation.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, LpInfeasibleError, ValidationError
from .graph import greedy_independent_set
from .qubo import (
    BeamSolution,
    ProblemInstance,
    QuboMatrix,
    VariableLayout,
    build_qubo,
    condition,
    decode,
)
from .simplex import LinearProgram, lp_solve

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class PresolveState:
    """Outcome of the two-step presolve.

    Beams are re-indexed so the active ones occupy 0..num_active-1 (the
    independent-set beams first, then beams activated by the relaxation).
    ``residual_capacity`` maps an active beam to its remaining room, only for
    beams that are not full.  ``extra_beam_budget`` is how many further beams
    the reduced problem may still activate.
    """

    independent_set: tuple[int, ...]
    assigned: dict[int, int]
    num_active: int
    unassigned: tuple[int, ...]
    residual_capacity: dict[int, int]
    lp_lower_bound: float
    extra_beam_budget: int

    @property
    def fully_assigned(self) -> bool:
        return not self.unassigned


def build_p1_lp(inst: ProblemInstance) -> tuple[LinearProgram, int]:
    """Plain linear relaxation of the full beam-placement problem.

    Variables are a(i,b) at column i*B+b and z(b) at column N*B+b.  Returns
    the LP and the z-block offset.  Assignment upper bounds are implied by
    the per-user equality rows, so no explicit bound rows are added for them.
    """
    N, B, W = inst.N, inst.B, inst.W
    nv = N * B + B
    lp = LinearProgram(nv)
    c = np.zeros(nv)
    c[N * B:] = 1.0
    lp.set_objective(c)
    for i in range(N):
        for b in range(B):
            lp.set_upper(i * B + b, None)
    for i in range(N):
        lp.add_row({i * B + b: 1.0 for b in range(B)}, "==", 1.0, f"C1[{i}]")
    for i in range(N):
        for b in range(B):
            lp.add_row({i * B + b: 1.0, N * B + b: -1.0}, "<=", 0.0, f"C2[{i},{b}]")
    comp = ~inst.graph.adjacency
    for i in range(N):
        for j in range(i + 1, N):
            if comp[i, j]:
                for b in range(B):
                    lp.add_row({i * B + b: 1.0, j * B + b: 1.0}, "<=", 1.0,
                               f"C3[{i},{j},{b}]")
    for b in range(B):
        lp.add_row({i * B + b: 1.0 for i in range(N)}, "<=", float(W), f"C4[{b}]")
    return lp, N * B


def solve_p1_lp(inst: ProblemInstance) -> float:
    """Optimal value of the plain relaxation (a weak but valid lower bound)."""
    lp, _ = build_p1_lp(inst)
    _, obj = lp_solve(lp)
    return obj


@dataclass
class _ResidualLpResult:
    """Relaxation values mapped back to (remaining user, beam) space."""

    remaining: list[int]
    pre_values: np.ndarray      # (R, P): assignment into independent-set beams
    new_values: np.ndarray      # (R, M): assignment into fresh beams
    new_z: np.ndarray           # (M,): activity of fresh beams
    objective: float            # total active-beam value incl. the P fixed beams


def _residual_lp_aggregated(inst: ProblemInstance, pre_users: list[int]
                            ) -> _ResidualLpResult:
    """Solve the residual relaxation with the fresh beams aggregated.

    Fresh beams are pairwise interchangeable, so averaging any optimum over
    their permutations yields an equal-value solution where they all carry
    identical values; one aggregate column per user plus one shared activity
    variable represents them exactly.  Conflict rows are added lazily.

    The relaxation's optima systematically spread assignment mass: the only
    coupling between activity and assignment is z_b >= a_ib, so smearing a
    user over all fresh beams costs max-mass rather than total mass, and
    with hundreds of fresh beams an optimal vertex pins almost no user at 1.
    The bound is therefore taken from this solve, while the values used for
    rounding come from a second, unpinned solve that maximizes assignment
    mass into the pre-assigned beams under the same feasibility rows, with
    strictly decreasing per-user weights so the maximizer concentrates users
    one by one instead of sharing capacity fractionally.
    """
    adj = inst.graph.adjacency
    W = inst.W
    P = len(pre_users)
    remaining = [v for v in range(inst.N) if v not in set(pre_users)]
    R = len(remaining)
    M = inst.B - P

    allowed = np.zeros((R, P), dtype=bool)
    if W - 1 >= 1:
        for r, u in enumerate(remaining):
            for k, p in enumerate(pre_users):
                allowed[r, k] = adj[u, p]

    pre_col = -np.ones((R, P), dtype=np.int64)
    col = 0
    for r in range(R):
        for k in range(P):
            if allowed[r, k]:
                pre_col[r, k] = col
                col += 1
    n_pre_vars = col
    alpha_col = -np.ones(R, dtype=np.int64)
    zeta_col = -1
    if M >= 1:
        for r in range(R):
            alpha_col[r] = col
            col += 1
        zeta_col = col
        col += 1
    nv = col
    if nv == 0:
        raise LpInfeasibleError(
            "no admissible beam for any remaining user", row_name="C1")

    # non-adjacent remaining pairs drive the lazily generated conflict rows
    pair_p: list[int] = []
    pair_q: list[int] = []
    for p in range(R):
        for q in range(p + 1, R):
            if not adj[remaining[p], remaining[q]]:
                pair_p.append(p)
                pair_q.append(q)
    pp = np.array(pair_p, dtype=np.int64)
    qq = np.array(pair_q, dtype=np.int64)

    conflict_rows: list[tuple[dict[int, float], str]] = []
    max_rounds = len(pair_p) * (P + 1) + 2

    def build(objective: np.ndarray) -> LinearProgram:
        lp = LinearProgram(nv)
        lp.set_objective(objective)
        for j in range(nv):
            lp.set_upper(j, None)
        if M >= 1:
            lp.set_upper(zeta_col, 1.0)
        for r in range(R):
            coeffs = {int(pre_col[r, k]): 1.0 for k in range(P) if pre_col[r, k] >= 0}
            if M >= 1:
                coeffs[int(alpha_col[r])] = float(M)
            lp.add_row(coeffs, "==", 1.0, f"C1[{remaining[r]}]")
        if M >= 1:
            for r in range(R):
                lp.add_row({int(alpha_col[r]): 1.0, zeta_col: -1.0}, "<=", 0.0,
                           f"C2[{remaining[r]}]")
        for k in range(P):
            cols = [int(pre_col[r, k]) for r in range(R) if pre_col[r, k] >= 0]
            if cols:
                lp.add_row({cidx: 1.0 for cidx in cols}, "<=", float(W - 1),
                           f"C4[pre{k}]")
        if M >= 1:
            lp.add_row({int(alpha_col[r]): 1.0 for r in range(R)}, "<=", float(W),
                       "C4[new]")
        for coeffs, name in conflict_rows:
            lp.add_row(coeffs, "<=", 1.0, name)
        return lp

    def extract(values: np.ndarray):
        pre_values = np.zeros((R, P))
        mask = pre_col >= 0
        pre_values[mask] = values[pre_col[mask]]
        alpha = values[alpha_col] if M >= 1 else np.zeros(R)
        zeta = float(values[zeta_col]) if M >= 1 else 0.0
        return pre_values, alpha, zeta

    def violated(pre_values: np.ndarray, alpha: np.ndarray):
        rows: list[tuple[dict[int, float], str]] = []
        if not pp.size:
            return rows
        for k in range(P):
            bad = np.flatnonzero(
                (pre_values[pp, k] + pre_values[qq, k] > 1.0 + 1e-9)
                & (pre_col[pp, k] >= 0) & (pre_col[qq, k] >= 0))
            for t in bad:
                p, q = int(pp[t]), int(qq[t])
                rows.append(({int(pre_col[p, k]): 1.0, int(pre_col[q, k]): 1.0},
                             f"C3[{remaining[p]},{remaining[q]},pre{k}]"))
        if M >= 1:
            bad = np.flatnonzero(alpha[pp] + alpha[qq] > 1.0 + 1e-9)
            for t in bad:
                p, q = int(pp[t]), int(qq[t])
                rows.append(({int(alpha_col[p]): 1.0, int(alpha_col[q]): 1.0},
                             f"C3[{remaining[p]},{remaining[q]},new]"))
        return rows

    def solve_lazily(objective: np.ndarray):
        for _ in range(max_rounds):
            values, obj = lp_solve(build(objective))
            pre_values, alpha, zeta = extract(values)
            rows = violated(pre_values, alpha)
            if not rows:
                return pre_values, alpha, zeta, obj
            conflict_rows.extend(rows)
        raise LpInfeasibleError("conflict row generation failed to converge")

    # phase 1: the exact bound
    c1 = np.zeros(nv)
    if M >= 1:
        c1[zeta_col] = float(M)
    pre_values, alpha, zeta, bound = solve_lazily(c1)

    # phase 2: feasible point used for rounding; strictly decreasing weights
    # make the maximizer fill pre-assigned beams user by user
    if n_pre_vars:
        c2 = np.zeros(nv)
        for r in range(R):
            for k in range(P):
                if pre_col[r, k] >= 0:
                    c2[pre_col[r, k]] = -(1.0 + (R - r) / (R + 1.0))
        pre_values, alpha, zeta, _ = solve_lazily(c2)

    new_values = np.repeat(alpha[:, None], max(M, 0), axis=1)
    new_z = np.full(max(M, 0), zeta)
    return _ResidualLpResult(remaining, pre_values, new_values, new_z,
                             float(P) + bound)


def _residual_lp_full(inst: ProblemInstance, pre_users: list[int]
                      ) -> _ResidualLpResult:
    """Residual relaxation with one explicit column per (user, beam) pair.

    Reference formulation used on small instances to cross-check the
    aggregated solver; all conflict rows are present from the start.
    """
    adj = inst.graph.adjacency
    W, B = inst.W, inst.B
    P = len(pre_users)
    remaining = [v for v in range(inst.N) if v not in set(pre_users)]
    R = len(remaining)
    M = B - P

    nv = R * B + M
    if nv == 0:
        raise LpInfeasibleError("no variables in residual relaxation", row_name="C1")
    a_col = lambda r, b: r * B + b
    z_col = lambda t: R * B + t  # fresh beam P + t

    lp = LinearProgram(nv)
    c = np.zeros(nv)
    for t in range(M):
        c[z_col(t)] = 1.0
    lp.set_objective(c)
    for r in range(R):
        for b in range(B):
            lp.set_upper(a_col(r, b), None)

    for r in range(R):
        lp.add_row({a_col(r, b): 1.0 for b in range(B)}, "==", 1.0,
                   f"C1[{remaining[r]}]")
    for r in range(R):
        for t in range(M):
            lp.add_row({a_col(r, P + t): 1.0, z_col(t): -1.0}, "<=", 0.0,
                       f"C2[{remaining[r]},{P + t}]")
    for r in range(R):
        for k in range(P):
            if not adj[remaining[r], pre_users[k]]:
                lp.add_row({a_col(r, k): 1.0}, "<=", 0.0,
                           f"C3[{remaining[r]},pre{k}]")
    for p in range(R):
        for q in range(p + 1, R):
            if not adj[remaining[p], remaining[q]]:
                for b in range(B):
                    lp.add_row({a_col(p, b): 1.0, a_col(q, b): 1.0}, "<=", 1.0,
                               f"C3[{remaining[p]},{remaining[q]},{b}]")
    for k in range(P):
        lp.add_row({a_col(r, k): 1.0 for r in range(R)}, "<=", float(W - 1),
                   f"C4[pre{k}]")
    for t in range(M):
        lp.add_row({a_col(r, P + t): 1.0 for r in range(R)}, "<=", float(W),
                   f"C4[{P + t}]")

    values, lp_obj = lp_solve(lp)
    pre_values = np.array([[values[a_col(r, k)] for k in range(P)] for r in range(R)]
                          ).reshape(R, P)
    new_values = np.array([[values[a_col(r, P + t)] for t in range(M)] for r in range(R)]
                          ).reshape(R, M)
    new_z = np.array([values[z_col(t)] for t in range(M)])
    return _ResidualLpResult(remaining, pre_values, new_values, new_z,
                             float(P) + lp_obj)


def presolve(inst: ProblemInstance, aggregate: bool = True) -> PresolveState:
    """Run both presolve steps and freeze everything the relaxation decides.

    A remaining user counts as assigned when some assignment value is within
    1e-6 of 1 and the receiving beam's activity is within 1e-6 of 1; exact
    integrality is not attainable from floating-point LP solutions.
    """
    mis = greedy_independent_set(inst.graph)
    if len(mis) > inst.B:
        raise LpInfeasibleError(
            f"independent set of size {len(mis)} exceeds the beam budget {inst.B}",
            row_name="preassignment")
    P = len(mis)
    assigned = {user: k for k, user in enumerate(mis)}
    remaining = [v for v in range(inst.N) if v not in assigned]

    if not remaining:
        residual = {k: inst.W - 1 for k in range(P) if inst.W - 1 > 0}
        return PresolveState(
            independent_set=tuple(mis),
            assigned=assigned,
            num_active=P,
            unassigned=(),
            residual_capacity=residual,
            lp_lower_bound=float(P),
            extra_beam_budget=0,
        )

    solver = _residual_lp_aggregated if aggregate else _residual_lp_full
    res = solver(inst, mis)

    tol = INTEGRALITY_TOL
    M = inst.B - P
    active_new = [t for t in range(M) if res.new_z[t] >= 1.0 - tol]
    new_beam_index = {t: P + rank for rank, t in enumerate(active_new)}

    unassigned: list[int] = []
    for r, user in enumerate(res.remaining):
        target = None
        for k in range(P):
            if res.pre_values[r, k] >= 1.0 - tol:
                target = k
                break
        if target is None:
            for t in range(M):
                if res.new_values[r, t] >= 1.0 - tol and t in new_beam_index:
                    target = new_beam_index[t]
                    break
        if target is None:
            unassigned.append(user)
        else:
            assigned[user] = target

    num_active = P + len(active_new)
    loads = {b: 0 for b in range(num_active)}
    for _, b in assigned.items():
        loads[b] += 1
    residual = {b: inst.W - load for b, load in loads.items() if inst.W - load > 0}
    return PresolveState(
        independent_set=tuple(mis),
        assigned=assigned,
        num_active=num_active,
        unassigned=tuple(unassigned),
        residual_capacity=residual,
        lp_lower_bound=res.objective,
        extra_beam_budget=min(inst.B - num_active, len(unassigned)),
    )


@dataclass(frozen=True)
class ReducedHamiltonian:
    """Conditioned QUBO over the surviving variables.

    ``free_map[new]`` is the original flat index of free variable ``new``;
    ``base_bits`` holds the frozen values (free positions zeroed).
    ``new_beams`` are the candidate fresh beams whose slack bits were
    eliminated; under the analytic slack mode their capacity-equality slacks
    are reconstructed at merge time instead of being pinned to zero.
    """

    qubo: QuboMatrix
    free_map: np.ndarray
    base_bits: np.ndarray
    layout: VariableLayout
    new_beams: tuple[int, ...]
    analytic_slack: bool
    penalty: float

    @property
    def size(self) -> int:
        return int(self.free_map.size)


def _free_indices(state: PresolveState, layout: VariableLayout,
                  allow_active_beam_join: bool) -> list[int]:
    free: list[int] = []
    new_beams = range(state.num_active, state.num_active + state.extra_beam_budget)
    for b in new_beams:
        free.append(layout.z_index(b))
    for i in state.unassigned:
        for b in new_beams:
            free.append(layout.a_index(i, b))
    if allow_active_beam_join:
        for b in sorted(state.residual_capacity):
            for i in state.unassigned:
                free.append(layout.a_index(i, b))
    for b in sorted(state.residual_capacity):
        for w in range(1, state.residual_capacity[b] + 1):
            free.append(layout.s_index(b, w))
    return sorted(free)


def free_variable_count(state: PresolveState, inst: ProblemInstance,
                        allow_active_beam_join: bool = False) -> int:
    """Size of the reduced Hamiltonian this state would produce (0 if fully solved)."""
    if state.fully_assigned:
        return 0
    layout = VariableLayout(inst.N, inst.B, inst.W)
    return len(_free_indices(state, layout, allow_active_beam_join))


def base_assignment_bits(state: PresolveState, layout: VariableLayout) -> np.ndarray:
    """Frozen part of the decision vector: assignments, activity, zero slacks."""
    bits = np.zeros(layout.size, dtype=np.int8)
    for user, b in state.assigned.items():
        bits[layout.a_index(user, b)] = 1
    for b in range(state.num_active):
        bits[layout.z_index(b)] = 1
    return bits


def build_reduced_hamiltonian(state: PresolveState, inst: ProblemInstance,
                              qubo: QuboMatrix | None = None,
                              layout: VariableLayout | None = None,
                              lam: float | None = None,
                              allow_active_beam_join: bool = False,
                              max_free_variables: int | None = None,
                              analytic_slack: bool = True
                              ) -> ReducedHamiltonian:
    """Condition the full QUBO on everything the presolve froze.

    Free variables: activity and assignment bits of the candidate new beams,
    plus the slack bits covering each partially filled active beam's
    remaining room.  With ``allow_active_beam_join`` unassigned users may
    additionally enter those partially filled beams.  Must not be called on
    a fully assigned state.

    The eliminated slack bits of the candidate new beams are handled in one
    of two ways.  With ``analytic_slack`` (default) they are minimized out
    exactly: the beams' capacity-equality penalty vanishes for any load up
    to W, and merging reconstructs the minimizing slack bits, so capacity on
    those beams rests on the assumption that the unassigned users' cliques
    fit it (violations surface as infeasible merged solutions).  With
    ``analytic_slack=False`` the bits are pinned to zero instead, which
    keeps plain conditioning semantics but leaves a residual penalty that
    rewards spreading users across every candidate beam.
    """
    if state.fully_assigned:
        raise ValidationError("instance fully presolved; nothing to reduce")
    if qubo is None or layout is None:
        qubo, layout = build_qubo(inst, lam)
    if lam is None:
        lam = float(inst.B + 1)
    free = _free_indices(state, layout, allow_active_beam_join)
    if max_free_variables is not None and len(free) > max_free_variables:
        raise CapacityError(
            f"reduced Hamiltonian needs {len(free)} free variables, "
            f"above the configured annealer capacity {max_free_variables}")
    base = base_assignment_bits(state, layout)
    free_set = set(free)
    fixed = {idx: int(base[idx]) for idx in range(layout.size) if idx not in free_set}
    reduced, free_map = condition(qubo, fixed)
    new_beams = tuple(range(state.num_active,
                            state.num_active + state.extra_beam_budget))
    if analytic_slack:
        reduced = _drop_new_beam_capacity_terms(reduced, free_map, layout, state,
                                                new_beams, lam)
    return ReducedHamiltonian(reduced, free_map, base, layout, new_beams,
                              analytic_slack, lam)


def _drop_new_beam_capacity_terms(reduced: QuboMatrix, free_map: np.ndarray,
                                  layout: VariableLayout, state: PresolveState,
                                  new_beams: tuple[int, ...], lam: float) -> QuboMatrix:
    """Subtract the capacity-equality penalty of the slackless fresh beams.

    Equivalent to minimizing the eliminated slack bits out of the full
    matrix, exactly, for every load up to W.
    """
    to_reduced = {int(orig): idx for idx, orig in enumerate(free_map)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    W = layout.W
    users = sorted(state.unassigned)
    offset = reduced.offset
    for b in new_beams:
        offset -= lam * W * W
        a_cols = [to_reduced[layout.a_index(i, b)] for i in users]
        for p, cp in enumerate(a_cols):
            rows.append(cp)
            cols.append(cp)
            vals.append(-lam * (1.0 - 2.0 * W))
            for cq in a_cols[p + 1:]:
                rows.append(min(cp, cq))
                cols.append(max(cp, cq))
                vals.append(-2.0 * lam)
    rows_all = np.concatenate([reduced.rows, np.array(rows, dtype=np.int64)])
    cols_all = np.concatenate([reduced.cols, np.array(cols, dtype=np.int64)])
    vals_all = np.concatenate([reduced.vals, np.array(vals)])
    return QuboMatrix(reduced.size, rows_all, cols_all, vals_all, offset)


def merge_bits(reduction: ReducedHamiltonian, sample) -> np.ndarray:
    """Full decision vector for a sample: frozen values, sample values, slacks.

    Under the analytic slack mode each fresh beam gets the slack bit that
    restores its capacity equality (none when the beam is full or overfull).
    """
    bits = np.asarray(sample)
    if bits.shape != (reduction.size,):
        raise ValidationError(
            f"sample length {bits.shape} does not match {reduction.size} free variables")
    x = reduction.base_bits.copy()
    x[reduction.free_map] = bits
    if reduction.analytic_slack:
        layout = reduction.layout
        for b in reduction.new_beams:
            load = int(sum(x[layout.a_index(i, b)] for i in range(layout.N)))
            w = layout.W - load
            if 1 <= w <= layout.W:
                x[layout.s_index(b, w)] = 1
    return x


def merge(reduction: ReducedHamiltonian, sample, inst: ProblemInstance) -> BeamSolution:
    """Recombine an annealer sample with the frozen variables and decode it."""
    return decode(merge_bits(reduction, sample), reduction.layout, inst)


def presolve_report(state: PresolveState, inst: ProblemInstance,
                    allow_active_beam_join: bool = False) -> str:
    """Human-readable presolve summary consumed by the harness and CLI."""
    layout = VariableLayout(inst.N, inst.B, inst.W)
    total = layout.size
    if state.fully_assigned:
        free = 0
    else:
        free = len(_free_indices(state, layout, allow_active_beam_join))
    out = io.StringIO()
    out.write(f"users:                {inst.N}\n")
    out.write(f"independent set:      {len(state.independent_set)}\n")
    out.write(f"assigned users:       {len(state.assigned)}\n")
    out.write(f"unassigned users:     {len(state.unassigned)}\n")
    out.write(f"active beams:         {state.num_active}\n")
    out.write(f"extra beam budget:    {state.extra_beam_budget}\n")
    out.write(f"residual capacities:  "
              f"{ {b: w for b, w in sorted(state.residual_capacity.items())} }\n")
    out.write(f"lp lower bound:       {state.lp_lower_bound:.6f}\n")
    out.write(f"variables:            {total}\n")
    out.write(f"free after presolve:  {free}\n")
    out.write(f"reduction ratio:      {1.0 - free / total:.6f}\n")
    return out.getvalue()
