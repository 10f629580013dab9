"""Dense two-phase primal simplex for small linear programs.

Variables live in [0, u] with u = 1 by default; an upper bound of ``None``
means the caller guarantees the bound is implied by other constraints (the
beam-assignment LPs imply a <= 1 through their assignment equalities), so no
explicit bound row is generated for it.

Pivoting uses Dantzig's rule until a long degenerate streak is detected, then
falls back to Bland's rule, which cannot cycle.  All tie-breaks are by lowest
index, so solves are deterministic.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    LpInfeasibleError,
    LpIterationLimitError,
    LpUnboundedError,
    ValidationError,
)

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7
_RELATIONS = ("<=", "==", ">=")


class LinearProgram:
    """min c.x  subject to  rows (<=, ==, >=)  and  0 <= x <= upper."""

    def __init__(self, num_vars: int):
        if num_vars < 1:
            raise ValidationError("LP needs at least one variable")
        self.num_vars = num_vars
        self.objective = np.zeros(num_vars)
        self.upper: list[float | None] = [1.0] * num_vars
        self.row_coeffs: list[np.ndarray] = []
        self.row_rel: list[str] = []
        self.row_rhs: list[float] = []
        self.row_names: list[str] = []

    def set_objective(self, coeffs) -> None:
        c = np.asarray(coeffs, dtype=np.float64)
        if c.shape != (self.num_vars,):
            raise ValidationError("objective length mismatch")
        if not np.all(np.isfinite(c)):
            raise ValidationError("objective coefficients must be finite")
        self.objective = c

    def set_upper(self, j: int, bound: float | None) -> None:
        if not 0 <= j < self.num_vars:
            raise ValidationError(f"variable {j} out of range")
        self.upper[j] = bound

    def add_row(self, coeffs, rel: str, rhs: float, name: str = "") -> None:
        if rel not in _RELATIONS:
            raise ValidationError(f"relation must be one of {_RELATIONS}, got {rel!r}")
        if isinstance(coeffs, dict):
            row = np.zeros(self.num_vars)
            for j, v in coeffs.items():
                row[j] = v
        else:
            row = np.asarray(coeffs, dtype=np.float64)
            if row.shape != (self.num_vars,):
                raise ValidationError("row length mismatch")
        if not (np.all(np.isfinite(row)) and np.isfinite(rhs)):
            raise ValidationError("row coefficients and rhs must be finite")
        self.row_coeffs.append(row)
        self.row_rel.append(rel)
        self.row_rhs.append(float(rhs))
        self.row_names.append(name or f"row{len(self.row_coeffs) - 1}")

    @property
    def num_rows(self) -> int:
        return len(self.row_coeffs)


def _run_simplex(T, basis, active_cols, m, iteration_budget):
    """Pivot T in place until the objective row has no improving column.

    T has m constraint rows, an objective row at index m, and the rhs in the
    last column.  Returns the iteration count actually used.
    """
    it = 0
    degenerate = 0
    bland = False
    while True:
        rc = T[m, :-1]
        if bland:
            improving = np.flatnonzero(active_cols & (rc < -_PIVOT_TOL))
            if improving.size == 0:
                return it
            enter = int(improving[0])
        else:
            masked = np.where(active_cols, rc, np.inf)
            enter = int(np.argmin(masked))
            if masked[enter] >= -_PIVOT_TOL:
                return it
        col = T[:m, enter]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            raise LpUnboundedError("objective unbounded below along a feasible ray")
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        cand = pos[np.flatnonzero(ratios <= best + _PIVOT_TOL)]
        if bland:
            leave = int(cand[np.argmin(basis[cand])])
        else:
            leave = int(cand[0])

        prev_obj = T[m, -1]
        piv = T[leave, enter]
        T[leave] /= piv
        factors = T[:, enter].copy()
        factors[leave] = 0.0
        T -= np.outer(factors, T[leave])
        T[:, enter] = 0.0
        T[leave, enter] = 1.0
        basis[leave] = enter

        if abs(T[m, -1] - prev_obj) <= _PIVOT_TOL:
            degenerate += 1
            if degenerate > 2 * (m + 1):
                bland = True
        else:
            degenerate = 0
        it += 1
        if it > iteration_budget:
            raise LpIterationLimitError(f"simplex exceeded {iteration_budget} iterations")


def lp_solve(lp: LinearProgram, max_iterations: int | None = None
             ) -> tuple[np.ndarray, float]:
    """Solve to optimality; returns (variable values, objective value).

    Raises LpInfeasibleError naming a constraint row that cannot be met, or
    LpIterationLimitError when the pivot budget runs out.
    """
    n = lp.num_vars
    rows = [r.copy() for r in lp.row_coeffs]
    rels = list(lp.row_rel)
    rhs = list(lp.row_rhs)
    names = list(lp.row_names)
    for j, u in enumerate(lp.upper):
        if u is not None:
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(e)
            rels.append("<=")
            rhs.append(float(u))
            names.append(f"ub[x{j}]")

    m = len(rows)
    if m == 0:
        # no constraints: minimum at the lower bound of every variable
        return np.zeros(n), 0.0
    A = np.vstack(rows)
    b = np.array(rhs)
    for r in range(m):
        if b[r] < 0.0:
            A[r] *= -1.0
            b[r] *= -1.0
            if rels[r] == "<=":
                rels[r] = ">="
            elif rels[r] == ">=":
                rels[r] = "<="

    n_slack = sum(1 for rel in rels if rel != "==")
    needs_art = [rel != "<=" for rel in rels]
    n_art = sum(needs_art)
    ncols = n + n_slack + n_art

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    art_row_name: dict[int, str] = {}
    scol = n
    acol = n + n_slack
    for r in range(m):
        if rels[r] == "<=":
            T[r, scol] = 1.0
            basis[r] = scol
            scol += 1
        elif rels[r] == ">=":
            T[r, scol] = -1.0
            scol += 1
            T[r, acol] = 1.0
            basis[r] = acol
            art_row_name[acol] = names[r]
            acol += 1
        else:
            T[r, acol] = 1.0
            basis[r] = acol
            art_row_name[acol] = names[r]
            acol += 1

    budget = max_iterations if max_iterations is not None else 200 * (m + ncols) + 2000
    active = np.ones(ncols, dtype=bool)

    if n_art:
        # phase 1: drive the artificial variables to zero
        T[m, n + n_slack: ncols] = 1.0
        for r in range(m):
            if basis[r] >= n + n_slack:
                T[m] -= T[r]
        _run_simplex(T, basis, active, m, budget)
        phase1 = -T[m, -1]
        if phase1 > _FEAS_TOL:
            worst = None
            for r in range(m):
                if basis[r] >= n + n_slack and T[r, -1] > _FEAS_TOL:
                    worst = art_row_name.get(basis[r])
                    break
            raise LpInfeasibleError(
                f"no feasible point (phase-1 objective {phase1:.3e}); "
                f"violated row: {worst or 'unknown'}",
                row_name=worst,
            )
        # pivot any leftover zero-level artificials out of the basis
        for r in range(m):
            if basis[r] >= n + n_slack:
                candidates = np.flatnonzero(np.abs(T[r, : n + n_slack]) > _PIVOT_TOL)
                if candidates.size:
                    enter = int(candidates[0])
                    piv = T[r, enter]
                    T[r] /= piv
                    factors = T[:, enter].copy()
                    factors[r] = 0.0
                    T -= np.outer(factors, T[r])
                    T[:, enter] = 0.0
                    T[r, enter] = 1.0
                    basis[r] = enter
                # else: redundant row; its artificial stays basic at zero
        active[n + n_slack:] = False

    # phase 2: the real objective
    T[m, :] = 0.0
    T[m, :n] = lp.objective
    for r in range(m):
        if basis[r] < n:
            T[m] -= lp.objective[basis[r]] * T[r]
    _run_simplex(T, basis, active, m, budget)

    x = np.zeros(ncols)
    x[basis] = T[:m, -1]
    values = np.clip(x[:n], 0.0, None)
    return values, float(np.dot(lp.objective, values))
