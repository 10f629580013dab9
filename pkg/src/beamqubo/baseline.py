"""Best Fit baseline: each user joins the fullest beam that can take it."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .errors import BudgetExhaustedError, ValidationError
from .qubo import BeamSolution, ProblemInstance, _violations


def best_fit(inst: ProblemInstance, order: Sequence[int] | None = None) -> BeamSolution:
    """Greedy beam placement.

    Users are processed in ``order`` (input order by default).  A user joins
    the most loaded open beam among those where it is adjacent to every
    current member and the load is below capacity; ties break to the lowest
    beam index.  If no beam qualifies a new one opens, and running out of
    budget raises BudgetExhaustedError (impossible when B = N).
    """
    N = inst.N
    if order is None:
        order = range(N)
    order = list(order)
    if sorted(order) != list(range(N)):
        raise ValidationError("order must be a permutation of all users")

    adj = inst.graph.adjacency
    beams: list[list[int]] = []
    for user in order:
        best = -1
        best_load = -1
        for b, members in enumerate(beams):
            if len(members) >= inst.W:
                continue
            if all(adj[user, m] for m in members):
                if len(members) > best_load:
                    best = b
                    best_load = len(members)
        if best >= 0:
            beams[best].append(user)
        else:
            if len(beams) >= inst.B:
                raise BudgetExhaustedError(
                    f"user {user} needs beam {len(beams) + 1} but budget is {inst.B}")
            beams.append([user])

    a = np.zeros((N, inst.B), dtype=bool)
    z = np.zeros(inst.B, dtype=bool)
    for b, members in enumerate(beams):
        z[b] = True
        for user in members:
            a[user, b] = True
    return BeamSolution(assignment=a, active=z, objective=len(beams),
                        violations=_violations(a, z, inst))
