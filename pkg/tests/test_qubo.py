import numpy as np
import pytest

from beamqubo import (
    BeamSolution,
    CapacityError,
    FormatError,
    ProblemInstance,
    ProximityGraph,
    QuboMatrix,
    ValidationError,
    VariableLayout,
    build_qubo,
    check_feasibility,
    condition,
    decode,
    energy,
    feasible_bits,
    ising_energy,
    qubit_count,
    qubo_to_ising,
    read_qubo_file,
    write_qubo_file,
)
from oracles import (
    all_bitstrings,
    bitstring_matrix,
    clique_cover_opt,
    dense_energy,
    exhaustive_energies,
    random_graph,
    violations_reference,
)


def instance(n, edges, B=None, W=2):
    return ProblemInstance(ProximityGraph.from_edges(n, edges), B or n, W)


def random_instance(rng, n_max=5, W_choices=(2, 3)):
    n = int(rng.integers(1, n_max + 1))
    adj = random_graph(rng, n, float(rng.uniform(0.2, 0.9)))
    return ProblemInstance(ProximityGraph(adj), n, int(rng.choice(W_choices)))


def random_qubo(rng, S, density=0.6):
    entries = {}
    for i in range(S):
        if rng.random() < 0.8:
            entries[(i, i)] = float(rng.normal())
        for j in range(i + 1, S):
            if rng.random() < density:
                entries[(i, j)] = float(rng.normal())
    return QuboMatrix.from_dict(S, entries, offset=float(rng.normal()))


class TestQubitCount:
    def test_reference_sizes(self):
        assert qubit_count(12, 12, 5) == 216
        assert qubit_count(10, 10, 5) == 160
        assert qubit_count(1, 1, 1) == 3

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            qubit_count(0, 1, 1)


class TestLayout:
    def test_block_order_is_a_bijection(self):
        lay = VariableLayout(3, 2, 2)
        seen = [lay.a_index(i, b) for b in range(2) for i in range(3)]
        seen += [lay.z_index(b) for b in range(2)]
        seen += [lay.s_index(b, w) for b in range(2) for w in (1, 2)]
        assert sorted(seen) == list(range(lay.size))
        # a-block grouped by beam, slack block grouped by beam
        assert lay.a_index(0, 1) == 3
        assert lay.z_index(0) == 6
        assert lay.s_index(1, 1) == 10

    def test_bad_indices(self):
        lay = VariableLayout(2, 2, 2)
        with pytest.raises(ValidationError):
            lay.a_index(2, 0)
        with pytest.raises(ValidationError):
            lay.s_index(0, 0)


class TestEnergy:
    def test_all_zeros_gives_offset(self):
        q = QuboMatrix.from_dict(3, {(0, 1): 2.0}, offset=5.5)
        assert energy(q, [0, 0, 0]) == 5.5

    def test_single_entry(self):
        q = QuboMatrix.from_dict(1, {(0, 0): -3.0}, offset=1.0)
        assert energy(q, [1]) == -2.0

    def test_length_mismatch(self):
        q = QuboMatrix.from_dict(2, {})
        with pytest.raises(ValidationError):
            energy(q, [1])

    def test_non_binary_rejected(self):
        q = QuboMatrix.from_dict(2, {})
        with pytest.raises(ValidationError):
            energy(q, [1, 2])

    def test_matches_dense_reference(self):
        rng = np.random.default_rng(2)
        q = random_qubo(rng, 8)
        for _ in range(40):
            x = rng.integers(0, 2, size=8)
            assert energy(q, x) == pytest.approx(dense_energy(q, x), abs=1e-12)


class TestBuildQubo:
    def test_single_user_feasible_minimum(self):
        inst = instance(1, [], B=1, W=1)
        q, lay = build_qubo(inst)
        energies = {tuple(x): energy(q, x) for x in all_bitstrings(3)}
        best = min(energies, key=energies.get)
        assert best == (1, 1, 0) and energies[best] == 1.0
        assert sum(1 for v in energies.values() if v == 1.0) == 1

    def test_adjacent_pair_single_beam(self):
        inst = instance(2, [(0, 1)], B=1, W=2)
        q, lay = build_qubo(inst)
        x = np.zeros(lay.size, dtype=np.int8)
        x[lay.a_index(0, 0)] = x[lay.a_index(1, 0)] = x[lay.z_index(0)] = 1
        assert energy(q, x) == pytest.approx(1.0)

    def test_feasible_energy_equals_active_count(self):
        rng = np.random.default_rng(10)
        for _ in range(40):
            inst = random_instance(rng)
            q, lay = build_qubo(inst)
            # random feasible solution: greedy clique partition
            groups = []
            for v in range(inst.N):
                placed = False
                for g in groups:
                    if len(g) < inst.W and all(inst.graph.has_edge(v, u) for u in g):
                        g.append(v)
                        placed = True
                        break
                if not placed:
                    groups.append([v])
            a = np.zeros((inst.N, inst.B), dtype=bool)
            z = np.zeros(inst.B, dtype=bool)
            for b, g in enumerate(groups):
                z[b] = True
                for v in g:
                    a[v, b] = True
            sol = BeamSolution(a, z, int(z.sum()))
            x = feasible_bits(sol, lay)
            assert energy(q, x) == pytest.approx(len(groups))

    def test_violating_c1_costs_more_than_any_objective(self):
        inst = instance(2, [(0, 1)], B=2, W=2)
        q, lay = build_qubo(inst)
        # feasible optimum is 1; drop user 1's assignment from it
        x = np.zeros(lay.size, dtype=np.int8)
        x[lay.a_index(0, 0)] = x[lay.z_index(0)] = 1
        x[lay.s_index(0, 1)] = 1  # load 1, slack weight 1 restores equality
        x[lay.s_index(1, 2)] = 1  # inactive beam slack at weight W
        assert energy(q, x) >= 1.0 + 1.0

    @pytest.mark.parametrize("n,edges,W", [
        (2, [(0, 1)], 2),
        (3, [(0, 1), (1, 2)], 2),
        (3, [(0, 1), (0, 2), (1, 2)], 3),
    ])
    def test_exhaustive_minimum_is_feasible_optimum(self, n, edges, W):
        inst = instance(n, edges, W=W)
        q, lay = build_qubo(inst)
        energies = exhaustive_energies(q)
        idx = int(np.argmin(energies))
        best_x = bitstring_matrix(lay.size)[idx].astype(np.int8)
        sol = decode(best_x, lay, inst)
        assert sol.feasible
        opt = clique_cover_opt(inst.graph.adjacency, inst.W, inst.B)
        assert sol.objective == opt
        assert energies[idx] == pytest.approx(opt)

    def test_capacity_cap(self):
        inst = instance(3, [], W=2)
        with pytest.raises(CapacityError):
            build_qubo(inst, max_variables=10)

    def test_lambda_default_is_budget_plus_one(self):
        inst = instance(2, [(0, 1)], B=2, W=2)
        q_default, _ = build_qubo(inst)
        q_explicit, _ = build_qubo(inst, lam=3.0)
        assert q_default.to_dict() == q_explicit.to_dict()
        assert q_default.offset == q_explicit.offset


class TestDecodeAndFeasibility:
    def test_all_zeros_violates_c1_per_user(self):
        inst = instance(3, [(0, 1)], W=2)
        q, lay = build_qubo(inst)
        sol = decode(np.zeros(lay.size, dtype=np.int8), lay, inst)
        assert sol.objective == 0
        kinds = [v.constraint for v in sol.violations]
        assert kinds.count("C1") == 3

    def test_assignment_to_inactive_beam_is_c2(self):
        inst = instance(1, [], B=1, W=1)
        lay = VariableLayout(1, 1, 1)
        x = np.zeros(3, dtype=np.int8)
        x[lay.a_index(0, 0)] = 1
        sol = decode(x, lay, inst)
        assert ("C2", (0, 0)) in [(v.constraint, v.where) for v in sol.violations]

    def test_single_user_feasible_decodes_clean(self):
        inst = instance(1, [], B=1, W=1)
        lay = VariableLayout(1, 1, 1)
        sol = decode(np.array([1, 1, 0], dtype=np.int8), lay, inst)
        assert sol.objective == 1 and sol.feasible

    def test_non_adjacent_pair_same_beam_is_c3(self):
        inst = instance(2, [], B=2, W=2)
        a = np.zeros((2, 2), dtype=bool)
        a[0, 0] = a[1, 0] = True
        z = np.array([True, False])
        sol = BeamSolution(a, z, 1)
        kinds = [v.constraint for v in check_feasibility(sol, inst)]
        assert "C3" in kinds

    def test_overfull_beam_is_c4(self):
        inst = instance(3, [(0, 1), (0, 2), (1, 2)], B=3, W=2)
        a = np.zeros((3, 3), dtype=bool)
        a[:, 0] = True
        z = np.array([True, False, False])
        sol = BeamSolution(a, z, 1)
        assert ("C4", (0,)) in [(v.constraint, v.where) for v in
                                check_feasibility(sol, inst)]

    def test_matches_independent_restatement(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            inst = random_instance(rng, n_max=5)
            a = rng.random((inst.N, inst.B)) < 0.3
            z = rng.random(inst.B) < 0.5
            sol = BeamSolution(a, z, int(z.sum()))
            mine = [(v.constraint, v.where) for v in check_feasibility(sol, inst)]
            assert sorted(mine) == sorted(
                violations_reference(a, z, inst.graph.adjacency, inst.W))


class TestIsing:
    def test_zero_matrix(self):
        q = QuboMatrix.from_dict(3, {}, offset=2.5)
        m = qubo_to_ising(q)
        assert np.all(m.biases == 0.0) and m.offset == 2.5

    def test_single_variable(self):
        q = QuboMatrix.from_dict(1, {(0, 0): 1.0})
        m = qubo_to_ising(q)
        assert m.biases[0] == 0.5 and m.offset == 0.5
        for x in (0, 1):
            assert ising_energy(m, [2 * x - 1]) == pytest.approx(energy(q, [x]))

    def test_exhaustive_equivalence(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            S = int(rng.integers(1, 7))
            q = random_qubo(rng, S)
            m = qubo_to_ising(q)
            for x in all_bitstrings(S):
                s = 2 * x.astype(np.int64) - 1
                assert ising_energy(m, s) == pytest.approx(energy(q, x), abs=1e-9)

    def test_rejects_bad_spins(self):
        m = qubo_to_ising(QuboMatrix.from_dict(2, {(0, 1): 1.0}))
        with pytest.raises(ValidationError):
            ising_energy(m, [0, 1])


class TestCondition:
    def test_fix_nothing_is_identity(self):
        rng = np.random.default_rng(4)
        q = random_qubo(rng, 6)
        reduced, free = condition(q, {})
        assert free.tolist() == list(range(6))
        assert reduced.to_dict() == q.to_dict()
        assert reduced.offset == q.offset

    def test_fix_everything_leaves_offset(self):
        rng = np.random.default_rng(5)
        q = random_qubo(rng, 5)
        bits = rng.integers(0, 2, size=5)
        reduced, free = condition(q, {i: int(bits[i]) for i in range(5)})
        assert free.size == 0 and reduced.num_entries == 0
        assert reduced.offset == pytest.approx(energy(q, bits))

    def test_exhaustive_exactness(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            q = random_qubo(rng, 8)
            fixed_idx = rng.choice(8, size=3, replace=False)
            fixed = {int(i): int(rng.integers(0, 2)) for i in fixed_idx}
            reduced, free = condition(q, fixed)
            assert reduced.size == 5
            for y in all_bitstrings(5):
                x = np.zeros(8, dtype=np.int8)
                for k, v in fixed.items():
                    x[k] = v
                x[free] = y
                assert energy(reduced, y) == pytest.approx(energy(q, x), abs=1e-9)

    def test_rejects_bad_keys(self):
        q = QuboMatrix.from_dict(3, {})
        with pytest.raises(ValidationError):
            condition(q, {5: 1})
        with pytest.raises(ValidationError):
            condition(q, {0: 2})


class TestQuboFile:
    def test_round_trip(self):
        rng = np.random.default_rng(8)
        q = random_qubo(rng, 7)
        q2 = read_qubo_file(write_qubo_file(q))
        assert q2.size == q.size
        assert q2.offset == q.offset
        assert q2.to_dict() == q.to_dict()

    @pytest.mark.parametrize("text", ["", "3\n", "3 0.0\n1 2\n", "3 0.0\n2 1 5.0\n"])
    def test_bad_documents(self, text):
        with pytest.raises(FormatError):
            read_qubo_file(text)


class TestUpperTriangular:
    def test_lower_entries_rejected(self):
        with pytest.raises(ValidationError):
            QuboMatrix.from_dict(3, {(2, 1): 1.0})

    def test_duplicate_entries_coalesce(self):
        q = QuboMatrix(3, np.array([0, 0]), np.array([1, 1]), np.array([2.0, 3.0]))
        assert q.to_dict() == {(0, 1): 5.0}

    def test_build_is_upper_triangular_and_deterministic(self):
        inst = instance(4, [(0, 1), (2, 3)], W=3)
        q1, _ = build_qubo(inst)
        q2, _ = build_qubo(inst)
        assert np.all(q1.rows <= q1.cols)
        assert q1.to_dict() == q2.to_dict()
