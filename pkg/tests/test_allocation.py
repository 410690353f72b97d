import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simofdma import allocation as al
from simofdma.errors import InfeasibleError, InstanceTooLargeError
from simofdma.objective import fitting_cost

from helpers import crandn, feasible_assignments, frobenius_cost


def _instance(rng, K, N, K_c, integer=False):
    if integer:  # small integer costs produce many exact ties
        c = rng.integers(0, 3, (K, N)).astype(float)
        d = np.triu(rng.integers(0, 3, (K, K, N)).transpose(2, 0, 1), 1).transpose(1, 2, 0).astype(float)
    else:
        c = rng.random((K, N))
        d = np.triu(rng.random((N, K, K)), 1).transpose(1, 2, 0)
    return al.MilpInstance(c, d, K_c)


def _oracle(inst):
    """Enumerate feasible Z directly; lexicographically smallest optimum."""
    K, N = inst.c.shape
    best = None
    for Z in feasible_assignments(K, N, inst.K_c):
        v = inst.objective(Z)
        if best is None or v < best[0] - 1e-12 * abs(best[0]) or (
                v <= best[0] + 1e-12 * abs(best[0]) and tuple(Z.ravel()) < tuple(best[1].ravel())):
            best = (min(v, best[0]) if best else v, Z)
    return best


def test_assignment_validation():
    al.AssignmentMatrix(np.array([[1, 0], [0, 1]]), 1)
    with pytest.raises(InfeasibleError):
        al.AssignmentMatrix(np.array([[1, 1], [0, 1]]), 1)
    with pytest.raises(InfeasibleError):
        al.AssignmentMatrix(np.array([[1, 0], [1, 0]]), 1)
    with pytest.raises(InfeasibleError):
        al.AssignmentMatrix(np.array([[2, 0], [0, 1]]), 1)
    Z = al.AssignmentMatrix(np.array([[1, 1, 0], [0, 1, 1]]), 2)
    assert Z.rho == pytest.approx(2 / 3)
    assert Z.users_on(1).tolist() == [0, 1]
    assert not Z.Z.flags.writeable


def test_check_feasible():
    al.check_feasible(4, 16, 4)
    for K, N, K_c in [(4, 16, 3), (2, 3, 4), (2, 2, 0)]:
        with pytest.raises(InfeasibleError):
            al.check_feasible(K, N, K_c)


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 4), N=st.integers(1, 8), seed=st.integers(0, 2 ** 31), alpha=st.floats(-3, 3))
def test_expansion_matches_frobenius(K, N, seed, alpha):
    rng = np.random.default_rng(seed)
    H = crandn(rng, N, K, K)
    Z = rng.integers(0, 2, (K, N))
    ref = frobenius_cost(H, alpha, Z)
    assert al.gamma_expanded(H, alpha, Z) == pytest.approx(ref, rel=1e-10, abs=1e-12)
    assert fitting_cost(H, alpha, Z) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_selection_matrices():
    T = al.selection_matrices(np.array([[1, 0], [1, 1]]))
    assert np.array_equal(T[0], np.eye(2)) and np.array_equal(T[1], np.diag([0, 1]))


def test_build_milp_against_loops(rng):
    H, alpha = crandn(rng, 3, 3, 3), 0.7
    inst = al.build_milp(H, alpha, 2)
    for i in range(3):
        for p in range(3):
            assert inst.c[p, i] == pytest.approx(abs(alpha * H[i, p, p] - 1) ** 2)
            for q in range(3):
                want = abs(alpha * H[i, p, q]) ** 2 + abs(alpha * H[i, q, p]) ** 2 if p < q else 0.0
                assert inst.d[p, q, i] == pytest.approx(want)
    for Z in feasible_assignments(3, 3, 2):
        assert inst.objective(Z) == pytest.approx(frobenius_cost(H, alpha, Z), rel=1e-12)
    with pytest.raises(ValueError):
        al.build_milp(H, float("nan"), 2)


def test_dumps_roundtrip(rng):
    inst = _instance(rng, 3, 4, 2)
    back = al.MilpInstance.loads(inst.dumps())
    assert np.array_equal(back.c, inst.c) and np.array_equal(back.d, inst.d) and back.K_c == 2


def test_linearization_is_exact_on_binary_points(rng):
    inst = _instance(rng, 3, 2, 1)
    lp = al.linearized_program(inst)
    for Z in feasible_assignments(3, 2, 1):
        x = np.zeros(lp["cost"].size)
        x[:lp["num_z"]] = Z.ravel()
        for (p, q, i), col in lp["y_index"].items():
            x[col] = Z[p, i] * Z[q, i]
        assert np.allclose(lp["A_eq"] @ x, lp["b_eq"])
        assert (lp["A_ub"] @ x <= lp["b_ub"] + 1e-12).all()
        assert lp["cost"] @ x == pytest.approx(inst.objective(Z))
        # any other Y value violates a product inequality
        for col in lp["y_index"].values():
            y = x.copy()
            y[col] = 1 - y[col]
            assert not (lp["A_ub"] @ y <= lp["b_ub"] + 1e-12).all()


@pytest.mark.parametrize("K,N", [(2, 2), (2, 3), (2, 4), (3, 3)])
def test_branch_and_bound_matches_enumeration(rng, K, N):
    for K_c in range(-(-N // K), N + 1):
        for integer in (False, True):
            inst = _instance(rng, K, N, K_c, integer)
            val, Z = _oracle(inst)
            got = al.solve_branch_and_bound(inst)
            assert got.objective == val
            assert np.array_equal(got.Z, Z)
            brute = al.brute_force(inst)
            assert brute.objective == val and np.array_equal(brute.Z, Z)


def test_highs_agrees_on_value(rng):
    for _ in range(5):
        inst = _instance(rng, 3, 4, 2)
        assert al.solve_highs(inst).objective == pytest.approx(al.solve_branch_and_bound(inst).objective, rel=1e-9)


def test_lexicographic_tie_break():
    inst = al.MilpInstance(np.zeros((2, 2)), np.zeros((2, 2, 2)), 1)
    assert al.solve_branch_and_bound(inst).Z.tolist() == [[0, 1], [1, 0]]


def test_separable_case():
    # no interference terms: each user keeps its K_c cheapest subcarriers when coverage allows
    c = np.array([[0.0, 0.1, 5.0, 5.0], [5.0, 5.0, 0.2, 0.0]])
    inst = al.MilpInstance(c, np.zeros((2, 2, 4)), 2)
    assert al.solve_branch_and_bound(inst).Z.tolist() == [[1, 1, 0, 0], [0, 0, 1, 1]]


def test_diagonal_channels_favour_sharing():
    # perfectly orthogonal users with exact gain: any assignment has zero cost
    H = np.broadcast_to(np.eye(3), (4, 3, 3))
    inst = al.build_milp(H, 1.0, 3)
    res = al.solve_branch_and_bound(inst)
    assert res.objective == 0.0
    assert res.Z.sum(axis=1).tolist() == [3, 3, 3]


def test_single_user():
    inst = al.MilpInstance(np.array([[0.3, 0.2, 0.1]]), np.zeros((1, 1, 3)), 3)
    assert al.solve_branch_and_bound(inst).Z.tolist() == [[1, 1, 1]]
    with pytest.raises(InfeasibleError):
        al.solve_branch_and_bound(al.MilpInstance(np.ones((1, 3)), np.zeros((1, 1, 3)), 2))


def test_brute_force_size_cap(rng):
    with pytest.raises(InstanceTooLargeError):
        al.brute_force(_instance(rng, 4, 8, 2))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_optimum_lower_bounds_random_assignments(seed):
    rng = np.random.default_rng(seed)
    inst = _instance(rng, 4, 6, 3)
    best = al.solve_branch_and_bound(inst).objective
    for s in range(5):
        assert best <= inst.objective(al.random_assignment(4, 6, 3, [seed, s]).Z) + 1e-12


def test_random_assignment_is_feasible_and_seeded():
    a = al.random_assignment(4, 16, 4, 3)
    b = al.random_assignment(4, 16, 4, 3)
    assert np.array_equal(a.Z, b.Z)
    assert a.Z.sum(axis=1).tolist() == [4] * 4 and (a.Z.sum(axis=0) >= 1).all()
    draws = {al.random_assignment(2, 4, 3, s).Z.tobytes() for s in range(40)}
    assert len(draws) > 1
    with pytest.raises(InfeasibleError):
        al.random_assignment(2, 5, 2, 0)


def test_greedy_respects_constraints(rng):
    G = crandn(rng, 8, 3, 6)
    H = G @ crandn(rng, 6, 3)
    probe = al.fit_probe_from_channels(H)
    for K_c in (3, 5, 8):
        Z = al.greedy_assignment(G, K_c, probe)
        assert Z.Z.sum(axis=1).tolist() == [K_c] * 3
        assert (Z.Z.sum(axis=0) >= 1).all()


def test_greedy_without_threshold_never_probes(rng):
    G = crandn(rng, 4, 2, 3)

    def probe(Z):
        raise AssertionError("probe called")

    Z = al.greedy_assignment(G, 3, probe, threshold=float("inf"))
    peak = np.abs(G).max(axis=2)
    for i in range(4):
        assert Z.Z[np.argmax(peak[i]), i] == 1 or Z.Z[:, i].sum() == 2


def test_greedy_shares_orthogonal_users():
    # identity effective channels: co-assignment costs nothing, so the threshold always accepts
    G = np.broadcast_to(np.eye(2, 3), (4, 2, 3)).astype(complex)
    H = np.broadcast_to(np.eye(2), (4, 2, 2)).astype(complex)
    Z = al.greedy_assignment(G, 4, al.fit_probe_from_channels(H))
    assert Z.Z.tolist() == [[1] * 4, [1] * 4]


def test_fixed_assignments():
    assert al.fixed_assignment("sdma", 3, 5).Z.tolist() == [[1] * 5] * 3
    o = al.fixed_assignment("ofdma", 4, 16)
    assert o.K_c == 4 and (o.Z.sum(axis=0) == 1).all()
    assert o.Z[1].tolist() == [0] * 4 + [1] * 4 + [0] * 8
    u = al.fixed_assignment("ofdma", 3, 4)
    assert u.Z.tolist() == [[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]
    with pytest.raises(InfeasibleError):
        al.fixed_assignment("ofdma", 5, 4)
    with pytest.raises(ValueError):
        al.fixed_assignment("tdma", 2, 2)
