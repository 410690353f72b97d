import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simofdma import phase
from simofdma.errors import DomainError, IterationLimitError
from simofdma.objective import best_alpha, fitting_cost
from simofdma.propagation import PhaseConfig, SimGeometry, build_stack, cascade

from helpers import crandn, frobenius_cost

PITCH = 5.35e-3


def _setup(rng, L=2, cols=2, rows=3, K=2, N=3):
    geo = SimGeometry(L, cols, rows, PITCH, PITCH ** 2, 0.05, K)
    stack = build_stack(geo, 28e9 + 2.5e6 * np.arange(N))
    M = cols * rows
    G = crandn(rng, N, K, M) * 50
    Z = np.ones((K, N), dtype=np.int8)
    Z[0, 0] = 0
    return stack, G, Z, PhaseConfig.random(L, M, rng)


def _random_quadratic(rng, M):
    B = crandn(rng, M + 2, M)
    return phase.LayerQuadratic(A=B.conj().T @ B, b=crandn(rng, M), const=3.0, alpha=0.8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), L=st.integers(1, 3), l_off=st.integers(0, 2))
def test_quadratic_reproduces_direct_cost(seed, L, l_off):
    rng = np.random.default_rng(seed)
    stack, G, Z, ph = _setup(rng, L=L)
    l = min(L, 1 + l_off)
    alpha = rng.uniform(0.1, 3)
    quad = phase.layer_quadratic(stack, ph, G, Z, alpha, l)
    for _ in range(5):
        theta = ph.theta.copy()
        theta[l - 1] = rng.uniform(0, 2 * np.pi, theta.shape[1])
        direct = frobenius_cost(G @ cascade(stack, PhaseConfig(theta)), alpha, Z)
        assert quad.value(np.exp(1j * theta[l - 1])) == pytest.approx(direct, rel=1e-9)
    assert np.allclose(quad.A, quad.A.conj().T, atol=0)
    assert np.linalg.eigvalsh(quad.A).min() >= -1e-9 * np.abs(quad.A).max()


def test_layer_index_checked(rng):
    stack, G, Z, ph = _setup(rng)
    with pytest.raises(DomainError):
        phase.layer_quadratic(stack, ph, G, Z, 1.0, 0)
    with pytest.raises(DomainError):
        phase.layer_quadratic(stack, ph, G, Z, 1.0, 3)


def test_restrict():
    G, P = np.arange(12).reshape(3, 4), np.arange(12).reshape(4, 3)
    r = phase.restrict(G, P, [0, 2])
    assert r.G_z.tolist() == [G[0].tolist(), G[2].tolist()]
    assert r.P_z.tolist() == P[:, [0, 2]].tolist()
    with pytest.raises(DomainError):
        phase.restrict(G, P, [])
    with pytest.raises(DomainError):
        phase.restrict(G, P, [2, 0])


def test_coordinate_descent_monotone_and_unimodular(rng):
    quad = _random_quadratic(rng, 8)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 8))
    values = [quad.value(phi)]
    for _ in range(6):
        phi = phase.coordinate_descent_layer(quad, phi, sweeps=1)
        values.append(quad.value(phi))
    assert np.max(np.abs(np.abs(phi) - 1)) < 1e-12
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(values, values[1:]))


def test_coordinate_descent_atoms_are_optimal(rng):
    quad = _random_quadratic(rng, 5)
    phi = phase.coordinate_descent_layer(quad, np.ones(5, dtype=complex), sweeps=200, tol=1e-13)
    grid = np.exp(1j * np.linspace(0, 2 * np.pi, 3601))
    base = quad.value(phi)
    for m in range(5):
        trial = np.repeat(phi[None], grid.size, axis=0)
        trial[:, m] = grid
        best = min(quad.value(t) for t in trial)
        assert base <= best + 1e-9 * abs(base)


def test_solve_atom_against_grid(rng):
    xs = np.linspace(-2, 2, 801)
    X = xs[None, :] + 1j * xs[:, None]
    for _ in range(20):
        a = rng.uniform(0.1, 3)
        c = complex(*rng.normal(size=2))
        x0 = complex(*rng.normal(size=2)) * rng.uniform(0.2, 1.5)
        lam = 10 ** rng.uniform(-3, 2)
        beta = 1 + abs(x0) ** 2
        cost = (a * np.abs(X) ** 2 + 2 * (c.real * X.real + c.imag * X.imag)
                + lam * np.maximum(0, np.abs(X) ** 2 - 1)
                + lam * np.maximum(0, beta - 2 * (x0.real * X.real + x0.imag * X.imag)))
        x = phase._solve_atom(a, c, x0, lam)
        assert phase._hinge_atom_cost(x, a, c, x0, lam, beta) <= cost.min() + 1e-9


def _sim_quadratic(rng, l=1):
    stack, G, Z, ph = _setup(rng, L=2)
    alpha = best_alpha(G @ cascade(stack, ph), Z)
    return phase.layer_quadratic(stack, ph, G, Z, alpha, l), ph.phi[l - 1]


@pytest.mark.parametrize("l", [1, 2])
def test_pccp_converges_close_to_coordinate_descent(rng, l):
    quad, phi0 = _sim_quadratic(rng, l)
    res = phase.pccp_layer(quad, phi0)
    assert np.max(np.abs(np.abs(res.phi) - 1)) < 1e-12
    assert res.slacks.max() < 1e-6
    assert len(res.penalties) == res.iterations
    assert all(b >= a for a, b in zip(res.penalties, res.penalties[1:]))
    cd = phase.coordinate_descent_layer(quad, phi0, sweeps=100)
    assert quad.value(res.phi) <= quad.value(cd) * 1.01 + 1e-12


def test_pccp_iteration_limit_carries_diagnostics(rng):
    quad, phi0 = _sim_quadratic(rng)
    with pytest.raises(IterationLimitError) as info:
        phase.pccp_layer(quad, phi0, max_iter=1)
    assert {"max_slack", "objective", "penalty"} <= set(info.value.diagnostics)


def test_optimal_alpha_cases(rng):
    eye = np.broadcast_to(np.eye(3), (4, 3, 3))
    assert phase.optimal_alpha(eye, np.eye(3)) == 1.0
    G, P = crandn(rng, 4, 3, 5), crandn(rng, 5, 3)
    Z = np.array([[1, 1, 0, 1], [0, 1, 1, 1], [1, 0, 1, 0]])
    a = phase.optimal_alpha(G, P, Z)
    assert phase.optimal_alpha(G, 2.5 * P, Z) == pytest.approx(a / 2.5, rel=1e-12)
    H = G @ P
    for h in (1e-4, -1e-4):
        assert fitting_cost(H, a, Z) <= fitting_cost(H, a + h, Z)
    assert phase.optimal_alpha(G, P, Z, restricted=False) == pytest.approx(best_alpha(H))


def test_phase_step_descends_and_is_gauge_invariant(rng):
    stack, G, Z, ph = _setup(rng, L=3)
    H = G @ cascade(stack, ph)
    alpha = best_alpha(H, Z)
    before = fitting_cost(H, alpha, Z)
    seen = []
    theta = phase.phase_step(stack, G, Z, alpha, ph.theta,
                             on_layer=lambda l, q, b, a, info: seen.append((l, q.value(b), q.value(a))))
    assert [s[0] for s in seen] == [1, 2, 3]
    assert all(after <= b + 1e-9 * b for _, b, after in seen)
    after = fitting_cost(G @ cascade(stack, PhaseConfig(theta)), alpha, Z)
    assert after <= before
    assert after == pytest.approx(seen[-1][2], rel=1e-9)
    # a common phase on the last layer rotates every H_i; the diagonal fit then changes
    # but a common rotation of the inputs does not change |H|
    shifted = ph.theta.copy()
    shifted[0] += 0.7
    assert np.allclose(np.abs(G @ cascade(stack, PhaseConfig(shifted))), np.abs(H), rtol=1e-10)


def test_phase_step_pccp_never_worse(rng):
    stack, G, Z, ph = _setup(rng, L=2)
    H = G @ cascade(stack, ph)
    alpha = best_alpha(H, Z)
    theta = phase.phase_step(stack, G, Z, alpha, ph.theta, inner="pccp")
    assert fitting_cost(G @ cascade(stack, PhaseConfig(theta)), alpha, Z) <= fitting_cost(H, alpha, Z) * (1 + 1e-12)
    with pytest.raises(ValueError):
        phase.phase_step(stack, G, Z, alpha, ph.theta, inner="sdr")


def test_unit_circle_of_scalar_problem():
    # M = 1: cost = a^2 A |phi|^2 - 2a Re(b* phi) + const, minimised at phi = b / |b|
    quad = phase.LayerQuadratic(A=np.array([[2.0]]), b=np.array([math.sqrt(0.5) * (1 + 1j)]), const=1.0, alpha=1.0)
    phi = phase.coordinate_descent_layer(quad, np.array([-1.0 + 0j]), sweeps=1)
    assert phi[0] == pytest.approx(math.sqrt(0.5) * (1 + 1j))
