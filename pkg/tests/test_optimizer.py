import numpy as np
import pytest

from simofdma.channel import realize_channel
from simofdma.config import OptimizerConfig, load_config
from simofdma.errors import InfeasibleError, IterationLimitError
from simofdma.objective import fitting_cost
from simofdma.optimizer import Problem, alternating_optimize, initialize, optimize, refit_probe
from simofdma.propagation import SimGeometry, build_stack

from helpers import frobenius_cost


def _problem(cfg, K_c, seed=0, **opts):
    ch = realize_channel(cfg.system, seed)
    stack = build_stack(SimGeometry.from_config(cfg.system), ch.frequencies)
    return Problem(stack, ch.G, K_c, OptimizerConfig(**{**cfg.optimizer.__dict__, **opts}))


def _small(tiny):
    return _problem(tiny, 3)


def test_initialize_is_deterministic(tiny):
    p = _small(tiny)
    a, b = initialize(p, [1, 2]), initialize(p, [1, 2])
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.Z.Z, b.Z.Z) and a.gamma == b.gamma
    assert not np.array_equal(a.theta, initialize(p, [1, 3]).theta)
    assert a.trace == [(0, "init", a.gamma)]


def test_trace_is_non_increasing_and_final_state_consistent(tiny):
    p = _small(tiny)
    state = alternating_optimize(p, initialize(p, 5), budget=6)
    g = [t[2] for t in state.trace]
    assert all(b <= a + 1e-9 for a, b in zip(g, g[1:]))
    assert {t[1] for t in state.trace} == {"init", "phase", "alpha", "assign"}
    H = p.effective(state.theta)
    assert frobenius_cost(H, state.alpha, state.Z.Z) == pytest.approx(state.gamma, rel=1e-9)
    assert state.gamma == min(g)
    assert len(state.log) == len(state.trace)


def test_scalar_channel_is_fitted_exactly():
    cfg = load_config(profile="desk").with_overrides({
        "system.num_users": 1, "system.num_subcarriers": 1, "system.meta_cols": 1,
        "system.meta_rows": 1, "system.layers": 1, "system.num_scatterers": 0})
    p = _problem(cfg, 1)
    state = alternating_optimize(p, initialize(p, 0), budget=3)
    assert state.gamma <= 1e-20
    h = p.effective(state.theta)[0, 0, 0]
    assert abs(h.imag) <= 1e-9 * abs(h) and state.alpha * h.real == pytest.approx(1.0)


def test_fixed_ofdma_fit_improves_substantially(desk):
    p = _problem(desk, 4, zstep="ofdma")
    start = initialize(p, 0)
    first = start.gamma
    final = alternating_optimize(p, start)
    assert final.gamma <= first / 2
    assert np.array_equal(final.Z.Z, start.Z.Z)


def test_rerunning_a_converged_state_does_not_worsen_it(tiny):
    p = _small(tiny)
    state = alternating_optimize(p, initialize(p, 2), budget=10)
    again = alternating_optimize(p, state, budget=2)
    assert again.gamma <= state.gamma + 1e-12
    assert again.trace[-1][0] > state.trace[0][0]


def test_restarts_never_hurt(tiny):
    p = _small(tiny)
    one = optimize(p, 4, restarts=1)
    three = optimize(p, 4, restarts=3)
    assert three.gamma <= one.gamma


def test_greedy_probe_and_zsteps(tiny):
    p = _small(tiny)
    theta = initialize(p, 0).theta
    probe = refit_probe(p, theta)
    Z = np.zeros((2, 4), dtype=np.int8)
    assert probe(Z) == 0.0
    Z[0, 0] = 1
    assert probe(Z) >= 0.0
    for zstep in ("greedy", "random", "sdma"):
        kc = 4 if zstep == "sdma" else 3
        q = _problem(tiny, kc, zstep=zstep)
        s = optimize(q, 0)
        assert s.Z.Z.sum(axis=1).tolist() == [kc, kc]
        assert fitting_cost(q.effective(s.theta), s.alpha, s.Z.Z) == pytest.approx(s.gamma, rel=1e-9)
    with pytest.raises(InfeasibleError):
        initialize(_problem(tiny, 3, zstep="ofdma"), 0)


def test_solver_errors_name_the_iteration(tiny):
    p = _problem(tiny, 3, inner="pccp", pccp_max_iter=1)
    with pytest.raises(IterationLimitError, match="AO iteration 1") as info:
        optimize(p, 0)
    assert "max_slack" in info.value.diagnostics
