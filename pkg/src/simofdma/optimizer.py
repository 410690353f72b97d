"""Alternating optimization of assignment, phases and scaling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import allocation
from .allocation import AssignmentMatrix
from .config import OptimizerConfig
from .errors import IterationLimitError, SimError, SolverError
from .objective import best_alpha, fitting_cost
from .phase import phase_step
from .propagation import PhaseConfig, SimStack, cascade


@dataclass(frozen=True)
class Problem:
    stack: SimStack
    G: np.ndarray  # (N_c, K, M)
    K_c: int
    options: OptimizerConfig = field(default_factory=OptimizerConfig)

    @property
    def num_users(self) -> int:
        return self.G.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.G.shape[0]

    def effective(self, theta) -> np.ndarray:
        return self.G @ cascade(self.stack, PhaseConfig(np.asarray(theta)))

    def alpha(self, H, Z) -> float:
        restricted = self.options.alpha_mode == "restricted"
        return best_alpha(H, Z if restricted else None)


@dataclass
class FitState:
    Z: AssignmentMatrix
    theta: np.ndarray  # (L, M)
    alpha: float
    gamma: float
    trace: list = field(default_factory=list)  # (iteration, step, gamma)
    log: list = field(default_factory=list)  # (iteration, step, layer, gamma, max_slack, alpha)

    @property
    def phases(self) -> PhaseConfig:
        return PhaseConfig(self.theta)


def _record(state, iteration, step, layer=None, max_slack=None):
    state.trace.append((iteration, step, state.gamma))
    state.log.append((iteration, step, layer, state.gamma, max_slack, state.alpha))


def refit_probe(problem: Problem, theta, passes: int = 1):
    """Partial-assignment fitting cost after a short phase refit.

    Starting from ``theta``, alternates ``passes`` single-sweep layer passes
    with the closed-form scaling, so a tentative pair is judged by how well
    the stack can accommodate it rather than by the unadapted phases.
    """
    theta = np.asarray(theta)

    def probe(Z):
        if not np.any(Z):
            return 0.0
        th = theta
        H = problem.effective(th)
        alpha = problem.alpha(H, Z)
        for _ in range(passes):
            th = phase_step(problem.stack, problem.G, Z, alpha, th, inner="cd", sweeps=1)
            H = problem.effective(th)
            alpha = problem.alpha(H, Z)
        return fitting_cost(H, alpha, Z)

    return probe


def initial_assignment(problem: Problem, theta, seed) -> AssignmentMatrix:
    """Starting Z for the configured Z-step; greedy probes with ``theta``."""
    K, N = problem.num_users, problem.num_subcarriers
    mode = problem.options.zstep
    if mode in ("milp", "random"):
        return allocation.random_assignment(K, N, problem.K_c, seed)
    if mode == "greedy":
        probe = refit_probe(problem, theta)
        return allocation.greedy_assignment(problem.G, problem.K_c, probe, problem.options.greedy_threshold)
    Z = allocation.fixed_assignment(mode, K, N)
    if Z.K_c != problem.K_c:
        raise allocation.InfeasibleError(f"{mode} assignment has K_c={Z.K_c}, problem asks {problem.K_c}")
    return Z


def initialize(problem: Problem, seed) -> FitState:
    """Uniform random phases, initial Z per the configured Z-step, optimal alpha."""
    ss = np.random.SeedSequence(seed)
    theta_seed, z_seed = ss.spawn(2)
    L, M = problem.stack.layers, problem.stack.num_atoms
    theta = np.random.default_rng(theta_seed).uniform(0.0, 2 * np.pi, size=(L, M))
    H = problem.effective(theta)
    Z = initial_assignment(problem, theta, z_seed)
    alpha = problem.alpha(H, Z.Z)
    state = FitState(Z=Z, theta=theta, alpha=alpha, gamma=fitting_cost(H, alpha, Z.Z))
    _record(state, 0, "init")
    return state


def _alpha_step(problem, state, H, iteration):
    state.alpha = problem.alpha(H, state.Z.Z)
    state.gamma = fitting_cost(H, state.alpha, state.Z.Z)
    _record(state, iteration, "alpha")


def alternating_optimize(problem: Problem, state: FitState, budget: int | None = None) -> FitState:
    """Phases, scaling, assignment, scaling; repeated until the budget or a plateau.

    The plateau rule stops once the relative improvement of an iteration has
    stayed below ``ao_rtol`` for ``ao_patience`` consecutive iterations. The
    best state seen is returned.
    """
    opts = problem.options
    budget = opts.ao_iterations if budget is None else budget
    pccp_options = dict(lambda0=opts.pccp_lambda0, growth=opts.pccp_growth,
                        lambda_max=opts.pccp_lambda_max, tol=opts.pccp_tol,
                        max_iter=opts.pccp_max_iter)
    best = _snapshot(state)
    stalled = 0
    start_it = state.trace[-1][0] if state.trace else 0
    for it in range(start_it + 1, start_it + budget + 1):
        before = state.gamma

        def on_layer(l, quad, phi_before, phi_after, info):
            state.gamma = quad.value(phi_after)
            _record(state, it, "phase", layer=l, max_slack=info.get("max_slack"))

        try:
            state.theta = phase_step(problem.stack, problem.G, state.Z.Z, state.alpha, state.theta,
                                     inner=opts.inner, sweeps=opts.cd_sweeps,
                                     pccp_options=pccp_options, on_layer=on_layer)
            H = problem.effective(state.theta)
            state.gamma = fitting_cost(H, state.alpha, state.Z.Z)
            _alpha_step(problem, state, H, it)
            if opts.zstep == "milp":
                instance = allocation.build_milp(H, state.alpha, problem.K_c)
                state.Z = allocation.solve_branch_and_bound(instance)
                state.gamma = fitting_cost(H, state.alpha, state.Z.Z)
                _record(state, it, "assign")
                _alpha_step(problem, state, H, it)
        except SimError as exc:
            msg = f"AO iteration {it}: {exc}"
            if isinstance(exc, IterationLimitError):
                raise IterationLimitError(msg, exc.diagnostics) from exc
            raise type(exc)(msg) from exc
        if state.gamma < best.gamma:
            best = _snapshot(state)
        improvement = (before - state.gamma) / max(before, 1e-300)
        stalled = stalled + 1 if improvement < opts.ao_rtol else 0
        if stalled >= opts.ao_patience:
            break
    if best.gamma < state.gamma:
        return replace(best, trace=state.trace, log=state.log)
    return state


def _snapshot(state):
    return FitState(Z=state.Z, theta=np.array(state.theta), alpha=state.alpha, gamma=state.gamma)


def optimize(problem: Problem, seed, restarts: int | None = None) -> FitState:
    """Multi-start wrapper: best of ``restarts`` independent initializations."""
    restarts = problem.options.restarts if restarts is None else restarts
    best = None
    for r in range(restarts):
        state = alternating_optimize(problem, initialize(problem, [*_seed_words(seed), r]))
        if best is None or state.gamma < best.gamma:
            best = state
    if best is None:
        raise SolverError("no restart produced a state")
    return best


def _seed_words(seed):
    return list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
