"""Quick oracle checks runnable without the test suite (``simofdma selftest``)."""

from __future__ import annotations

import numpy as np

from . import allocation, evaluation, phase
from .objective import best_alpha, fitting_cost
from .propagation import PhaseConfig, SimGeometry, build_stack, cascade


def _random_instance(rng, K, N):
    H = rng.standard_normal((N, K, K)) + 1j * rng.standard_normal((N, K, K))
    K_c = int(rng.integers(-(-N // K), N + 1))
    Z = allocation.random_assignment(K, N, K_c, int(rng.integers(1 << 30)))
    return H, K_c, Z


def check_expansion(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        H, _, Z = _random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(4, 17)))
        a = rng.normal()
        direct = fitting_cost(H, a, Z)
        worst = max(worst, abs(allocation.gamma_expanded(H, a, Z) - direct) / max(direct, 1e-300))
    return worst <= 1e-10, f"max relative error {worst:.2e}"


def check_vectorization(rng, trials=10):
    worst = 0.0
    for _ in range(trials):
        L, cols, K, N = int(rng.integers(1, 4)), 3, 2, 3
        geo = SimGeometry(L, cols, cols, 5.35e-3, 2.87e-5, 0.05, K)
        stack = build_stack(geo, 28e9 + 2.5e6 * np.arange(N))
        G = rng.standard_normal((N, K, cols * cols)) + 1j * rng.standard_normal((N, K, cols * cols))
        Z = allocation.random_assignment(K, N, 2, int(rng.integers(1 << 30)))
        theta = rng.uniform(0, 2 * np.pi, (L, cols * cols))
        for l in range(1, L + 1):
            quad = phase.layer_quadratic(stack, PhaseConfig(theta), G, Z, 3.0, l)
            direct = fitting_cost(G @ cascade(stack, PhaseConfig(theta)), 3.0, Z)
            worst = max(worst, abs(quad.value(np.exp(1j * theta[l - 1])) - direct) / direct)
    return worst <= 1e-9, f"max relative error {worst:.2e}"


def check_milp(rng, trials=20):
    for _ in range(trials):
        K, N = 2, int(rng.integers(2, 5))
        K_c = int(rng.integers(-(-N // K), N + 1))
        c = rng.random((K, N))
        d = np.zeros((K, K, N))
        d[0, 1] = rng.random(N)
        inst = allocation.MilpInstance(c, d, K_c)
        if allocation.solve_branch_and_bound(inst).objective != allocation.brute_force(inst).objective:
            return False, f"mismatch on K={K}, N_c={N}, K_c={K_c}"
    return True, f"{trials} instances agree"


def check_alpha(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        H, _, Z = _random_instance(rng, 3, 6)
        a = best_alpha(H, Z)
        g = fitting_cost(H, a, Z)
        h = 1e-6 * max(1.0, abs(a))
        slope = (fitting_cost(H, a + h, Z) - fitting_cost(H, a - h, Z)) / (2 * h)
        worst = max(worst, abs(slope) / g)
    return worst <= 1e-6, f"max |dGamma/dalpha| / Gamma {worst:.2e}"


def check_waterfilling(rng, trials=20):
    for _ in range(trials):
        g = rng.exponential(size=int(rng.integers(1, 30)))
        p = evaluation.water_filling(g, 1.0, 0.1)
        level = p[p > 0] + 0.1 / g[p > 0]
        if abs(p.sum() - 1.0) > 1e-9 or np.ptp(level) > 1e-6:
            return False, "KKT violated"
    return True, f"{trials} allocations satisfy KKT"


def check_ber(rng):
    snr = 10 ** 0.4
    p = np.full((1, 1), snr)
    ber = evaluation.ber_monte_carlo(np.ones((1, 1, 1)), 1.0, np.ones((1, 1)), p, 1.0, 20000, 7)[0]
    ref = evaluation.bpsk_ber(snr)
    sd = np.sqrt(ref * (1 - ref) / 20000)
    return abs(ber - ref) <= 3 * sd, f"simulated {ber:.4f} vs closed form {ref:.4f}"


CHECKS = {
    "expansion identity": check_expansion,
    "vectorization identity": check_vectorization,
    "exact assignment vs brute force": check_milp,
    "scaling optimality": check_alpha,
    "water-filling KKT": check_waterfilling,
    "BPSK calibration": check_ber,
}


def run(seed: int = 0):
    """Yields (name, passed, detail) for every check."""
    rng = np.random.default_rng(seed)
    for name, fn in CHECKS.items():
        ok, detail = fn(rng)
        yield name, bool(ok), detail
