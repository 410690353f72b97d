"""Independent reference implementations used as test oracles."""

import cmath
import itertools
import math

import numpy as np

C = 299_792_458.0


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def frobenius_cost(H, alpha, Z):
    """sum_i ||alpha T_i H_i T_i - T_i||_F^2 with explicit selection matrices."""
    total = 0.0
    for i in range(H.shape[0]):
        T = np.diag(Z[:, i].astype(float))
        R = alpha * T @ H[i] @ T - T
        total += np.linalg.norm(R, "fro") ** 2
    return total


def feasible_assignments(K, N, K_c):
    """Every binary K x N matrix with row sums K_c and no empty column."""
    rows = [r for r in itertools.product((0, 1), repeat=N) if sum(r) == K_c]
    for combo in itertools.product(rows, repeat=K):
        Z = np.array(combo, dtype=np.int8).reshape(K, N)
        if (Z.sum(axis=0) >= 1).all():
            yield Z


def rs_scalar(t, area, gap, f):
    return (area * gap / t ** 2) * (1 / (2 * math.pi * t) - 1j * f / C) * cmath.exp(2j * math.pi * t * f / C)


def q_function(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def water_filling_sorted(g, P, noise):
    """Textbook water-filling: grow the active set in order of increasing noise/gain."""
    g = np.asarray(g, dtype=float)
    floors = np.where(g > 0, noise / np.where(g > 0, g, 1), np.inf)
    order = np.argsort(floors)
    p = np.zeros_like(g)
    for n in range(len(g), 0, -1):
        act = order[:n]
        if not np.all(np.isfinite(floors[act])):
            continue
        mu = (P + floors[act].sum()) / n
        if mu > floors[act].max():
            p[act] = mu - floors[act]
            return p, mu
    raise AssertionError("no consistent active set")
