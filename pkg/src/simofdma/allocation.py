"""Subcarrier assignment: exact 0-1 solver, exhaustive oracle and baselines.

For fixed phases and scaling, the fitting cost separates over subcarriers::

    cost_i(Z) = sum_p c[p, i] Z[p, i] + sum_{p<q} d[p, q, i] Z[p, i] Z[q, i]

with c = |alpha H_i(p, p) - 1|^2 and d = |alpha H_i(p, q)|^2 + |alpha H_i(q, p)|^2.
Every row of Z must hold exactly K_c ones and every column at least one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InstanceTooLargeError, SolverError
from .objective import as_matrix, best_alpha, fitting_cost

BRUTE_FORCE_LIMIT = 10 ** 7


@dataclass(frozen=True)
class AssignmentMatrix:
    Z: np.ndarray  # (K, N_c) int8
    K_c: int
    objective: float | None = None

    def __post_init__(self):
        Z = np.asarray(self.Z)
        if Z.ndim != 2 or not np.isin(Z, (0, 1)).all():
            raise InfeasibleError("assignment must be a binary K x N_c matrix")
        if not (Z.sum(axis=1) == self.K_c).all():
            raise InfeasibleError(f"row sums {Z.sum(axis=1).tolist()} differ from K_c={self.K_c}")
        if not (Z.sum(axis=0) >= 1).all():
            raise InfeasibleError("some subcarrier serves no user (column coverage)")
        Z = Z.astype(np.int8)
        Z.setflags(write=False)
        object.__setattr__(self, "Z", Z)

    @property
    def num_users(self) -> int:
        return self.Z.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.Z.shape[1]

    @property
    def rho(self) -> float:
        return self.K_c / self.num_subcarriers

    def users_on(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.Z[:, i])


def check_feasible(K: int, N_c: int, K_c: int) -> None:
    if K_c > N_c:
        raise InfeasibleError(f"row cardinality K_c={K_c} exceeds N_c={N_c}")
    if K * K_c < N_c:
        raise InfeasibleError(f"column coverage impossible: K*K_c={K * K_c} < N_c={N_c}")
    if K_c < 1:
        raise InfeasibleError("row cardinality K_c must be at least 1")


def selection_matrices(Z) -> np.ndarray:
    """Diagonal 0/1 matrices T_i stacked as (N_c, K, K)."""
    z = as_matrix(Z).T
    K = z.shape[1]
    return z[:, :, None] * np.eye(K, dtype=z.dtype)[None]


def gamma_expanded(H, alpha, Z) -> float:
    """Fitting cost via the linear/pairwise expansion of the Frobenius norm."""
    H = np.asarray(H)
    z = as_matrix(Z).T.astype(float)  # (N_c, K)
    diag = np.einsum("ikk->ik", H)
    lin = np.abs(alpha * diag - 1.0) ** 2
    off = np.abs(alpha * H) ** 2
    idx = np.arange(H.shape[1])
    off[:, idx, idx] = 0.0
    quad = np.einsum("ip,ipq,iq->", z, off, z)
    return float(np.sum(lin * z) + quad)


@dataclass(frozen=True)
class MilpInstance:
    c: np.ndarray  # (K, N_c)
    d: np.ndarray  # (K, K, N_c), strictly upper triangle in (p, q)
    K_c: int

    @property
    def num_users(self) -> int:
        return self.c.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.c.shape[1]

    def objective(self, Z) -> float:
        z = as_matrix(Z).astype(float)
        return float(np.sum(self.c * z) + np.einsum("pi,pqi,qi->", z, self.d, z))

    def dumps(self) -> str:
        """Plain-text format: ``K N_c K_c`` header, K lines of c, then ``p q i d`` rows."""
        K, N = self.c.shape
        lines = [f"{K} {N} {self.K_c}"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.c]
        for p, q in itertools.combinations(range(K), 2):
            for i in range(N):
                lines.append(f"{p} {q} {i} {float(self.d[p, q, i])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MilpInstance":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        K, N, K_c = (int(v) for v in rows[0])
        c = np.array([[float(v) for v in r] for r in rows[1:1 + K]])
        d = np.zeros((K, K, N))
        for p, q, i, v in rows[1 + K:]:
            d[int(p), int(q), int(i)] = float(v)
        return cls(c=c, d=d, K_c=K_c)


def build_milp(H, alpha: float, K_c: int) -> MilpInstance:
    H = np.asarray(H)
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    N, K, _ = H.shape
    c = (np.abs(alpha * np.einsum("ikk->ik", H) - 1.0) ** 2).T
    sq = np.abs(alpha * H) ** 2  # (N, K, K)
    folded = sq + np.transpose(sq, (0, 2, 1))
    d = np.transpose(np.triu(folded, k=1), (1, 2, 0))
    return MilpInstance(c=np.ascontiguousarray(c), d=np.ascontiguousarray(d), K_c=int(K_c))


def linearized_program(instance: MilpInstance) -> dict:
    """Explicit 0-1 linear program over x = [Z row-major, Y].

    Y(p, q, i) stands for Z(p, i) Z(q, i) and is tied to Z by the three
    product inequalities. Returns cost vector, equality and inequality
    systems and the index maps of both variable blocks.
    """
    K, N = instance.c.shape
    pairs = list(itertools.combinations(range(K), 2))
    nz = K * N
    zi = lambda p, i: p * N + i  # noqa: E731
    yi = {(p, q, i): nz + n * N + i for n, (p, q) in enumerate(pairs) for i in range(N)}
    nvar = nz + len(pairs) * N
    cost = np.zeros(nvar)
    cost[:nz] = instance.c.ravel()
    for (p, q, i), col in yi.items():
        cost[col] = instance.d[p, q, i]
    A_eq = np.zeros((K, nvar))
    for p in range(K):
        A_eq[p, p * N:(p + 1) * N] = 1.0
    b_eq = np.full(K, float(instance.K_c))
    rows, b_ub = [], []
    for i in range(N):  # column coverage
        r = np.zeros(nvar)
        r[[zi(p, i) for p in range(K)]] = -1.0
        rows.append(r)
        b_ub.append(-1.0)
    for (p, q, i), col in yi.items():
        for zcol in (zi(p, i), zi(q, i)):  # Y <= Z_p, Y <= Z_q
            r = np.zeros(nvar)
            r[col], r[zcol] = 1.0, -1.0
            rows.append(r)
            b_ub.append(0.0)
        r = np.zeros(nvar)  # Z_p + Z_q - Y <= 1
        r[zi(p, i)], r[zi(q, i)], r[col] = 1.0, 1.0, -1.0
        rows.append(r)
        b_ub.append(1.0)
    return {
        "cost": cost, "A_eq": A_eq, "b_eq": b_eq,
        "A_ub": np.array(rows).reshape(-1, nvar), "b_ub": np.array(b_ub),
        "num_z": nz, "y_index": yi,
    }


def solve_highs(instance: MilpInstance) -> AssignmentMatrix:
    """Solve the linearized program with SciPy's HiGHS branch-and-cut.

    Used to cross-check :func:`solve_branch_and_bound`; ties are broken by the
    external solver, not lexicographically.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    K, N = instance.c.shape
    check_feasible(K, N, instance.K_c)
    lp = linearized_program(instance)
    cons = [LinearConstraint(lp["A_eq"], lp["b_eq"], lp["b_eq"]),
            LinearConstraint(lp["A_ub"], -np.inf, lp["b_ub"])]
    res = milp(lp["cost"], constraints=cons, integrality=np.ones(lp["cost"].size),
               bounds=Bounds(0, 1))
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    Z = np.rint(res.x[:lp["num_z"]]).astype(np.int8).reshape(K, N)
    return AssignmentMatrix(Z, instance.K_c, instance.objective(Z))


# --- exact search -----------------------------------------------------------

def _subsets(K):
    masks = np.arange(1, 2 ** K)
    members = ((masks[:, None] >> np.arange(K)[None, :]) & 1).astype(bool)  # (S, K)
    return members


def _column_costs(instance, members):
    m = members.astype(float)
    lin = m @ instance.c  # (S, N)
    pair = np.einsum("sp,pqi,sq->si", m, instance.d, m)
    return (lin + pair).T  # (N, S)


class _QuotaTables:
    """Forward/backward minimum costs over remaining-quota states.

    State r (one axis per user, values 0..K_c) counts how many more
    subcarriers each user still has to take. ``back[j][r]`` is the cheapest
    way to finish columns j..N-1 from r; ``fwd[j][r]`` the cheapest way to
    reach r after columns 0..j-1.
    """

    def __init__(self, costs, members, K_c, allowed):
        self.costs, self.members, self.K_c, self.allowed = costs, members, K_c, allowed
        N, _ = costs.shape
        K = members.shape[1]
        shape = (K_c + 1,) * K
        full = tuple([K_c] * K)
        zero = tuple([0] * K)
        self.src = [tuple(slice(1, None) if s else slice(None) for s in row) for row in members]
        self.dst = [tuple(slice(0, K_c) if s else slice(None) for s in row) for row in members]
        back = np.full((N + 1,) + shape, np.inf)
        back[(N,) + zero] = 0.0
        for j in range(N - 1, -1, -1):
            nxt, cur = back[j + 1], back[j]
            for s in np.flatnonzero(allowed[j]):
                view = cur[self.src[s]]
                np.minimum(view, nxt[self.dst[s]] + costs[j, s], out=view)
        fwd = np.full((N + 1,) + shape, np.inf)
        fwd[(0,) + full] = 0.0
        for j in range(N):
            prev, cur = fwd[j], fwd[j + 1]
            for s in np.flatnonzero(allowed[j]):
                view = cur[self.dst[s]]
                np.minimum(view, prev[self.src[s]] + costs[j, s], out=view)
        self.back, self.fwd = back, fwd
        self.optimum = float(back[(0,) + full])

    def through(self, j):
        """Best full cost for every subset choice at column j (inf if not allowed)."""
        out = np.full(self.members.shape[0], np.inf)
        for s in np.flatnonzero(self.allowed[j]):
            out[s] = np.min(self.fwd[j][self.src[s]] + self.back[j + 1][self.dst[s]]) + self.costs[j, s]
        return out


def solve_branch_and_bound(instance: MilpInstance) -> AssignmentMatrix:
    """Global optimum of the 0-1 assignment problem.

    Branches on Z(k, i) in row-major order, exploring the 0-branch first.
    Each branch is bounded by the exact cheapest completion consistent with
    the fixed entries, obtained from forward/backward passes over the
    remaining-quota states (each column picks a non-empty user subset).
    With exact bounds only branches containing an optimum survive, so the
    first leaf is the lexicographically smallest optimal Z.
    """
    K, N = instance.c.shape
    check_feasible(K, N, instance.K_c)
    members = _subsets(K)
    costs = _column_costs(instance, members)
    allowed = np.ones((N, members.shape[0]), dtype=bool)
    tables = _QuotaTables(costs, members, instance.K_c, allowed)
    best = tables.optimum
    if not np.isfinite(best):
        raise InfeasibleError("no assignment satisfies the quota and coverage constraints")
    tol = 1e-12 * abs(best)
    Z = np.zeros((K, N), dtype=np.int8)
    cache = {}
    for k in range(K):
        for i in range(N):
            if i not in cache:
                cache[i] = tables.through(i)
            per_subset = cache[i]
            bound0 = per_subset[~members[:, k]].min(initial=np.inf)
            bound1 = per_subset[members[:, k]].min(initial=np.inf)
            zero_ok = bound0 <= best + tol
            one_ok = bound1 <= best + tol
            if not (zero_ok or one_ok):
                raise SolverError("branch-and-bound lost the incumbent; bounds inconsistent")
            if zero_ok and one_ok:
                # genuine tie: commit to the 0-branch and tighten the tables
                allowed[i, members[:, k]] = False
                tables = _QuotaTables(costs, members, instance.K_c, allowed)
                cache = {}
            elif one_ok:
                Z[k, i] = 1
                allowed[i, ~members[:, k]] = False
            else:
                allowed[i, members[:, k]] = False
    return AssignmentMatrix(Z, instance.K_c, instance.objective(Z))


def brute_force(instance: MilpInstance) -> AssignmentMatrix:
    """Exhaustive search over per-column user subsets (test oracle)."""
    K, N = instance.c.shape
    check_feasible(K, N, instance.K_c)
    members = _subsets(K)
    S = members.shape[0]
    if S ** N > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{S}^{N} candidates exceed the limit {BRUTE_FORCE_LIMIT}")
    best_val, best_key, best_Z = np.inf, None, None
    for choice in itertools.product(range(S), repeat=N):
        Z = members[list(choice)].T.astype(np.int8)  # (K, N)
        if not (Z.sum(axis=1) == instance.K_c).all():
            continue
        val = instance.objective(Z)
        key = tuple(Z.ravel())
        if best_Z is None or val < best_val - 1e-12 * abs(best_val):
            best_val, best_key, best_Z = val, key, Z
        elif val <= best_val + 1e-12 * abs(best_val) and key < best_key:
            best_key, best_Z = key, Z
            best_val = min(best_val, val)
    if best_Z is None:
        raise InfeasibleError("no assignment satisfies the quota and coverage constraints")
    return AssignmentMatrix(best_Z, instance.K_c, instance.objective(best_Z))


# --- baselines --------------------------------------------------------------

def random_assignment(K: int, N_c: int, K_c: int, seed, batch: int = 4096,
                      max_draws: int = 20_000_000) -> AssignmentMatrix:
    """Uniform feasible Z by rejection: each row is a uniform K_c-subset."""
    check_feasible(K, N_c, K_c)
    rng = np.random.default_rng(seed)
    drawn = 0
    while drawn < max_draws:
        keys = rng.random((batch, K, N_c))
        order = np.argsort(keys, axis=-1)[..., :K_c]
        Z = np.zeros((batch, K, N_c), dtype=np.int8)
        np.put_along_axis(Z, order, 1, axis=-1)
        ok = np.flatnonzero((Z.sum(axis=1) >= 1).all(axis=1))
        if ok.size:
            return AssignmentMatrix(Z[ok[0]], K_c)
        drawn += batch
    raise SolverError(f"rejection sampling found no feasible assignment in {max_draws} draws")


def fit_probe_from_channels(H, alpha_mode: str = "restricted"):
    """Fitting cost of a (possibly partial) Z, with the scaling refitted to it."""
    H = np.asarray(H)

    def probe(Z):
        if not np.any(Z):
            return 0.0
        alpha = best_alpha(H, Z if alpha_mode == "restricted" else None)
        return fitting_cost(H, alpha, Z)

    return probe


def _cover(Z, quota, i, order, fit_probe, current, threshold):
    """Give empty subcarrier i its first acceptable user, else the cheapest."""
    N = Z.shape[1]
    best_k, best_cost = None, np.inf
    for k in order:
        if quota[k] == 0:
            continue
        if np.isinf(threshold):
            best_k = k
            break
        Z[k, i] = 1
        cost = fit_probe(Z)
        Z[k, i] = 0
        if cost - current <= threshold * current / N:
            best_k, best_cost = k, cost
            break
        if cost < best_cost:
            best_k, best_cost = k, cost
    Z[best_k, i] = 1
    quota[best_k] -= 1
    if np.isinf(threshold):
        return current
    return fit_probe(Z) if np.isinf(best_cost) else best_cost


def greedy_assignment(G, K_c: int, fit_probe, threshold: float = 0.1) -> AssignmentMatrix:
    """Channel-magnitude greedy assignment.

    1. Each subcarrier receives one user with quota left, which secures
       column coverage: the strongest (by peak |G_i(k, m)|) whose probe cost
       increase passes the threshold test below, else the cheapest.
    2. Subcarrier by subcarrier, remaining users are tried in order of
       strength and kept when the probe cost grows by at most
       ``threshold`` times the current per-subcarrier average cost.
    3. Users still short of K_c take the subcarriers with the smallest
       probe cost increase.
    """
    G = np.asarray(G)
    N, K, _ = G.shape
    check_feasible(K, N, K_c)
    peak = np.abs(G).max(axis=2)  # (N, K)
    rank = np.argsort(-peak, axis=1, kind="stable")
    Z = np.zeros((K, N), dtype=np.int8)
    quota = np.full(K, K_c)

    current = 0.0
    for i in range(N):
        current = _cover(Z, quota, i, rank[i], fit_probe, current, threshold)

    if quota.any():
        current = np.inf if np.isinf(threshold) else fit_probe(Z)
        for i in range(N):
            for k in rank[i]:
                if Z[k, i] or quota[k] == 0:
                    continue
                if np.isinf(threshold):
                    accept, trial_cost = True, None
                else:
                    Z[k, i] = 1
                    trial_cost = fit_probe(Z)
                    Z[k, i] = 0
                    accept = trial_cost - current <= threshold * current / N
                if accept:
                    Z[k, i] = 1
                    quota[k] -= 1
                    if trial_cost is not None:
                        current = trial_cost

    for k in range(K):
        while quota[k] > 0:
            base = fit_probe(Z)
            best_i, best_delta = None, np.inf
            for i in np.flatnonzero(Z[k] == 0):
                Z[k, i] = 1
                delta = fit_probe(Z) - base
                Z[k, i] = 0
                if delta < best_delta:
                    best_i, best_delta = i, delta
            Z[k, best_i] = 1
            quota[k] -= 1
    return AssignmentMatrix(Z, K_c)


def fixed_assignment(mode: str, K: int, N_c: int) -> AssignmentMatrix:
    """Pure SDMA (all ones) or OFDMA (contiguous blocks).

    OFDMA gives every user ceil(N_c / K) adjacent subcarriers. When K does not
    divide N_c the blocks are spread evenly and neighbours overlap on a few
    boundary subcarriers, which keeps the row sums equal.
    """
    if mode == "sdma":
        return AssignmentMatrix(np.ones((K, N_c), dtype=np.int8), N_c)
    if mode == "ofdma":
        if K > N_c:
            raise InfeasibleError(f"OFDMA needs K={K} <= N_c={N_c}")
        w = -(-N_c // K)
        Z = np.zeros((K, N_c), dtype=np.int8)
        for k in range(K):
            start = 0 if K == 1 else (k * (N_c - w)) // (K - 1)
            Z[k, start:start + w] = 1
        return AssignmentMatrix(Z, w)
    raise ValueError(f"unknown baseline mode {mode!r}")
