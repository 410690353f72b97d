"""Phase-shift optimization for a fixed assignment.

With every layer but l held fixed, the fitting cost is a Hermitian quadratic
in the unit-modulus vector phi of layer l::

    cost(phi) = alpha^2 phi^H A phi - 2 alpha Re(b^H phi) + const

which follows from P_i = P_left diag(phi) P_right and the identity
Tr(diag(phi)^H X diag(phi) Y) = phi^H (X * Y^T) phi (elementwise product).
Two solvers minimise it over the unit-modulus set: exact per-atom coordinate
descent, and a penalty convex-concave procedure (PCCP) that relaxes
|phi_m| = 1 with slack variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IterationLimitError
from .objective import as_matrix, best_alpha
from .propagation import PhaseConfig, SimStack


@dataclass(frozen=True)
class RestrictedPair:
    G_z: np.ndarray  # (R, M)
    P_z: np.ndarray  # (M, R)
    users: np.ndarray


def restrict(G_i, P_i, users) -> RestrictedPair:
    users = np.asarray(users, dtype=int)
    if users.size == 0:
        raise DomainError("subcarrier serves no user; column coverage violated")
    if np.any(np.diff(users) <= 0):
        raise DomainError("user subset must be strictly increasing")
    return RestrictedPair(np.asarray(G_i)[users, :], np.asarray(P_i)[:, users], users)


@dataclass(frozen=True)
class LayerQuadratic:
    A: np.ndarray
    b: np.ndarray
    const: float
    alpha: float

    def value(self, phi) -> float:
        phi = np.asarray(phi)
        a = self.alpha
        quad = np.real(np.vdot(phi, self.A @ phi))
        return float(a * a * quad - 2 * a * np.real(np.vdot(self.b, phi)) + self.const)


def _left_products(stack: SimStack, phi: np.ndarray) -> list:
    """left[l-1] = Phi^L W^L ... Phi^{l+1} W^{l+1} for every layer, all subcarriers."""
    L, M, N = stack.layers, stack.num_atoms, stack.num_subcarriers
    left = [None] * L
    left[L - 1] = np.broadcast_to(np.eye(M, dtype=complex), (N, M, M))
    for l in range(L - 1, 0, -1):  # fill layer l (1-based) from layer l+1
        left[l - 1] = (left[l] * phi[l][None, None, :]) @ stack.W[l - 1]
    return left


def _quadratic_from_factors(G, z, alpha, left, right) -> LayerQuadratic:
    # G (N,K,M), z (N,K), left (N,M,M), right (N,M,K)
    GL = G @ left
    X = np.einsum("ikm,ik,ikn->imn", GL.conj(), z, GL)
    Y = np.einsum("imk,ik,ink->imn", right, z, right.conj())
    A = np.einsum("imn,inm->mn", X, Y)
    A = 0.5 * (A + A.conj().T)
    d = np.einsum("imk,ik,ikm->m", right, z, GL)
    return LayerQuadratic(A=A, b=d.conj(), const=float(z.sum()), alpha=float(alpha))


def layer_quadratic(stack: SimStack, phases: PhaseConfig, G, Z, alpha: float, l: int) -> LayerQuadratic:
    """Quadratic model of the fitting cost in the phases of layer ``l`` (1-based)."""
    L = stack.layers
    if not 1 <= l <= L:
        raise DomainError(f"layer {l} outside 1..{L}")
    phi = phases.phi
    z = as_matrix(Z).T.astype(float)
    right = stack.W1
    for j in range(2, l + 1):
        right = stack.W[j - 2] @ (phi[j - 2][None, :, None] * right)
    left = _left_products(stack, phi)[l - 1]
    return _quadratic_from_factors(np.asarray(G), z, alpha, left, right)


def coordinate_descent_layer(quadratic: LayerQuadratic, phi_init, sweeps: int = 3,
                             tol: float | None = None) -> np.ndarray:
    """Exact per-atom minimisation over the unit circle, ``sweeps`` passes.

    With the other atoms fixed, the cost in phi_m is 2 Re(c_m^* phi_m) + const
    with c_m = alpha^2 (A phi)_m - alpha^2 A_mm phi_m - alpha b_m, minimised by
    phi_m = -c_m / |c_m|. If ``tol`` is given, stops early once a sweep moves
    no atom by more than ``tol``.
    """
    phi = np.array(phi_init, dtype=complex)
    A, b, a = quadratic.A, quadratic.b, quadratic.alpha
    a2 = a * a
    Aphi = A @ phi
    M = phi.size
    for _ in range(sweeps):
        moved = 0.0
        for m in range(M):
            c = a2 * (Aphi[m] - A[m, m] * phi[m]) - a * b[m]
            mag = abs(c)
            if mag < 1e-14:
                continue
            new = -c / mag
            delta = new - phi[m]
            if delta != 0:
                Aphi += A[:, m] * delta
                phi[m] = new
                moved = max(moved, abs(delta))
        if tol is not None and moved <= tol:
            break
    return phi


# --- PCCP -------------------------------------------------------------------

def _hinge_atom_cost(x, a, c, x0, lam, beta):
    r2 = x.real * x.real + x.imag * x.imag
    lin = 2.0 * (c.real * x.real + c.imag * x.imag)
    proj = 2.0 * (x0.real * x.real + x0.imag * x.imag)
    return a * r2 + lin + lam * max(0.0, r2 - 1.0) + lam * max(0.0, beta - proj)


def _solve_atom(a, c, x0, lam):
    """Minimise a|x|^2 + 2Re(c^* x) + lam (|x|^2 - 1)_+ + lam (1 + |x0|^2 - 2Re(x0^* x))_+.

    The objective is convex and piecewise quadratic; its minimiser is a
    stationary point of one smooth piece, of the restriction to the unit
    circle or to the hinge line, or a point where those two meet. Every such
    candidate is evaluated and the cheapest returned.
    """
    beta = 1.0 + x0.real * x0.real + x0.imag * x0.imag
    v = c - lam * x0
    cands = [-v / a, -v / (a + lam), -c / (a + lam), -c / a]
    for w in (c, v):
        mag = abs(w)
        if mag > 0:
            cands.append(-w / mag)
    r0 = abs(x0)
    if r0 > 1e-15:
        u0 = x0 / r0
        e = 1j * u0
        p0 = u0 * (beta / (2.0 * r0))
        ce = c.real * e.real + c.imag * e.imag
        for s in (0.0, 1.0):
            cands.append(p0 - e * ce / (a + lam * s))
        cosd = beta / (2.0 * r0)
        if cosd <= 1.0:
            ang = math.acos(cosd)
            cands.append(u0 * complex(math.cos(ang), math.sin(ang)))
            cands.append(u0 * complex(math.cos(ang), -math.sin(ang)))
    return min(cands, key=lambda x: _hinge_atom_cost(x, a, c, x0, lam, beta))


def _slacks(phi, phi0):
    radial = np.maximum(0.0, np.abs(phi) ** 2 - 1.0)
    linear = np.maximum(0.0, 1.0 + np.abs(phi0) ** 2 - 2.0 * np.real(np.conj(phi0) * phi))
    return np.concatenate([linear, radial])


def _convex_step(quadratic, phi0, lam, max_sweeps=2000, tol=1e-12):
    """Block-coordinate minimisation of the slack-eliminated convex subproblem."""
    A, b, a = quadratic.A, quadratic.b, quadratic.alpha
    a2 = a * a
    phi = np.array(phi0, dtype=complex)
    Aphi = A @ phi
    diag = np.real(np.diag(A))
    for _ in range(max_sweeps):
        moved = 0.0
        for m in range(phi.size):
            c = complex(a2 * (Aphi[m] - A[m, m] * phi[m]) - a * b[m])
            x = _solve_atom(a2 * diag[m], c, complex(phi0[m]), lam)
            delta = x - phi[m]
            if delta != 0:
                Aphi += A[:, m] * delta
                phi[m] = x
                moved = max(moved, abs(delta))
        if moved <= tol:
            break
    return phi


@dataclass
class PccpResult:
    phi: np.ndarray
    slacks: np.ndarray
    iterations: int
    penalties: list = field(default_factory=list)
    objectives: list = field(default_factory=list)


def pccp_layer(quadratic: LayerQuadratic, phi_init, lambda0: float = 1e-3, growth: float = 2.0,
               lambda_max: float = 1e4, tol: float = 1e-6, max_iter: int = 200) -> PccpResult:
    """Penalty convex-concave procedure for the unit-modulus layer problem.

    Each iteration linearises the concave side of |phi_m|^2 >= 1 around the
    previous iterate phi0, solves the convex problem with penalised slacks
    (slacks eliminated in closed form), then sets phi0 <- phi and grows the
    penalty. The returned phases are projected onto the unit circle.
    """
    phi0 = np.array(phi_init, dtype=complex)
    lam = lambda0
    prev = None
    result = PccpResult(phi=phi0, slacks=np.zeros(2 * phi0.size), iterations=0)
    for it in range(1, max_iter + 1):
        phi = _convex_step(quadratic, phi0, lam)
        slacks = _slacks(phi, phi0)
        obj = quadratic.value(phi)
        result.penalties.append(lam)
        result.objectives.append(obj)
        done = prev is not None and slacks.max() < tol and abs(obj - prev) <= tol * max(1.0, abs(obj))
        phi0, prev = phi, obj
        lam = min(growth * lam, lambda_max)
        if done:
            result.phi = phi / np.abs(phi)
            result.slacks = slacks
            result.iterations = it
            return result
    raise IterationLimitError(
        f"PCCP did not converge in {max_iter} iterations",
        {"max_slack": float(slacks.max()), "objective": obj, "penalty": lam},
    )


# --- scaling factor ---------------------------------------------------------

def optimal_alpha(G, P, Z=None, restricted: bool = True) -> float:
    """Least-squares real scaling of the effective channels G_i P_i.

    With ``restricted`` the sums only run over active (user, subcarrier)
    entries of Z, which is the exact minimiser of the masked fitting cost.
    """
    H = np.asarray(G) @ np.asarray(P)
    return best_alpha(H, Z if (restricted and Z is not None) else None)


# --- one pass over all layers -----------------------------------------------

def phase_step(stack: SimStack, G, Z, alpha: float, theta: np.ndarray, inner: str = "cd",
               sweeps: int = 3, pccp_options: dict | None = None, on_layer=None) -> np.ndarray:
    """Update every layer once, l = 1..L, returning the new (L, M) phases.

    ``on_layer(l, quadratic, phi_before, phi_after, info)`` is called after
    each layer update (used for tracing).
    """
    phi = np.exp(1j * np.asarray(theta, dtype=float))
    G = np.asarray(G)
    z = as_matrix(Z).T.astype(float)
    left = _left_products(stack, phi)
    right = stack.W1
    for l in range(1, stack.layers + 1):
        if l > 1:
            right = stack.W[l - 2] @ (phi[l - 2][None, :, None] * right)
        quad = _quadratic_from_factors(G, z, alpha, left[l - 1], right)
        before = phi[l - 1].copy()
        info = {}
        if inner == "cd":
            new = coordinate_descent_layer(quad, before, sweeps)
        elif inner == "pccp":
            res = pccp_layer(quad, before, **(pccp_options or {}))
            new, info = res.phi, {"max_slack": float(res.slacks.max())}
            # projection after relaxation can lose ground; never accept a worse layer
            if quad.value(new) > quad.value(before):
                new = before
        else:
            raise ValueError(f"unknown inner solver {inner!r}")
        phi[l - 1] = new
        if on_layer is not None:
            on_layer(l, quad, before, new, info)
    return np.angle(phi)
