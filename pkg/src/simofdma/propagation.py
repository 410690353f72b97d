"""Wave-domain propagation through the stacked metasurface.

Layer l (1-based) sits at depth l * d_T behind the feed line. Every layer is
an M_x x M_z grid with pitch r_T centred on the aperture axis; atom m maps to
(m_x, m_z) with m = m_x * M_z + m_z, matching the steering-vector ordering
in :mod:`simofdma.channel`. The K feed antennas form a centred line along x
with the same pitch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, SystemConfig
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class SimGeometry:
    layers: int
    meta_cols: int
    meta_rows: int
    pitch: float
    area: float
    thickness: float
    num_feeds: int

    def __post_init__(self):
        if self.layers < 1 or self.meta_cols < 1 or self.meta_rows < 1 or self.num_feeds < 1:
            raise ConfigError("layers, atom grid and feed count must be positive")
        if min(self.pitch, self.area, self.thickness) <= 0:
            raise ConfigError("pitch, atom area and thickness must be positive")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "SimGeometry":
        return cls(cfg.layers, cfg.meta_cols, cfg.meta_rows, cfg.pitch, cfg.area, cfg.thickness, cfg.num_users)

    @property
    def num_atoms(self) -> int:
        return self.meta_cols * self.meta_rows

    @property
    def layer_gap(self) -> float:
        return self.thickness / self.layers

    def atom_xz(self) -> np.ndarray:
        mx, mz = np.meshgrid(np.arange(self.meta_cols), np.arange(self.meta_rows), indexing="ij")
        x = (mx - (self.meta_cols - 1) / 2.0) * self.pitch
        z = (mz - (self.meta_rows - 1) / 2.0) * self.pitch
        return np.stack([x.ravel(), z.ravel()], axis=1)

    def feed_xz(self) -> np.ndarray:
        x = (np.arange(self.num_feeds) - (self.num_feeds - 1) / 2.0) * self.pitch
        return np.stack([x, np.zeros_like(x)], axis=1)

    def inter_layer_distances(self) -> np.ndarray:
        """(M, M) distances t[m, m'] from atom m' of one layer to atom m of the next."""
        xz = self.atom_xz()
        lateral = xz[:, None, :] - xz[None, :, :]
        return np.sqrt(self.layer_gap ** 2 + np.sum(lateral ** 2, axis=-1))

    def feed_distances(self) -> np.ndarray:
        """(M, K) distances from feed k to atom m of the first layer."""
        lateral = self.atom_xz()[:, None, :] - self.feed_xz()[None, :, :]
        return np.sqrt(self.layer_gap ** 2 + np.sum(lateral ** 2, axis=-1))


def rs_coefficient(t, area, gap, f):
    """Rayleigh-Sommerfeld transmission coefficient between two atoms.

    ``(S d / t^2) (1 / (2 pi t) - j f / c) exp(j 2 pi t f / c)``; broadcasts
    over array-valued ``t`` and ``f``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("atom distance must be positive")
    f = np.asarray(f, dtype=float)
    return (area * gap / t ** 2) * (1.0 / (2 * np.pi * t) - 1j * f / SPEED_OF_LIGHT) \
        * np.exp(2j * np.pi * t * f / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class PhaseConfig:
    theta: np.ndarray  # (L, M) radians

    @property
    def phi(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @classmethod
    def random(cls, layers, atoms, rng) -> "PhaseConfig":
        return cls(rng.uniform(0.0, 2 * np.pi, size=(layers, atoms)))

    @classmethod
    def from_phi(cls, phi) -> "PhaseConfig":
        return cls(np.angle(np.asarray(phi)))


@dataclass(frozen=True)
class SimStack:
    """Per-subcarrier feed matrices W1 (N_c, M, K) and inter-layer matrices
    W (L-1, N_c, M, M). Depends only on geometry and frequencies."""

    W1: np.ndarray
    W: np.ndarray
    frequencies: np.ndarray

    @property
    def layers(self) -> int:
        return self.W.shape[0] + 1

    @property
    def num_atoms(self) -> int:
        return self.W1.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.W1.shape[0]

    def layer_matrix(self, l: int) -> np.ndarray:
        """W^l for all subcarriers, 1-based layer index."""
        return self.W1 if l == 1 else self.W[l - 2]


def build_stack(geometry: SimGeometry, frequencies) -> SimStack:
    freqs = np.asarray(frequencies, dtype=float)
    gap = geometry.layer_gap
    f = freqs[:, None, None]
    W1 = rs_coefficient(geometry.feed_distances()[None], geometry.area, gap, f)
    inter = rs_coefficient(geometry.inter_layer_distances()[None], geometry.area, gap, f)
    W = np.broadcast_to(inter, (geometry.layers - 1,) + inter.shape).copy()
    for arr in (W1, W, freqs):
        arr.setflags(write=False)
    return SimStack(W1=W1, W=W, frequencies=freqs)


def cascade(stack: SimStack, phases: PhaseConfig, i: int | None = None) -> np.ndarray:
    """P_i = Phi^L W^L ... Phi^1 W^1; all subcarriers stacked when ``i`` is None."""
    phi = phases.phi
    sel = slice(None) if i is None else i
    P = phi[0][:, None] * stack.W1[sel]
    for l in range(2, stack.layers + 1):
        P = phi[l - 1][:, None] * (stack.W[l - 2][sel] @ P)
    return P


def split_cascade(stack: SimStack, phases: PhaseConfig, i: int, l: int):
    """Factors (P_left, P_right) with P_left diag(phi^l) P_right == cascade(i).

    ``P_left = Phi^L W^L ... Phi^{l+1} W^{l+1}`` (identity for l = L) and
    ``P_right = W^l Phi^{l-1} ... Phi^1 W^1``.
    """
    L = stack.layers
    if not 1 <= l <= L:
        raise DomainError(f"layer {l} outside 1..{L}")
    phi = phases.phi
    right = stack.W1[i]
    for j in range(2, l + 1):
        right = stack.W[j - 2][i] @ (phi[j - 2][:, None] * right)
    left = np.eye(stack.num_atoms, dtype=complex)
    for j in range(l + 1, L + 1):
        left = phi[j - 1][:, None] * (stack.W[j - 2][i] @ left)
    return left, right


def effective_channel(G, P) -> np.ndarray:
    G = np.asarray(G)
    P = np.asarray(P)
    if G.shape[-1] != P.shape[-2]:
        raise DomainError(f"cannot multiply channel {G.shape} by cascade {P.shape}")
    return G @ P
