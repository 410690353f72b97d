"""Wideband multipath channel between the metasurface aperture and the users.

Coordinates: the aperture lies in the x-z plane centred at (0, 0, bs_height)
and radiates towards +y. Users stand on the ground (z = 0) on a row parallel
to the x axis at y = user_range. Atom m of a layer maps to grid position
(m_x, m_z) with m = m_x * M_z + m_z, the ordering produced by
``kron(alpha_x, alpha_z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SPEED_OF_LIGHT, SystemConfig
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class Geometry:
    bs_height: float
    user_range: float
    user_spacing: float
    num_users: int
    meta_cols: int
    meta_rows: int
    atom_pitch: float
    bs_gain_dbi: float = 3.0
    ue_gain_dbi: float = 0.0
    f0: float = 28e9
    scatter_x: tuple = (-45.0, 45.0)
    scatter_y: tuple = (10.0, 240.0)
    scatter_z: tuple = (0.0, 10.0)

    def __post_init__(self):
        if self.meta_cols < 1 or self.meta_rows < 1 or self.num_users < 1:
            raise ConfigError("atom grid and user count must be positive")
        if min(self.bs_height, self.user_range, self.atom_pitch, self.f0) <= 0:
            raise ConfigError("lengths and f0 must be positive")
        if self.num_users > 1 and self.user_spacing <= 0:
            raise ConfigError("user_spacing must be positive")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "Geometry":
        return cls(
            bs_height=cfg.bs_height,
            user_range=cfg.user_range,
            user_spacing=cfg.user_spacing,
            num_users=cfg.num_users,
            meta_cols=cfg.meta_cols,
            meta_rows=cfg.meta_rows,
            atom_pitch=cfg.pitch,
            bs_gain_dbi=cfg.bs_gain_dbi,
            ue_gain_dbi=cfg.ue_gain_dbi,
            f0=cfg.f0,
            scatter_x=tuple(cfg.scatter_x),
            scatter_y=tuple(cfg.scatter_y),
            scatter_z=tuple(cfg.scatter_z),
        )

    @property
    def num_atoms(self) -> int:
        return self.meta_cols * self.meta_rows

    @property
    def aperture_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.bs_height])

    @property
    def antenna_amplitude(self) -> float:
        return 10.0 ** ((self.bs_gain_dbi + self.ue_gain_dbi) / 20.0)

    def user_position(self, k: int) -> np.ndarray:
        if not 0 <= k < self.num_users:
            raise DomainError(f"user index {k} out of range")
        x = (k - (self.num_users - 1) / 2.0) * self.user_spacing
        return np.array([x, self.user_range, 0.0])


@dataclass(frozen=True)
class Scatterer:
    position: np.ndarray
    phase: complex  # unit-modulus phase applied to the path gain
    visible: tuple | None = None  # per-user visibility; None means all users


@dataclass(frozen=True)
class Path:
    gain: complex
    delay: float
    elevation: float
    azimuth: float


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray  # (N_c, K, M) complex
    frequencies: np.ndarray
    seed: int | None = None
    scatterers: tuple = field(default=(), repr=False)

    @property
    def num_subcarriers(self) -> int:
        return self.G.shape[0]

    @property
    def num_users(self) -> int:
        return self.G.shape[1]

    @property
    def num_atoms(self) -> int:
        return self.G.shape[2]


def subcarrier_frequencies(f0: float, bandwidth: float, num_subcarriers: int) -> np.ndarray:
    """Centre frequencies of ``num_subcarriers`` equal slots spanning ``bandwidth``."""
    if bandwidth <= 0 or num_subcarriers < 1:
        raise ConfigError("bandwidth and num_subcarriers must be positive")
    i = np.arange(1, num_subcarriers + 1)
    return f0 - bandwidth / 2.0 + (i - 0.5) * bandwidth / num_subcarriers


def generate_scatterers(geometry: Geometry, count: int, seed: int) -> list[Scatterer]:
    if count < 0:
        raise DomainError("scatterer count must be non-negative")
    rng = np.random.default_rng(seed)
    lo = np.array([geometry.scatter_x[0], geometry.scatter_y[0], geometry.scatter_z[0]])
    hi = np.array([geometry.scatter_x[1], geometry.scatter_y[1], geometry.scatter_z[1]])
    positions = rng.uniform(lo, hi, size=(count, 3))
    phases = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=count))
    return [Scatterer(position=positions[p], phase=complex(phases[p])) for p in range(count)]


def steering_vector(geometry: Geometry, elevation: float, azimuth: float, f: float) -> np.ndarray:
    """UPA response ``kron(alpha_x, alpha_z)`` for one arrival direction."""
    if not 0.0 <= elevation < np.pi:
        raise DomainError(f"elevation {elevation} outside [0, pi)")
    if not -np.pi / 2 <= azimuth <= np.pi / 2:
        raise DomainError(f"azimuth {azimuth} outside [-pi/2, pi/2]")
    return _steering(geometry, np.atleast_1d(elevation), np.atleast_1d(azimuth), f)[0]


def _steering(geometry, elevation, azimuth, f):
    # (P,) angles -> (P, M)
    k = 2j * np.pi * geometry.atom_pitch * f / SPEED_OF_LIGHT
    mx = np.arange(geometry.meta_cols)
    mz = np.arange(geometry.meta_rows)
    ax = np.exp(k * np.outer(np.sin(elevation) * np.sin(azimuth), mx))
    az = np.exp(k * np.outer(np.cos(elevation), mz))
    return (ax[:, :, None] * az[:, None, :]).reshape(len(elevation), -1)


def _angles(displacement):
    d = np.linalg.norm(displacement, axis=-1)
    elevation = np.arccos(np.clip(displacement[..., 2] / d, -1.0, 1.0))
    azimuth = np.arctan2(displacement[..., 0], displacement[..., 1])
    return elevation, azimuth


def user_paths(scatterers, user_index: int, geometry: Geometry, los: bool = True) -> list[Path]:
    """Path list for one user: index 0 is the LoS path (if present), then one per scatterer.

    Amplitudes follow sqrt(lambda0 / (4 pi d)) over the total travelled
    distance, scaled by the combined antenna gain. The LoS path carries no
    random phase; scattered paths carry the scatterer's phase.
    """
    user = geometry.user_position(user_index)
    origin = geometry.aperture_center
    lam0 = SPEED_OF_LIGHT / geometry.f0
    amp = geometry.antenna_amplitude
    paths = []
    if los:
        d = float(np.linalg.norm(user - origin))
        el, az = _angles(user - origin)
        paths.append(Path(amp * np.sqrt(lam0 / (4 * np.pi * d)), d / SPEED_OF_LIGHT, float(el), float(az)))
    for sc in scatterers:
        if sc.visible is not None and not sc.visible[user_index]:
            continue
        leg1 = sc.position - origin
        d = float(np.linalg.norm(leg1) + np.linalg.norm(user - sc.position))
        el, az = _angles(leg1)
        gain = amp * np.sqrt(lam0 / (4 * np.pi * d)) * sc.phase
        paths.append(Path(complex(gain), d / SPEED_OF_LIGHT, float(el), float(az)))
    return paths


def paths_channel(paths, geometry: Geometry, f: float) -> np.ndarray:
    """Sum of path contributions g_p e^{-j 2 pi f tau_p} alpha_p^H at frequency ``f``."""
    if not paths:
        return np.zeros(geometry.num_atoms, dtype=complex)
    gains = np.array([p.gain for p in paths], dtype=complex)
    delays = np.array([p.delay for p in paths])
    el = np.array([p.elevation for p in paths])
    az = np.array([p.azimuth for p in paths])
    coeff = gains * np.exp(-2j * np.pi * f * delays)
    return coeff @ _steering(geometry, el, az, f).conj()


def channel_vector(scatterers, user_index: int, f: float, geometry: Geometry, los: bool = True) -> np.ndarray:
    return paths_channel(user_paths(scatterers, user_index, geometry, los), geometry, f)


def assemble_channel(scatterers, geometry: Geometry, frequencies, seed=None, los: bool = True) -> ChannelRealization:
    frequencies = np.asarray(frequencies, dtype=float)
    G = np.empty((len(frequencies), geometry.num_users, geometry.num_atoms), dtype=complex)
    for k in range(geometry.num_users):
        paths = user_paths(scatterers, k, geometry, los)
        for i, f in enumerate(frequencies):
            G[i, k] = paths_channel(paths, geometry, f)
    G.setflags(write=False)
    return ChannelRealization(G=G, frequencies=frequencies, seed=seed, scatterers=tuple(scatterers))


def realize_channel(cfg: SystemConfig, seed: int) -> ChannelRealization:
    """Scatterers plus assembled channel for one Monte-Carlo draw."""
    geometry = Geometry.from_config(cfg)
    freqs = subcarrier_frequencies(cfg.f0, cfg.bandwidth, cfg.num_subcarriers)
    scatterers = generate_scatterers(geometry, cfg.num_scatterers, seed)
    return assemble_channel(scatterers, geometry, freqs, seed=seed)
