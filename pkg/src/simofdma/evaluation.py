"""Link-level metrics: NMSE, heatmaps, water-filling, sum rate and BPSK BER.

Every metric sees the end-to-end channel ``alpha * H_i`` restricted to the
active users of subcarrier i, so the SIM schemes and the digital ZF
reference are compared under the same normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import allocation
from .allocation import AssignmentMatrix
from .config import SystemConfig
from .errors import DegenerateChannelError, DomainError
from .objective import as_matrix, best_alpha


@dataclass(frozen=True)
class LinkBudget:
    """Total transmit power and per-subcarrier noise.

    ``snr_offset_db`` raises the noise floor; it is how the pure OFDMA
    reference is normalized to the per-user occupancy of the scheme it is
    compared against.
    """

    transmit_power_dbm: float
    noise_psd_dbm_hz: float = -112.0
    bandwidth: float = 40e6
    num_subcarriers: int = 16
    snr_offset_db: float = 0.0

    def __post_init__(self):
        values = (self.transmit_power_dbm, self.noise_psd_dbm_hz, self.bandwidth, self.snr_offset_db)
        if not all(math.isfinite(v) for v in values):
            raise DomainError("link budget entries must be finite")
        if self.bandwidth <= 0 or self.num_subcarriers < 1:
            raise DomainError("bandwidth and subcarrier count must be positive")

    @classmethod
    def from_config(cls, cfg: SystemConfig, transmit_power_dbm: float, snr_offset_db: float = 0.0):
        return cls(transmit_power_dbm, cfg.noise_psd_dbm_hz, cfg.bandwidth, cfg.num_subcarriers, snr_offset_db)

    @property
    def transmit_power(self) -> float:
        return dbm_to_watts(self.transmit_power_dbm)

    @property
    def noise_power(self) -> float:
        """sigma^2 on one subcarrier, PSD * B / N_c, in watts."""
        return dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth / self.num_subcarriers

    @property
    def effective_noise(self) -> float:
        return self.noise_power * 10.0 ** (self.snr_offset_db / 10.0)


@dataclass
class MetricsRecord:
    scheme: str
    seed: int
    config_hash: str = ""
    nmse: float = float("nan")
    sum_rate: float = float("nan")
    ber: float = float("nan")
    ber_per_user: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not math.isnan(self.ber) and not 0.0 <= self.ber <= 0.5 + 0.05:
            raise DomainError(f"BER {self.ber} outside [0, 0.5]")
        if not math.isnan(self.sum_rate) and self.sum_rate < 0:
            raise DomainError("sum rate must be non-negative")


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def snr_offset_db(K_c: int, N_c: int, K: int) -> float:
    """Occupancy ratio of a K_c-subcarrier scheme over pure OFDMA, in dB."""
    return 10.0 * math.log10(K_c / (N_c / K))


def nmse(gamma: float, Z) -> float:
    """Fitting cost divided by the number of active user-subcarrier pairs."""
    active = int(np.sum(as_matrix(Z)))
    if active == 0:
        raise DomainError("assignment has no active pair")
    return float(gamma) / active


def heatmap(H, alpha: float, Z) -> np.ndarray:
    """|alpha T_i H_i T_i| as K x K blocks laid side by side, shape (K, K * N_c)."""
    H = np.asarray(H)
    z = as_matrix(Z).T.astype(float)
    masked = np.abs(alpha * H) * z[:, :, None] * z[:, None, :]
    N, K, _ = H.shape
    return masked.transpose(1, 0, 2).reshape(K, N * K)


# --- power allocation -------------------------------------------------------

def water_filling(gains, total_power: float, noise: float) -> np.ndarray:
    """p = max(0, mu - noise / g) with sum(p) = total_power.

    The water level is bracketed by bisection and then fixed in closed form
    on the resulting active set, so the active entries share mu to rounding.
    Zero gains receive no power.
    """
    g = np.asarray(gains, dtype=float)
    if np.any(g < 0) or not np.any(g > 0):
        raise DomainError("water-filling needs non-negative gains with at least one positive")
    if total_power < 0 or noise <= 0:
        raise DomainError("need total_power >= 0 and noise > 0")
    if total_power == 0:
        return np.zeros_like(g)
    pos = g > 0
    floor = np.full(g.shape, np.inf)
    floor[pos] = noise / g[pos]
    lo, hi = 0.0, total_power + floor[pos].min()
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        if np.sum(np.maximum(0.0, mu - floor[pos])) > total_power:
            hi = mu
        else:
            lo = mu
        if hi - lo <= 1e-12 * hi:
            break
    active = floor < hi
    # the closed form can drop an entry that bisection kept marginally; shrink until consistent
    while True:
        mu = (total_power + floor[active].sum()) / active.sum()
        keep = active & (floor < mu)
        if keep.sum() == active.sum():
            break
        active = keep
    p = np.zeros_like(g)
    p[active] = mu - floor[active]
    return p


def _signal_and_interference(H, alpha, z, powers):
    """Desired power |alpha H_kk|^2 and received interference per (i, k)."""
    E = np.abs(alpha * np.asarray(H)) ** 2 * z[:, :, None] * z[:, None, :]
    signal = np.einsum("ikk->ik", E)
    interference = E @ powers[:, :, None]
    return signal, interference[:, :, 0] - signal * powers


def iterative_water_filling(H, alpha: float, Z, total_power: float, noise: float,
                            iterations: int = 20, rtol: float = 1e-9) -> np.ndarray:
    """Water-filling on interference-aware gains, repeated until the powers settle.

    Pass t uses g_{k,i} = |alpha H_i(k,k)|^2 * noise / (noise + I_{k,i}) with the
    interference I from pass t-1; pass 0 ignores interference. Returns a
    (K, N_c) power matrix, zero on inactive pairs.
    """
    z = as_matrix(Z).T.astype(float)
    signal, _ = _signal_and_interference(H, alpha, z, np.zeros_like(z))
    p = water_filling(signal.ravel(), total_power, noise).reshape(z.shape)
    for _ in range(iterations):
        _, interf = _signal_and_interference(H, alpha, z, p)
        g = signal * noise / (noise + interf)
        new = water_filling(g.ravel(), total_power, noise).reshape(z.shape)
        done = np.max(np.abs(new - p)) <= rtol * total_power
        p = new
        if done:
            break
    return p.T


# --- rates and errors -------------------------------------------------------

def sinr(H, alpha: float, Z, powers, noise: float) -> np.ndarray:
    """(K, N_c) SINR per pair, zero on inactive pairs."""
    z = as_matrix(Z).T.astype(float)
    p = np.asarray(powers, dtype=float).T * z
    signal, interf = _signal_and_interference(H, alpha, z, p)
    return (signal * p / (interf + noise) * z).T


def sum_rate(H, alpha: float, Z, powers, noise: float) -> float:
    """(1 / N_c) sum over active pairs of log2(1 + SINR), bits/s/Hz."""
    s = sinr(H, alpha, Z, powers, noise)
    return float(np.sum(np.log2(1.0 + s)) / s.shape[1])


def bpsk_ber(snr) -> np.ndarray:
    """Q(sqrt(2 snr)) for BPSK in complex Gaussian noise."""
    return 0.5 * erfc(np.sqrt(np.asarray(snr, dtype=float)))


def ber_monte_carlo(H, alpha: float, Z, powers, noise: float, trials: int, seed,
                    chunk: int = 512) -> np.ndarray:
    """Per-user BPSK bit error rate by simulation.

    Each trial sends one BPSK symbol per active pair, receives
    y_i = alpha H_i x_i + n_i with n_i ~ CN(0, noise I) and decides on the
    sign of Re(y). Trials run in fixed-size chunks whose streams derive from
    (seed, chunk index), so results do not depend on scheduling.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    Hs = alpha * np.asarray(H)
    z = as_matrix(Z).T.astype(bool)  # (N, K)
    amp = np.sqrt(np.asarray(powers, dtype=float).T) * z
    N, K = z.shape
    errors = np.zeros(K, dtype=np.int64)
    for c, start in enumerate(range(0, trials, chunk)):
        n = min(chunk, trials - start)
        rng = np.random.default_rng(np.random.SeedSequence([*_words(seed), c]))
        s = 1.0 - 2.0 * rng.integers(0, 2, size=(n, N, K))
        x = s * amp
        noise_draw = rng.standard_normal((2, n, N, K)) * math.sqrt(noise / 2.0)
        y = np.einsum("ikq,tiq->tik", Hs, x) + noise_draw[0] + 1j * noise_draw[1]
        wrong = (np.sign(y.real) != s) & z
        errors += wrong.sum(axis=(0, 1))
    bits = trials * z.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(bits > 0, errors / np.maximum(bits, 1), np.nan)


def _words(seed):
    return list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]


# --- reference schemes ------------------------------------------------------

def baseline_assignments(mode: str, K: int, N_c: int) -> AssignmentMatrix:
    return allocation.fixed_assignment(mode, K, N_c)


def digital_zf_channels(G) -> np.ndarray:
    """Effective channels G_i P_i with P_i the column-normalized pseudo-inverse."""
    G = np.asarray(G)
    N, K, M = G.shape
    if K > M:
        raise DegenerateChannelError(f"zero forcing needs K={K} <= M={M}")
    out = np.empty((N, K, K), dtype=complex)
    for i in range(N):
        s = np.linalg.svd(G[i], compute_uv=False)
        if s[-1] <= s[0] * 1e-12:
            raise DegenerateChannelError(f"channel on subcarrier {i} is rank deficient")
        P = np.linalg.pinv(G[i])
        P /= np.linalg.norm(P, axis=0, keepdims=True)
        out[i] = G[i] @ P
    return out


def evaluate_link(H, alpha: float, Z, budget: LinkBudget, *, scheme: str, seed,
                  ber_trials: int = 0, waterfill_iterations: int = 20,
                  gamma: float | None = None, config_hash: str = "") -> MetricsRecord:
    """Water-filled powers, sum rate and (optionally) simulated BER for one link."""
    noise = budget.effective_noise
    p = iterative_water_filling(H, alpha, Z, budget.transmit_power, noise, waterfill_iterations)
    record = MetricsRecord(scheme=scheme, seed=_words(seed)[0], config_hash=config_hash,
                           sum_rate=sum_rate(H, alpha, Z, p, noise))
    if gamma is not None:
        record.nmse = nmse(gamma, Z)
    if ber_trials:
        per_user = ber_monte_carlo(H, alpha, Z, p, noise, ber_trials, seed)
        record.ber_per_user = per_user
        record.ber = float(np.nanmean(per_user))
    return record


def digital_zf_baseline(G, budget: LinkBudget, *, seed=0, ber_trials: int = 0,
                        waterfill_iterations: int = 20, config_hash: str = "") -> MetricsRecord:
    """Per-subcarrier digital ZF with every user on every subcarrier."""
    H = digital_zf_channels(G)
    N, K, _ = H.shape
    Z = np.ones((K, N), dtype=np.int8)
    alpha = best_alpha(H)
    return evaluate_link(H, alpha, Z, budget, scheme="digital-zf", seed=seed, ber_trials=ber_trials,
                         waterfill_iterations=waterfill_iterations, config_hash=config_hash)
