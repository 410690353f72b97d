"""Fitting objective shared by the allocation, phase and joint optimizers.

All functions take stacked effective channels ``H`` of shape (N_c, K, K) and a
0/1 assignment ``Z`` of shape (K, N_c).
"""

import numpy as np

from .errors import DegenerateChannelError


def as_matrix(Z) -> np.ndarray:
    return np.asarray(getattr(Z, "Z", Z))


def fitting_cost(H, alpha, Z) -> float:
    """Sum over subcarriers of ||alpha T_i H_i T_i - T_i||_F^2."""
    H = np.asarray(H)
    z = as_matrix(Z).T.astype(float)  # (N_c, K)
    mask = z[:, :, None] * z[:, None, :]
    resid = alpha * H * mask
    idx = np.arange(H.shape[1])
    resid[:, idx, idx] -= z
    return float(np.sum(np.abs(resid) ** 2))


def alpha_terms(H, Z=None):
    """Numerator and denominator of the least-squares scaling factor."""
    H = np.asarray(H)
    if Z is None:
        num = np.sum(np.real(np.trace(H, axis1=1, axis2=2)))
        den = np.sum(np.abs(H) ** 2)
    else:
        z = as_matrix(Z).T.astype(float)
        mask = z[:, :, None] * z[:, None, :]
        num = np.sum(np.real(np.einsum("ikk->ik", H)) * z)
        den = np.sum(np.abs(H) ** 2 * mask)
    return float(num), float(den)


def best_alpha(H, Z=None) -> float:
    num, den = alpha_terms(H, Z)
    if den <= 0.0:
        raise DegenerateChannelError("effective channel is zero on every active entry")
    return num / den
