"""Elementwise kernel maps: the ReLU arc-cosine map and the per-node LayerNorm map."""

import numpy as np

from ..exceptions import DegenerateNodeError, InvalidKernelError
from .params import as_array, check_square, symmetrize

_DIAG_TOL = 1e-14


def arccos_j1(cos_theta):
    """``sin(t) + (pi - t) cos(t)`` for ``t = arccos(cos_theta)``, argument clamped to [-1, 1]."""
    c = np.clip(cos_theta, -1.0, 1.0)
    theta = np.arccos(c)
    return np.sqrt(1.0 - c * c) + (np.pi - theta) * c


def relu_expectation(var_a, var_b, cov):
    """``E[relu(u) relu(v)]`` for centred jointly Gaussian ``(u, v)``."""
    norm = np.sqrt(var_a * var_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(norm > 0, cov / np.where(norm > 0, norm, 1.0), 0.0)
    return norm * arccos_j1(c) / (2 * np.pi)


def relu_kernel_map(sigma):
    """Post-activation kernel of a ReLU layer fed by a centred GP with covariance ``sigma``."""
    s = check_square(sigma)
    d = np.diag(s)
    if np.any(d < 0):
        raise InvalidKernelError("pre-activation kernel has a negative diagonal entry")
    bad = np.flatnonzero(d <= _DIAG_TOL)
    if bad.size:
        raise DegenerateNodeError(
            f"node {int(bad[0])} has zero pre-activation variance", node=int(bad[0]))
    out = relu_expectation(d[:, None], d[None, :], s)
    return symmetrize(out)


def layernorm_kernel_map(k):
    """``K_ab / sqrt(K_aa K_bb)``: unit diagonal, scale invariant."""
    k = check_square(k)
    d = np.diag(k)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise DegenerateNodeError(
            f"node {int(bad[0])} has non-positive kernel diagonal {d[bad[0]]!r}", node=int(bad[0]))
    inv = 1.0 / np.sqrt(d)
    out = symmetrize(k * inv[:, None] * inv[None, :])
    np.fill_diagonal(out, 1.0)
    return out
