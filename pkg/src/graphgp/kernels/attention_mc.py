"""Monte-Carlo estimate of the GAT node kernel for attention maps without a closed form."""

from dataclasses import dataclass

import numpy as np

from .._parallel import run_chunks
from ..exceptions import DegenerateDegreeError, InvalidParameterError
from .params import HyperParams, as_array, check_square, symmetrize

ACTIVATIONS = {
    "identity": lambda x: x,
    "relu": lambda x: np.maximum(x, 0.0),
    "leaky_relu": lambda x: np.where(x > 0, x, 0.2 * x),
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class MonteCarloKernel:
    estimate: np.ndarray
    stderr: np.ndarray
    samples: int


def masked_softmax(scores, mask):
    """Row softmax restricted to ``mask``; entries outside the mask are 0."""
    z = np.where(mask, scores, -np.inf)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / np.sum(e, axis=-1, keepdims=True)


def attention_operator(logits, adjacency, nonlinearity="identity", row_softmax=False):
    """``S = softmax_N(sigma(E))`` or ``A * sigma(E)`` for a batch of logits ``(..., n, n)``."""
    act = ACTIVATIONS[nonlinearity]
    mask = adjacency > 0
    s = act(logits)
    if row_softmax:
        return masked_softmax(s, mask)
    return s * adjacency


def gat_step_mc(k, adjacency, hp=None, attention_nonlinearity="identity", row_softmax=False,
                samples=100_000, seed=0, chunk=8192, workers=1):
    """Estimate the GAT pre-activation kernel by sampling attention logits.

    Logits on edge ``(a, i)`` are ``alpha_a + beta_i`` with independent
    ``alpha, beta ~ N(0, sigma_w^2 sigma_v^2 K)``, which has exactly the edge
    covariance ``sigma_w^2 sigma_v^2 (K_ab + K_ij)``. Each draw contributes
    ``sigma_H^2 sigma_w^2 S K S^T``. Returns the mean and its standard error.
    """
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    if attention_nonlinearity not in ACTIVATIONS:
        raise InvalidParameterError(f"unknown attention nonlinearity {attention_nonlinearity!r}")
    hp = hp or HyperParams()
    k = check_square(k)
    a = as_array(adjacency)
    empty = np.flatnonzero(~np.any(a > 0, axis=1))
    if empty.size:
        raise DegenerateDegreeError(f"node {int(empty[0])} has an empty neighbourhood")
    n = k.shape[0]
    lam, u = np.linalg.eigh(symmetrize(k))
    root = u * np.sqrt(np.clip(lam, 0.0, None) * hp.sigma_w2 * hp.sigma_v2)
    scale = hp.sigma_H2 * hp.sigma_w2

    def chunk_moments(rng, size):
        g = rng.standard_normal((2, size, n)) @ root.T
        logits = g[0][:, :, None] + g[1][:, None, :]
        s = attention_operator(logits, a, attention_nonlinearity, row_softmax)
        draws = scale * (s @ k @ np.swapaxes(s, -1, -2))
        return draws.sum(axis=0), (draws * draws).sum(axis=0)

    parts = run_chunks(chunk_moments, samples, chunk, seed, workers)
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / samples
    if samples > 1:
        var = np.clip(total_sq / samples - mean * mean, 0.0, None) * samples / (samples - 1)
        se = np.sqrt(var / samples)
    else:
        se = np.full_like(mean, np.inf)
    return MonteCarloKernel(symmetrize(mean), symmetrize(se), int(samples))


def attention_second_moment(k, adjacency, hp=None, attention_nonlinearity="identity",
                            row_softmax=False, samples=100_000, seed=0, chunk=8192):
    """MC estimate of ``C_{ai,bj} = E[S_ai S_bj]`` as an ``(n, n, n, n)`` array."""
    hp = hp or HyperParams()
    k = check_square(k)
    a = as_array(adjacency)
    n = k.shape[0]
    lam, u = np.linalg.eigh(symmetrize(k))
    root = u * np.sqrt(np.clip(lam, 0.0, None) * hp.sigma_w2 * hp.sigma_v2)

    def chunk_c(rng, size):
        g = rng.standard_normal((2, size, n)) @ root.T
        s = attention_operator(g[0][:, :, None] + g[1][:, None, :], a,
                               attention_nonlinearity, row_softmax)
        return np.einsum("sai,sbj->aibj", s, s)

    return sum(run_chunks(chunk_c, samples, chunk, seed)) / samples
