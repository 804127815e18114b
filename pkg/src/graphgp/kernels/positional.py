from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import InvalidParameterError
from ..graph import normalized_laplacian_spectrum
from .params import HyperParams

PE_KINDS = ("laplacian", "spectral", "centrality")

_ALIASES = {
    "laplacian-eigvec": "laplacian",
    "laplacian_eigvec": "laplacian",
    "lap": "laplacian",
    "spectral-reconstruction": "spectral",
    "spectral_reconstruction": "spectral",
    "ce": "centrality",
}


@dataclass(frozen=True)
class PositionalCovariance:
    """Covariance ``R_ab = <P_a, P_b>`` of a positional encoding."""

    R: np.ndarray
    kind: str
    rank_k: Optional[int] = None

    def __post_init__(self):
        r = np.array(self.R, dtype=float, copy=True)
        r.setflags(write=False)
        object.__setattr__(self, "R", r)

    def factor(self):
        """An ``n x n`` matrix ``P`` with ``P P^T = R`` (symmetric square root)."""
        lam, u = np.linalg.eigh(self.R)
        return (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.T


def canonical_pe_kind(kind):
    kind = _ALIASES.get(kind, kind)
    if kind not in PE_KINDS:
        raise InvalidParameterError(f"unknown positional encoding {kind!r}; expected one of {PE_KINDS}")
    return kind


def build_positional_covariance(g, kind, rank_k=None, hp=None, self_loops=False):
    """Positional covariance of one of three encodings.

    ``laplacian``: Gram of the ``rank_k`` lowest normalized-Laplacian eigenvectors.
    ``spectral``: rank-``rank_k`` reconstruction ``sum_i lam_i u_i u_i^T``.
    ``centrality``: ``sigma_CE^2`` for equal-degree pairs, 0 otherwise.
    """
    kind = canonical_pe_kind(kind)
    hp = hp or HyperParams()
    n = g.n
    if kind == "centrality":
        deg = np.rint(g.degrees).astype(np.int64)
        r = hp.sigma_CE2 * (deg[:, None] == deg[None, :]).astype(float)
        return PositionalCovariance(r, kind)
    if rank_k is None:
        rank_k = n
    if not 1 <= rank_k <= n:
        raise InvalidParameterError(f"rank_k must lie in [1, {n}], got {rank_k}")
    spec = normalized_laplacian_spectrum(g, self_loops=self_loops)
    u = spec.eigenvectors[:, :rank_k]
    if kind == "laplacian":
        r = u @ u.T
    else:
        r = (u * spec.eigenvalues[:rank_k]) @ u.T
    return PositionalCovariance((r + r.T) / 2, kind, int(rank_k))
