"""Graph containers, SBM generators, and spectral / structural preprocessing."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .exceptions import DegenerateDegreeError, InvalidParameterError, NumericalError

_SYM_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected graph with dense adjacency, optional node features and labels.

    Arrays are copied and made read-only on construction so a ``Graph`` can be
    shared freely between threads.
    """

    adjacency: np.ndarray
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        adj = _frozen(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InvalidParameterError(f"adjacency must be square, got shape {adj.shape}")
        if np.any(adj < 0):
            raise InvalidParameterError("adjacency entries must be nonnegative")
        if np.max(np.abs(adj - adj.T), initial=0.0) > _SYM_TOL:
            raise InvalidParameterError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", adj)
        n = adj.shape[0]
        if self.features is not None:
            x = _frozen(self.features)
            if x.ndim == 1:
                x = _frozen(x[:, None])
            if x.shape[0] != n:
                raise InvalidParameterError(
                    f"features have {x.shape[0]} rows but the graph has {n} nodes")
            object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.array(self.labels, dtype=int, copy=True)
            if y.shape != (n,):
                raise InvalidParameterError(f"labels must have shape ({n},), got {y.shape}")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def directed(self):
        return False

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    def neighborhoods(self):
        """List of neighbour index arrays (any positive entry is an edge)."""
        return [np.flatnonzero(row > 0) for row in self.adjacency]

    def with_self_loops(self):
        adj = np.array(self.adjacency)
        np.fill_diagonal(adj, np.maximum(np.diag(adj), 1.0))
        return Graph(adj, self.features, self.labels)

    def feature_kernel(self):
        """Input covariance ``X X^T / d_in``."""
        if self.features is None:
            raise InvalidParameterError("graph has no features attached")
        x = self.features
        return x @ x.T / x.shape[1]


@dataclass(frozen=True)
class SbmParams:
    """Two-community SBM: ``n`` nodes, edge probabilities ``p`` (within) and ``q`` (across).

    ``x0``/``y0`` are the intra/inter entries of the block-constant input kernel.
    """

    n: int
    p: float
    q: float
    x0: float = 1.0
    y0: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise InvalidParameterError(f"n must be a positive even integer, got {self.n}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v}")
        if not self.x0 >= abs(self.y0):
            raise InvalidParameterError(
                f"need x0 >= |y0| for a PSD input kernel, got x0={self.x0}, y0={self.y0}")

    @property
    def half(self):
        return self.n // 2


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, values=None):
        """``U diag(values) U^T``; defaults to the stored eigenvalues."""
        lam = self.eigenvalues if values is None else np.asarray(values, dtype=float)
        u = self.eigenvectors
        return (u * lam) @ u.T


@dataclass(frozen=True)
class StructuralRelation:
    relation: np.ndarray
    max_bucket: int

    @property
    def sentinel(self):
        return self.max_bucket + 1


def community_labels(n):
    return np.repeat([0, 1], n // 2)


def block_matrix(n, within, across):
    """Two-block constant matrix with ``within`` on diagonal blocks (including the diagonal)."""
    lab = community_labels(n)
    same = lab[:, None] == lab[None, :]
    return np.where(same, float(within), float(across))


def population_sbm(params):
    """Expected adjacency of the 2-block SBM; diagonal blocks (diagonal included) equal ``p``."""
    if not isinstance(params, SbmParams):
        params = SbmParams(**params)
    return Graph(block_matrix(params.n, params.p, params.q),
                 labels=community_labels(params.n))


def sbm_input_kernel(params):
    return block_matrix(params.n, params.x0, params.y0)


def sample_csbm(params, feature_dim, mean_separation, seed):
    """Draw a contextual SBM realisation.

    Edges are independent Bernoulli draws on the upper triangle (zero diagonal).
    Node features are ``±mean_separation * mu + N(0, I)`` with ``mu`` a random unit
    vector and the sign given by the community. ``mean_separation=0`` gives
    features carrying no label information.
    """
    if feature_dim < 1:
        raise InvalidParameterError("feature_dim must be >= 1")
    if not isinstance(params, SbmParams):
        params = SbmParams(**params)
    rng = np.random.default_rng(seed)
    n = params.n
    labels = community_labels(n)
    prob = block_matrix(n, params.p, params.q)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    adj = (upper | upper.T).astype(float)

    mu = rng.standard_normal(feature_dim)
    mu /= np.linalg.norm(mu)
    signs = np.where(labels == 0, 1.0, -1.0)
    features = signs[:, None] * mean_separation * mu[None, :]
    features = features + rng.standard_normal((n, feature_dim))
    return Graph(adj, features, labels)


def _check_degrees(adj):
    deg = adj.sum(axis=1)
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        raise DegenerateDegreeError(
            f"{bad.size} isolated node(s) with zero degree, first is node {int(bad[0])}")
    return deg


def normalized_adjacency(g, self_loops=False):
    """``D^{-1/2} A D^{-1/2}``; ``self_loops=True`` adds the identity to ``A`` first."""
    adj = np.array(g.adjacency if isinstance(g, Graph) else g, dtype=float)
    if self_loops:
        adj = adj + np.eye(adj.shape[0])
    deg = _check_degrees(adj)
    d = 1.0 / np.sqrt(deg)
    s = d[:, None] * adj * d[None, :]
    return (s + s.T) / 2


def row_normalized_adjacency(adj):
    """``D^{-1} A`` (random-walk normalisation)."""
    adj = np.asarray(adj, dtype=float)
    deg = _check_degrees(adj)
    return adj / deg[:, None]


def normalized_laplacian(g, self_loops=False):
    s = normalized_adjacency(g, self_loops=self_loops)
    return np.eye(s.shape[0]) - s


def symmetric_eigh(m):
    """Ascending eigendecomposition of a symmetric matrix, with a condition report on failure."""
    m = np.asarray(m, dtype=float)
    try:
        lam, u = np.linalg.eigh((m + m.T) / 2)
    except np.linalg.LinAlgError as exc:
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(m)
        raise NumericalError(f"eigensolver did not converge (condition number {cond:.3e})") from exc
    return SpectralDecomposition(lam, u)


def normalized_laplacian_spectrum(g, self_loops=False):
    return symmetric_eigh(normalized_laplacian(g, self_loops=self_loops))


def shortest_path_buckets(g, max_bucket):
    """Hop distances truncated at ``max_bucket``; unreachable pairs get ``max_bucket + 1``."""
    if max_bucket < 1:
        raise InvalidParameterError("max_bucket must be >= 1")
    adj = g.adjacency if isinstance(g, Graph) else np.asarray(g)
    dist = shortest_path((adj > 0).astype(float), method="D", unweighted=True, directed=False)
    rel = np.full(dist.shape, max_bucket + 1, dtype=np.int64)
    finite = np.isfinite(dist)
    rel[finite] = np.minimum(dist[finite], max_bucket).astype(np.int64)
    np.fill_diagonal(rel, 0)
    return StructuralRelation(rel, int(max_bucket))


def constant_relation(n):
    """Every pair in a single bucket."""
    return StructuralRelation(np.zeros((n, n), dtype=np.int64), 1)
