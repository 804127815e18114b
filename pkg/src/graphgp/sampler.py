"""Finite-width, finite-head forward passes at random initialisation.

Each sample is an independent initialisation of one layer; one output
coordinate is recorded for every node. The fast paths never materialise the
full weight tensors. They draw the low-dimensional statistics the output
actually depends on (Gram matrices of Gaussian weight columns, via the Bartlett
decomposition of the Wishart law, and chi-square norms), which is exact in
distribution. Dense paths that draw every weight are kept for validation.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from ._parallel import run_chunks
from .exceptions import DegenerateDegreeError, InvalidParameterError
from .graph import Graph, normalized_laplacian_spectrum
from .kernels.attention_mc import ACTIVATIONS, masked_softmax
from .kernels.params import HyperParams, as_array
from .kernels.positional import PositionalCovariance
from .kernels.steps import spectral_tokens


@dataclass(frozen=True)
class SamplerConfig:
    width: int = 64
    heads: int = 64
    samples: int = 2000
    seed: int = 0
    model: str = "gat"
    hp: HyperParams = field(default_factory=HyperParams)
    chunk: int = 64
    workers: int = 1

    def __post_init__(self):
        if self.width < 1 or self.heads < 1:
            raise InvalidParameterError("width and heads must be >= 1")
        if self.samples < 2:
            raise InvalidParameterError("samples must be >= 2")
        if self.chunk < 1:
            raise InvalidParameterError("chunk must be >= 1")


@dataclass(frozen=True)
class EmpiricalMoments:
    """Moments of the sampled node outputs (rows of ``draws`` are initialisations)."""

    draws: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    second_moment: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    histograms: list
    extra: dict = field(default_factory=dict)

    @property
    def samples(self):
        return self.draws.shape[0]

    @classmethod
    def from_draws(cls, draws, extra=None):
        draws = np.asarray(draws, dtype=float)
        cov = np.cov(draws, rowvar=False)
        cov = np.atleast_2d(cov)
        hists = []
        for col in draws.T:
            edges = np.histogram_bin_edges(col, bins="fd")
            counts, edges = np.histogram(col, bins=edges)
            hists.append((edges, counts))
        return cls(
            draws=draws,
            mean=draws.mean(axis=0),
            covariance=(cov + cov.T) / 2,
            second_moment=draws.T @ draws / draws.shape[0],
            skewness=stats.skew(draws, axis=0),
            excess_kurtosis=stats.kurtosis(draws, axis=0, fisher=True),
            histograms=hists,
            extra=dict(extra or {}),
        )


def _bartlett_factor(rng, shape, dof, scales):
    """Lower-triangular ``L`` with ``L L^T ~ Wishart(dof, diag(scales))``, batched over ``shape``."""
    p = len(scales)
    a = np.zeros(shape + (p, p))
    for i in range(p):
        a[..., i, i] = np.sqrt(rng.chisquare(dof - i, size=shape))
        if i:
            a[..., i, :i] = rng.standard_normal(shape + (i,))
    return a * np.sqrt(np.asarray(scales))[:, None]


def _gram_columns(rng, shape, dim, scales):
    """Factor ``C`` (``... x p x p``) with ``C C^T`` distributed as the Gram matrix of
    ``p`` independent ``N(0, scale_k I_dim)`` vectors."""
    p = len(scales)
    if dim >= p:
        return _bartlett_factor(rng, shape, dim, scales)
    cols = rng.standard_normal(shape + (p, dim)) * np.sqrt(np.asarray(scales))[:, None]
    return cols


def _attention(logits, adjacency, nonlinearity, softmax):
    s = ACTIVATIONS[nonlinearity](logits)
    if softmax:
        return masked_softmax(s, adjacency > 0)
    return s * adjacency


def _features(g):
    if g.features is None:
        raise InvalidParameterError("the sampler needs node features")
    return np.asarray(g.features)


def _check_softmax_degrees(adjacency):
    empty = np.flatnonzero(~np.any(adjacency > 0, axis=1))
    if empty.size:
        raise DegenerateDegreeError(f"node {int(empty[0])} has no neighbours to attend to")


def _run(chunk_fn, cfg):
    parts = run_chunks(chunk_fn, cfg.samples, cfg.chunk, cfg.seed, cfg.workers)
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p, axis=0) for p in zip(*parts))
    return np.concatenate(parts, axis=0)


# GAT

def sample_gat_layer(g, cfg, attention="identity", activation_sigma="identity", method="projected"):
    """Node outputs of one multi-head GAT layer with a shared output projection.

    ``attention`` is ``"identity"`` (``S = A * sigma(E)``) or ``"softmax"``
    (neighbourhood softmax of ``sigma(E)``). Logit vectors use variance
    ``sigma_v^2 / width`` and the head projection ``sigma_H^2 / (heads * width)``
    so the infinite limit matches the analytic kernel for any input width.
    """
    if attention not in ("identity", "softmax"):
        raise InvalidParameterError(f"attention must be identity or softmax, got {attention!r}")
    if activation_sigma not in ACTIVATIONS:
        raise InvalidParameterError(f"unknown score nonlinearity {activation_sigma!r}")
    x = _features(g)
    adj = np.asarray(g.adjacency)
    softmax = attention == "softmax"
    if softmax:
        _check_softmax_degrees(adj)
    hp, d, heads = cfg.hp, cfg.width, cfg.heads
    d_in = x.shape[1]

    def projected(rng, size):
        # per head the output depends on the weights only through r = W [v1 v2 w]
        scales = (hp.sigma_v2 / d, hp.sigma_v2 / d, hp.sigma_H2 / (heads * d))
        c = _gram_columns(rng, (size, heads), d, scales)
        z = rng.standard_normal((size, heads, d_in, c.shape[-1]))
        r = np.sqrt(hp.sigma_w2 / d_in) * z @ np.swapaxes(c, -1, -2)
        proj = np.einsum("nk,shkc->shnc", x, r)
        return _gat_outputs(proj[..., 0], proj[..., 1], proj[..., 2], adj, activation_sigma, softmax)

    def dense(rng, size):
        out = np.empty((size, g.n))
        for s in range(size):
            w = rng.standard_normal((heads, d_in, d)) * np.sqrt(hp.sigma_w2 / d_in)
            v = rng.standard_normal((heads, 2, d)) * np.sqrt(hp.sigma_v2 / d)
            wh = rng.standard_normal((heads, d)) * np.sqrt(hp.sigma_H2 / (heads * d))
            f = np.einsum("nk,hkd->hnd", x, w)
            a1 = np.einsum("hnd,hd->hn", f, v[:, 0])
            a2 = np.einsum("hnd,hd->hn", f, v[:, 1])
            val = np.einsum("hnd,hd->hn", f, wh)
            out[s] = _gat_outputs(a1[None], a2[None], val[None], adj, activation_sigma, softmax)[0]
        return out

    fn = {"projected": projected, "dense": dense}.get(method)
    if fn is None:
        raise InvalidParameterError(f"unknown sampling method {method!r}")
    draws = _run(fn, cfg)
    return EmpiricalMoments.from_draws(draws, {"model": "gat", "width": d, "heads": heads})


def _gat_outputs(a1, a2, val, adj, nonlinearity, softmax):
    logits = a1[..., :, None] + a2[..., None, :]
    s = _attention(logits, adj, nonlinearity, softmax)
    return np.einsum("shai,shi->sa", s, val)


def gat_head_contributions(g, cfg, attention="identity", activation_sigma="identity"):
    """Per-head outputs ``(samples, heads, n)`` before summation over heads."""
    x = _features(g)
    adj = np.asarray(g.adjacency)
    hp, d, heads = cfg.hp, cfg.width, cfg.heads
    d_in = x.shape[1]
    softmax = attention == "softmax"

    def fn(rng, size):
        scales = (hp.sigma_v2 / d, hp.sigma_v2 / d, hp.sigma_H2 / (heads * d))
        c = _gram_columns(rng, (size, heads), d, scales)
        z = rng.standard_normal((size, heads, d_in, c.shape[-1]))
        r = np.sqrt(hp.sigma_w2 / d_in) * z @ np.swapaxes(c, -1, -2)
        proj = np.einsum("nk,shkc->shnc", x, r)
        logits = proj[..., 0][..., :, None] + proj[..., 1][..., None, :]
        s = _attention(logits, adj, activation_sigma, softmax)
        return np.einsum("shai,shi->sha", s, proj[..., 2])

    return _run(fn, cfg)


# Graphormer

def _sqrt_psd(m):
    lam, u = np.linalg.eigh((m + m.T) / 2)
    return (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.T


def _relation_ids(relation, n):
    if relation is None:
        return None
    rel = np.asarray(getattr(relation, "relation", relation))
    if rel.shape != (n, n):
        raise InvalidParameterError(f"relation shape {rel.shape} does not match {n} nodes")
    _, ids = np.unique(rel, return_inverse=True)
    return ids.reshape(n, n)


def sample_graphormer_layer(g, cfg, pe=None, relation=None, attention="identity", method="projected"):
    """Node outputs of one Graphormer layer with positional augmentation and structural bias.

    Node inputs are ``[sqrt(alpha) x_i, sqrt(1 - alpha) P_i]`` with ``P`` the
    symmetric square root of the positional covariance, so their scaled Gram
    is ``alpha K + (1 - alpha) R``. Attention is over all node pairs, either raw
    logits (``"identity"``) or row softmax.
    """
    if attention not in ("identity", "softmax"):
        raise InvalidParameterError(f"attention must be identity or softmax, got {attention!r}")
    x = _features(g)
    n = g.n
    hp, d, heads = cfg.hp, cfg.width, cfg.heads
    r = np.zeros((n, n)) if pe is None else as_array(getattr(pe, "R", pe))
    ids = _relation_ids(relation, n)
    if hp.sigma_b2 > 0 and ids is None:
        raise InvalidParameterError("sigma_b2 > 0 needs a structural relation")
    k0 = x @ x.T / x.shape[1]
    kt = hp.alpha * k0 + (1 - hp.alpha) * r
    # f_tilde = sqrt(n) * F with F F^T = K_tilde; only the Gram matters for Gaussian weights
    f = _sqrt_psd(kt)
    n_buckets = 0 if ids is None else int(ids.max()) + 1
    softmax = attention == "softmax"
    sqk = np.sqrt(hp.sigma_Q2 * hp.sigma_K2)

    def bias(rng, size):
        if hp.sigma_b2 == 0 or ids is None:
            return 0.0
        b = rng.standard_normal((size, heads, n_buckets)) * np.sqrt(hp.sigma_b2)
        return b[..., ids]

    def finish(logits, val):
        s = masked_softmax(logits, np.ones((n, n), dtype=bool)) if softmax else logits
        return np.einsum("shai,shi->sa", s, val)

    def projected(rng, size):
        # Q K^T / sqrt(d) = sigma_Q sigma_K F (Z_Q Z_K^T) F^T / sqrt(d), with Z_Q Z_K^T the
        # off-diagonal block of a Wishart(d, I_2n) matrix
        c = _gram_columns(rng, (size, heads), d, np.ones(2 * n))
        zz = c[..., :n, :] @ np.swapaxes(c[..., n:, :], -1, -2)
        logits = sqk * (f @ zz @ f.T) / np.sqrt(d) + bias(rng, size)
        norms = rng.chisquare(d, size=(size, heads))
        scale = np.sqrt(hp.sigma_w2 * hp.sigma_H2 * norms / (heads * d))
        val = np.einsum("ij,shj->shi", f, rng.standard_normal((size, heads, n))) * scale[..., None]
        return finish(logits, val)

    def dense(rng, size):
        big = np.sqrt(n) * f
        out = np.empty((size, n))
        for s in range(size):
            wq = rng.standard_normal((heads, n, d)) * np.sqrt(hp.sigma_Q2 / n)
            wk = rng.standard_normal((heads, n, d)) * np.sqrt(hp.sigma_K2 / n)
            wv = rng.standard_normal((heads, n, d)) * np.sqrt(hp.sigma_w2 / n)
            wh = rng.standard_normal((heads, d)) * np.sqrt(hp.sigma_H2 / (heads * d))
            q = np.einsum("ij,hjd->hid", big, wq)
            k = np.einsum("ij,hjd->hid", big, wk)
            logits = q @ np.swapaxes(k, -1, -2) / np.sqrt(d) + bias(rng, 1)[0]
            val = np.einsum("ij,hjd,hd->hi", big, wv, wh)
            out[s] = finish(logits[None], val[None])[0]
        return out

    fn = {"projected": projected, "dense": dense}.get(method)
    if fn is None:
        raise InvalidParameterError(f"unknown sampling method {method!r}")
    draws = _run(fn, cfg)
    return EmpiricalMoments.from_draws(draws, {"model": "graphormer", "width": d, "heads": heads,
                                               "augmented_kernel": kt})


# Specformer

def sample_specformer_stack(g, cfg, token_layers=1, decoder="identity", embed_dim=8,
                            epsilon=1.0, token_heads=None, method="auto"):
    """Node outputs of a Specformer layer whose filters come from a sampled token stack.

    Every graph-convolution head owns a ``token_layers``-deep stack of
    ``token_heads``-head linear attention over the spectral tokens, decoded to a
    filter ``lambda_bar = decoder(H_bar w_lambda)``. The filter draws of the first
    head are kept in ``extra["filters"]``.
    """
    if decoder not in ("identity", "relu"):
        raise InvalidParameterError(f"decoder must be identity or relu, got {decoder!r}")
    if token_layers < 1:
        raise InvalidParameterError("token_layers must be >= 1")
    x = _features(g)
    n = g.n
    hp, d, heads = cfg.hp, cfg.width, cfg.heads
    th = token_heads or heads
    spec = normalized_laplacian_spectrum(g)
    u = spec.eigenvectors
    h0 = spectral_tokens(spec.eigenvalues, embed_dim, epsilon)
    d0 = h0.shape[1]
    f0 = _sqrt_psd(h0 @ h0.T / d0)
    fk = _sqrt_psd(x @ x.T / x.shape[1])
    act = ACTIVATIONS[decoder]
    if method == "auto":
        method = "projected" if token_layers == 1 else "dense"
    if method == "projected" and token_layers != 1:
        raise InvalidParameterError("the projected Specformer sampler supports one token layer")
    sqk = np.sqrt(hp.sigma_Q2 * hp.sigma_K2)

    def node_output(rng, lam_bar, size):
        norms = rng.chisquare(d, size=(size, heads))
        scale = np.sqrt(hp.sigma_w2 * hp.sigma_H2 * norms / (heads * d))
        val = np.einsum("ij,shj->shi", fk, rng.standard_normal((size, heads, n))) * scale[..., None]
        spectral = np.einsum("ij,shj->shi", u.T, val) * lam_bar
        return np.einsum("ij,shj->si", u, spectral)

    def projected(rng, size):
        shape = (size, heads, th)
        c = _gram_columns(rng, shape, d, np.ones(2 * n))
        zz = c[..., :n, :] @ np.swapaxes(c[..., n:, :], -1, -2)
        e = sqk * (f0 @ zz @ f0.T) / np.sqrt(d)
        w_lam = hp.sigma_lambda2 / d * rng.chisquare(d, size=(size, heads))
        u_norm = hp.sigma_O2 * w_lam[..., None] / (th * d) * rng.chisquare(d, size=shape)
        vec = np.einsum("ij,sthj->sthi", f0, rng.standard_normal(shape + (n,)))
        vec = vec * np.sqrt(hp.sigma_V2 * u_norm)[..., None]
        pre = np.einsum("shkij,shkj->shi", e, vec)
        lam_bar = act(pre)
        return node_output(rng, lam_bar, size), lam_bar[:, 0]

    def dense(rng, size):
        outs, filt = np.empty((size, n)), np.empty((size, n))
        for s in range(size):
            lam_bar = np.empty((heads, n))
            for h in range(heads):
                tok = h0
                for _ in range(token_layers):
                    din = tok.shape[1]
                    wq = rng.standard_normal((th, din, d)) * np.sqrt(hp.sigma_Q2 / din)
                    wk = rng.standard_normal((th, din, d)) * np.sqrt(hp.sigma_K2 / din)
                    wv = rng.standard_normal((th, din, d)) * np.sqrt(hp.sigma_V2 / din)
                    wo = rng.standard_normal((th, d, d)) * np.sqrt(hp.sigma_O2 / (th * d))
                    q, k, v = (np.einsum("nk,tkd->tnd", tok, w) for w in (wq, wk, wv))
                    att = q @ np.swapaxes(k, -1, -2) / np.sqrt(d)
                    tok = np.einsum("tij,tjd,tde->ie", att, v, wo)
                w_lam = rng.standard_normal(d) * np.sqrt(hp.sigma_lambda2 / d)
                lam_bar[h] = act(tok @ w_lam)
            outs[s] = node_output(rng, lam_bar[None], 1)[0]
            filt[s] = lam_bar[0]
        return outs, filt

    fn = {"projected": projected, "dense": dense}.get(method)
    if fn is None:
        raise InvalidParameterError(f"unknown sampling method {method!r}")
    draws, filters = _run(fn, cfg)
    filt = EmpiricalMoments.from_draws(filters)
    return EmpiricalMoments.from_draws(draws, {"model": "specformer", "width": d, "heads": heads,
                                               "filters": filt})


# reports and export

@dataclass(frozen=True)
class GaussianityReport:
    frobenius_error: float
    max_abs_skew: float
    max_abs_excess_kurtosis: float
    ks_statistics: np.ndarray
    ks_critical_1pct: float
    samples: int

    @property
    def ks_pass_fraction(self):
        return float(np.mean(self.ks_statistics < self.ks_critical_1pct))

    def as_dict(self):
        return {
            "samples": self.samples,
            "frobenius_error": self.frobenius_error,
            "max_abs_skew": self.max_abs_skew,
            "max_abs_excess_kurtosis": self.max_abs_excess_kurtosis,
            "ks_max": float(np.max(self.ks_statistics)),
            "ks_critical_1pct": self.ks_critical_1pct,
            "ks_pass_fraction": self.ks_pass_fraction,
        }

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                       for k, v in self.as_dict().items())


def gaussianity_report(m, analytic):
    """Compare sampled outputs with a target centred Gaussian of covariance ``analytic``."""
    sigma = as_array(analytic)
    if sigma.shape != m.covariance.shape:
        raise InvalidParameterError(f"analytic kernel {sigma.shape} vs empirical {m.covariance.shape}")
    err = float(np.linalg.norm(m.covariance - sigma) / np.linalg.norm(sigma))
    ks = np.array([stats.kstest(m.draws[:, a], "norm", args=(0.0, np.sqrt(max(sigma[a, a], 1e-300)))).statistic
                   for a in range(sigma.shape[0])])
    crit = float(stats.kstwo.ppf(0.99, m.samples))
    return GaussianityReport(err, float(np.max(np.abs(m.skewness))),
                             float(np.max(np.abs(m.excess_kurtosis))), ks, crit, m.samples)


def write_histograms(path, m):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "bin_lo", "bin_hi", "count"])
        for node, (edges, counts) in enumerate(m.histograms):
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([node, repr(float(lo)), repr(float(hi)), int(c)])


def write_moments(path, m):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "mean", "var", "skew", "kurt"])
        for a in range(m.mean.size):
            w.writerow([a, repr(float(m.mean[a])), repr(float(m.covariance[a, a])),
                        repr(float(m.skewness[a])), repr(float(m.excess_kurtosis[a]))])


def write_report(path, report):
    with open(path, "w", newline="\n") as fh:
        fh.write(report.to_text())
