"""One-layer kernel recursions for GCN, GAT, Graphormer, Specformer and GTN.

Every function maps the previous-layer kernel (a dense ``n x n`` array or a
``KernelMatrix``) to the next pre-activation kernel and returns a plain,
exactly symmetric ``ndarray``.
"""

import numpy as np

from ..exceptions import DegenerateDegreeError, InvalidKernelError, InvalidParameterError
from ..graph import StructuralRelation, row_normalized_adjacency
from .maps import arccos_j1, relu_kernel_map
from .params import HyperParams, as_array, check_square, symmetrize

_DEFAULT_HP = HyperParams()


def _hp(hp):
    return _DEFAULT_HP if hp is None else hp


def _same_shape(k, *others):
    for o in others:
        if o.shape != k.shape:
            raise InvalidParameterError(f"shape mismatch: {k.shape} vs {o.shape}")


def gcn_step(k, s, hp=None):
    """``sigma_w^2 S K S^T``."""
    k = check_square(k)
    s = as_array(s)
    _same_shape(k, s)
    return symmetrize(_hp(hp).sigma_w2 * (s @ k @ s.T))


def gat_step_linear(k, adjacency, hp=None):
    """GAT kernel with identity attention and identity score nonlinearity.

    ``c * (K * (A K A^T) + A (K * K) A^T)`` with ``c = sigma_H^2 sigma_w^4 sigma_v^2``.
    """
    hp = _hp(hp)
    k = check_square(k)
    a = as_array(adjacency)
    _same_shape(k, a)
    c = hp.sigma_H2 * hp.sigma_w2 ** 2 * hp.sigma_v2
    out = k * (a @ k @ a.T) + a @ (k * k) @ a.T
    return symmetrize(c * out)


def _edge_list(a):
    src, dst = np.nonzero(a)
    return src, dst, a[src, dst]


def gat_step_relu_attention(k, adjacency, hp=None, chunk=512):
    """GAT kernel with identity attention normalisation and ReLU score nonlinearity.

    Sums the arc-cosine expectation of the edge-logit kernel over every pair of
    edges ``(a, i), (b, j)``; edge weights ``A_ai A_bj`` multiply each term so the
    weighted (population) adjacency reduces to the binary case on 0/1 inputs.
    Cost is quadratic in the number of edges.
    """
    hp = _hp(hp)
    k = check_square(k)
    a = as_array(adjacency)
    _same_shape(k, a)
    n = k.shape[0]
    src, dst, w = _edge_list(a)
    if src.size == 0:
        return np.zeros_like(k)
    diag = np.diag(k)
    edge_var = diag[src] + diag[dst]
    bad = np.flatnonzero(edge_var <= 0)
    if bad.size:
        e = bad[0]
        raise InvalidKernelError(
            f"degenerate edge ({int(src[e])}, {int(dst[e])}): K_aa + K_ii = {edge_var[e]!r}")
    m = src.size
    # incidence: P[e, a] = w_e when edge e leaves node a
    inc = np.zeros((m, n))
    inc[np.arange(m), src] = w
    out = np.zeros((n, n))
    root = np.sqrt(edge_var)
    for lo in range(0, m, chunk):
        sl = slice(lo, lo + chunk)
        cov = k[src[sl]][:, src] + k[dst[sl]][:, dst]
        norm = root[sl, None] * root[None, :]
        t = k[dst[sl]][:, dst] * norm * arccos_j1(cov / norm)
        out += inc[sl].T @ t @ inc
    c = hp.sigma_H2 * hp.sigma_w2 ** 2 * hp.sigma_v2 / (2 * np.pi)
    return symmetrize(c * out)


def graphormer_augment(k, r, hp=None):
    """Mix the feature kernel with the positional covariance: ``alpha K + (1 - alpha) R``."""
    alpha = _hp(hp).alpha
    k = check_square(k)
    r = as_array(getattr(r, "R", r))
    _same_shape(k, r)
    return alpha * k + (1.0 - alpha) * r


def _relation_array(rel, n):
    if rel is None:
        return None
    r = np.asarray(rel.relation if isinstance(rel, StructuralRelation) else rel)
    if r.shape != (n, n):
        raise InvalidParameterError(f"relation shape {r.shape} does not match kernel size {n}")
    return r


def graphormer_bias_term(ktilde, relation):
    """``B_ab = sum_{i,j} Ktilde_ij 1[rho(a,i) = rho(b,j)]`` by per-bucket accumulation.

    For each bucket ``r`` with indicator ``M_r = 1[rho = r]`` the contribution is
    ``M_r Ktilde M_r^T``.
    """
    b = np.zeros_like(ktilde)
    for bucket in np.unique(relation):
        m = (relation == bucket).astype(float)
        b += m @ ktilde @ m.T
    return b


def graphormer_step_linear(ktilde, rel=None, hp=None):
    """Graphormer kernel under identity attention.

    ``sigma_H^2 sigma_w^2 [sigma_Q^2 sigma_K^2 Ktilde_ab sum_ij Ktilde_ij^2 + sigma_b^2 B_ab]``.
    The bias term is skipped when ``sigma_b2 == 0``.
    """
    hp = _hp(hp)
    kt = check_square(ktilde)
    z = hp.sigma_Q2 * hp.sigma_K2 * float(np.sum(kt * kt))
    out = z * kt
    if hp.sigma_b2 > 0:
        r = _relation_array(rel, kt.shape[0])
        if r is None:
            raise InvalidParameterError("sigma_b2 > 0 needs a structural relation")
        out = out + hp.sigma_b2 * graphormer_bias_term(kt, r)
    return symmetrize(hp.sigma_H2 * hp.sigma_w2 * out)


def sinusoidal_encoding(eigenvalues, embed_dim, epsilon=1.0):
    """``rho(lam)`` with ``sin`` at even and ``cos`` at odd positions."""
    if embed_dim < 2 or embed_dim % 2:
        raise InvalidParameterError(f"embed_dim must be even and >= 2, got {embed_dim}")
    lam = np.asarray(eigenvalues, dtype=float)
    t = np.arange(embed_dim // 2)
    freq = 10000.0 ** (-2.0 * t / embed_dim)
    arg = epsilon * lam[:, None] * freq[None, :]
    enc = np.empty((lam.size, embed_dim))
    enc[:, 0::2] = np.sin(arg)
    enc[:, 1::2] = np.cos(arg)
    return enc


def spectral_tokens(eigenvalues, embed_dim, epsilon=1.0):
    """Rows ``(lam_i || rho(lam_i))``."""
    lam = np.asarray(eigenvalues, dtype=float)
    return np.column_stack([lam, sinusoidal_encoding(lam, embed_dim, epsilon)])


def specformer_token_kernel_init(spec, embed_dim, epsilon=1.0):
    """Gram matrix of the initial spectral tokens divided by their width ``embed_dim + 1``."""
    lam = getattr(spec, "eigenvalues", spec)
    h0 = spectral_tokens(lam, embed_dim, epsilon)
    return symmetrize(h0 @ h0.T / h0.shape[1])


def specformer_token_step_linear(kh, hp=None, convention="literal"):
    """One spectral-token attention layer with identity attention.

    ``convention="literal"`` evaluates ``c * sum_kl K_kl K_ik K_jl = c * (K K K)_ij``.
    ``convention="pairwise"`` pairs the query indices of both logits instead,
    ``c * K_ij * sum_kl K_kl^2``, which is what a finite query/key network samples.
    ``c = sigma_O^2 sigma_V^2 sigma_Q^2 sigma_K^2``.
    """
    hp = _hp(hp)
    k = check_square(kh)
    c = hp.sigma_O2 * hp.sigma_V2 * hp.sigma_Q2 * hp.sigma_K2
    if convention == "literal":
        out = k @ k @ k
    elif convention == "pairwise":
        out = k * float(np.sum(k * k))
    else:
        raise InvalidParameterError(f"unknown token convention {convention!r}")
    return symmetrize(c * out)


def specformer_lambda_kernel(kh_T, hp=None, decoder="identity"):
    """Covariance of the decoded spectral filter coefficients."""
    hp = _hp(hp)
    pre = hp.sigma_lambda2 * check_square(kh_T)
    if decoder == "identity":
        return symmetrize(pre)
    if decoder == "relu":
        return relu_kernel_map(pre)
    raise InvalidParameterError(f"unknown decoder nonlinearity {decoder!r}")


def specformer_node_step(k, spec, klambda, hp=None):
    """``sigma_H^2 sigma_w^2 U (K_lambda * (U^T K U)) U^T``."""
    hp = _hp(hp)
    k = check_square(k)
    u = spec.eigenvectors
    kl = check_square(klambda)
    _same_shape(k, u, kl)
    inner = kl * (u.T @ k @ u)
    return symmetrize(hp.sigma_H2 * hp.sigma_w2 * (u @ inner @ u.T))


def _gtn_factors(hp, meta_path_len):
    ks = hp.gtn_sigma_k2
    if len(ks) == 1:
        ks = ks * meta_path_len
    if len(ks) < meta_path_len:
        raise InvalidParameterError(
            f"need {meta_path_len} per-step variances, got {len(ks)}")
    return ks[:meta_path_len]


def gtn_normalized_relations(relations):
    out = []
    for t, a in enumerate(relations):
        try:
            out.append(row_normalized_adjacency(as_array(a)))
        except DegenerateDegreeError as exc:
            raise DegenerateDegreeError(f"relation {t}: {exc}") from exc
    return out


def gtn_step(k, relations, meta_path_len, hp=None):
    """GTN kernel over every length-``meta_path_len`` meta-path.

    Applies ``Phi(M) = sum_t At M At^T`` (with ``At = D_t^{-1} A_t``) repeatedly,
    which equals the sum over all ``|T|^K`` relation compositions.
    """
    hp = _hp(hp)
    if meta_path_len < 1:
        raise InvalidParameterError("meta_path_len must be >= 1")
    m = check_square(k)
    mats = gtn_normalized_relations(relations)
    for a in mats:
        _same_shape(m, a)
    scale = hp.sigma_H2 * hp.sigma_w2 * float(np.prod(_gtn_factors(hp, meta_path_len)))
    for _ in range(meta_path_len):
        m = sum(a @ m @ a.T for a in mats)
    return symmetrize(scale * m)
