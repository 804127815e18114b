"""Layer-by-layer kernel trajectories for every supported architecture."""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..exceptions import InvalidParameterError
from ..graph import Graph, normalized_adjacency, normalized_laplacian_spectrum
from .maps import layernorm_kernel_map, relu_kernel_map
from .params import MODELS, HyperParams, KernelMatrix, as_array, check_kernel, check_square
from .positional import PositionalCovariance
from . import steps

_DEFAULT_OPERATOR = {"gcn": "normalized", "gat": "raw", "gat_relu": "raw"}


@dataclass(frozen=True)
class SweepOptions:
    """Knobs of a depth sweep.

    ``order`` is ``"act_ln"`` (step, ReLU map, LayerNorm) or ``"ln_act"``.
    ``operator`` selects the propagation matrix for GCN/GAT (``"normalized"`` or
    ``"raw"``); ``None`` picks the model default (normalized for GCN, raw for GAT).
    ``token_convention`` defaults to ``"pairwise"``, the convention the sampled
    Specformer filters converge to.
    """

    activation: str = "relu"
    layernorm: bool = True
    order: str = "act_ln"
    operator: Optional[str] = None
    self_loops: bool = False
    pe: Optional[PositionalCovariance] = None
    relation: object = None
    relations: Optional[Sequence[np.ndarray]] = None
    meta_path_len: int = 1
    token_layers: int = 1
    embed_dim: int = 8
    epsilon: float = 1.0
    decoder: str = "identity"
    token_convention: str = "pairwise"
    spectral_filter: Optional[np.ndarray] = None
    klambda: Optional[np.ndarray] = None
    validate: bool = False

    def __post_init__(self):
        if self.activation not in ("relu", "identity"):
            raise InvalidParameterError(f"activation must be relu or identity, got {self.activation!r}")
        if self.order not in ("act_ln", "ln_act"):
            raise InvalidParameterError(f"order must be act_ln or ln_act, got {self.order!r}")
        if self.operator not in (None, "normalized", "raw"):
            raise InvalidParameterError(f"operator must be normalized or raw, got {self.operator!r}")


def propagation_matrix(g, model, options):
    kind = options.operator or _DEFAULT_OPERATOR.get(model, "raw")
    if kind == "normalized":
        return normalized_adjacency(g, self_loops=options.self_loops)
    a = np.array(g.adjacency)
    if options.self_loops:
        a = a + np.eye(g.n)
    return a


def specformer_filter_kernel(g, hp, options, spec=None):
    """The spectral-filter covariance ``K_lambda`` used by every Specformer layer."""
    if options.klambda is not None:
        return check_square(options.klambda)
    spec = spec or normalized_laplacian_spectrum(g, self_loops=options.self_loops)
    if options.spectral_filter is not None:
        f = options.spectral_filter
        lam_bar = np.asarray(f(spec.eigenvalues) if callable(f) else f, dtype=float)
        return np.outer(lam_bar, lam_bar)
    kh = steps.specformer_token_kernel_init(spec, options.embed_dim, options.epsilon)
    for _ in range(options.token_layers):
        kh = steps.specformer_token_step_linear(kh, hp, convention=options.token_convention)
    return steps.specformer_lambda_kernel(kh, hp, decoder=options.decoder)


def make_layer_step(g, model, hp, options):
    """Return ``step(K) -> Sigma`` for one layer of ``model`` on graph ``g``."""
    if model not in MODELS:
        raise InvalidParameterError(f"unknown model {model!r}; expected one of {MODELS}")
    if model == "gcn":
        s = propagation_matrix(g, model, options)
        return lambda k: steps.gcn_step(k, s, hp)
    if model == "gat":
        a = propagation_matrix(g, model, options)
        return lambda k: steps.gat_step_linear(k, a, hp)
    if model == "gat_relu":
        a = propagation_matrix(g, model, options)
        return lambda k: steps.gat_step_relu_attention(k, a, hp)
    if model == "graphormer":
        if options.pe is None and options.relation is None:
            raise InvalidParameterError("graphormer needs a positional covariance or a structural relation")
        if hp.sigma_b2 > 0 and options.relation is None:
            raise InvalidParameterError("graphormer with sigma_b2 > 0 needs a structural relation")
        r = np.zeros((g.n, g.n)) if options.pe is None else as_array(options.pe.R)
        return lambda k: steps.graphormer_step_linear(
            steps.graphormer_augment(k, r, hp), options.relation, hp)
    if model == "specformer":
        spec = normalized_laplacian_spectrum(g, self_loops=options.self_loops)
        kl = specformer_filter_kernel(g, hp, options, spec)
        return lambda k: steps.specformer_node_step(k, spec, kl, hp)
    # gtn
    rels = options.relations if options.relations is not None else [g.adjacency]
    return lambda k: steps.gtn_step(k, rels, options.meta_path_len, hp)


def _post_maps(sigma, options):
    maps = []
    if options.activation == "relu":
        maps.append(relu_kernel_map)
    if options.layernorm:
        maps.append(layernorm_kernel_map)
    if options.order == "ln_act":
        maps.reverse()
    for f in maps:
        sigma = f(sigma)
    return sigma


def run_depth_sweep(g, model, hp=None, depth=1, options=None, k0=None, **overrides):
    """Kernel trajectory ``[K0, K1, ..., K_depth]`` as ``KernelMatrix`` objects.

    ``K0`` is ``X X^T / d_in`` unless ``k0`` is given. Each layer applies the
    model step, then the optional ReLU and LayerNorm maps.
    """
    hp = hp or HyperParams()
    options = replace(options or SweepOptions(), **overrides)
    if depth < 0:
        raise InvalidParameterError("depth must be >= 0")
    k = check_square(k0) if k0 is not None else g.feature_kernel()
    if k.shape[0] != g.n:
        raise InvalidParameterError(f"initial kernel is {k.shape}, graph has {g.n} nodes")
    traj = [KernelMatrix(k, 0, model, "post")]
    if depth == 0:
        return traj
    step = make_layer_step(g, model, hp, options)
    for layer in range(1, depth + 1):
        k = _post_maps(step(k), options)
        if options.validate:
            check_kernel(k)
        traj.append(KernelMatrix(k, layer, model, "post"))
    return traj
