"""Closed-form kernel evolution on the population two-block SBM.

Values are carried as ``(sign, log|v|)`` pairs because several trajectories grow
exponentially (GCN) or doubly exponentially (GAT) in depth.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateNodeError, InvalidParameterError
from .graph import (
    SbmParams,
    community_labels,
    normalized_laplacian_spectrum,
    population_sbm,
    sbm_input_kernel,
)
from .kernels import steps
from .kernels.params import HyperParams

VERDICTS = ("oversmoothing", "structure-preserved", "undetermined")
SBM_MODELS = ("gcn", "gat", "graphormer", "specformer")


def _slog(v):
    v = float(v)
    if v == 0.0:
        return 0, -math.inf
    return (1 if v > 0 else -1), math.log(abs(v))


def _sadd(a, b):
    """Sum of two signed-log numbers."""
    (sa, la), (sb, lb) = a, b
    if sa == 0:
        return b
    if sb == 0:
        return a
    m = max(la, lb)
    v = sa * math.exp(la - m) + sb * math.exp(lb - m)
    if v == 0.0:
        return 0, -math.inf
    return (1 if v > 0 else -1), m + math.log(abs(v))


def _smul(a, b):
    (sa, la), (sb, lb) = a, b
    if sa == 0 or sb == 0:
        return 0, -math.inf
    return sa * sb, la + lb


def _even_power_log(v, k):
    """``log |v|^k`` for an even exponent ``k >= 0`` with ``0^0 = 1``."""
    if k == 0:
        return 0.0
    return k * math.log(abs(v)) if v != 0 else -math.inf


def _exp_signed(s, lg):
    if s == 0:
        return 0.0
    with np.errstate(over="ignore"):
        return s * float(np.exp(lg))


@dataclass(frozen=True)
class SbmKernelState:
    """Intra (``x``) and inter (``y``) community kernel values at one depth.

    Stored as a shared log scale times two unit-range mantissas so the ratio
    ``y / x`` stays exact even when ``log x`` itself is astronomically large.
    """

    layer: int
    scale_log: float
    x_unit: float
    y_unit: float

    @classmethod
    def from_logs(cls, layer, x, y):
        """Build from signed-log pairs ``(sign, log|v|)``."""
        (xs, xl), (ys, yl) = x, y
        m = max(xl if xs else -math.inf, yl if ys else -math.inf)
        if m == -math.inf:
            return cls(layer, -math.inf, 0.0, 0.0)
        return cls(layer, m, xs * math.exp(xl - m) if xs else 0.0,
                   ys * math.exp(yl - m) if ys else 0.0)

    @classmethod
    def from_values(cls, layer, x, y):
        return cls.from_logs(layer, _slog(x), _slog(y))

    @property
    def x_sign(self):
        return int(np.sign(self.x_unit))

    @property
    def y_sign(self):
        return int(np.sign(self.y_unit))

    @property
    def x_log(self):
        return self.scale_log + math.log(abs(self.x_unit)) if self.x_unit else -math.inf

    @property
    def y_log(self):
        return self.scale_log + math.log(abs(self.y_unit)) if self.y_unit else -math.inf

    @property
    def x(self):
        return _exp_signed(self.x_sign, self.x_log)

    @property
    def y(self):
        return _exp_signed(self.y_sign, self.y_log)


@dataclass(frozen=True)
class GatFactors:
    """Growth factor ``G`` (kept as ``log G``) and structure factor ``F`` of the GAT kernel."""

    G_log: float
    F: float

    @property
    def G(self):
        return _exp_signed(1, self.G_log)


def _params(params):
    return params if isinstance(params, SbmParams) else SbmParams(**params)


def _check_depth(depth):
    if int(depth) != depth or depth < 0:
        raise InvalidParameterError(f"depth must be a non-negative integer, got {depth}")
    return int(depth)


def gcn_sbm(params, depth):
    """GCN kernel on the population SBM with raw adjacency and unit weight variance."""
    prm = _params(params)
    depth = _check_depth(depth)
    if depth == 0:
        return SbmKernelState.from_values(0, prm.x0, prm.y0)
    return specformer_sbm(prm, prm.half * (prm.p + prm.q), prm.half * (prm.p - prm.q), depth)


def gat_factors(params):
    prm = _params(params)
    s = prm.p + prm.q
    total = prm.x0 + prm.y0
    g_log = math.log(total) + 2 * math.log(s) + 2 * math.log(prm.half) if s > 0 and total > 0 else -math.inf
    f = 2 * (prm.p ** 2 - prm.p * prm.q + prm.q ** 2) / s ** 2 if s > 0 else math.nan
    return GatFactors(g_log, f)


def gat_sbm(params, depth):
    """GAT kernel (identity attention, unit variances) in the published closed form.

    ``x, y = 1/2 * G^(2^l) / ((n/2)^2 (p+q)^2) * [1 ± r F^l]`` with
    ``r = (x0 - y0) / (x0 + y0)``. This form is exact whenever ``x0 == y0``;
    :func:`gat_sbm_recurrence` gives the exact two-variable iteration for any input.
    """
    prm = _params(params)
    depth = _check_depth(depth)
    total = prm.x0 + prm.y0
    if total <= 0:
        raise InvalidParameterError("GAT closed form needs x0 + y0 > 0")
    fac = gat_factors(prm)
    if depth == 0:
        return SbmKernelState.from_values(0, prm.x0, prm.y0), fac
    s = prm.p + prm.q
    # G^(2^l) / ((n/2)^2 (p+q)^2) = (x0+y0)^(2^l) * ((n/2)(p+q))^(2^(l+1) - 2)
    growth = 2.0 ** depth
    if s == 0:
        pre = (0, -math.inf)
    else:
        pre = (1, math.log(0.5) + growth * math.log(total)
               + (2 * growth - 2) * math.log(prm.half * s))
    r = (prm.x0 - prm.y0) / total
    rf = _smul(_slog(r), (1, depth * math.log(fac.F)) if fac.F > 0 else (0, -math.inf))
    x = _smul(pre, _sadd((1, 0.0), rf))
    y = _smul(pre, _sadd((1, 0.0), (-rf[0], rf[1])))
    return SbmKernelState.from_logs(depth, x, y), fac


def gat_sbm_recurrence(params, depth):
    """Exact GAT block-scalar trajectory ``[state_0, ..., state_depth]``.

    Iterates ``x' = h^2 [2(p^2+q^2) x^2 + 2pq (xy + y^2)]`` and the mirrored
    update for ``y`` (``h = n/2``) on a normalised pair plus a running log scale.
    """
    prm = _params(params)
    depth = _check_depth(depth)
    p, q, h = prm.p, prm.q, prm.half
    sq, cross = p * p + q * q, p * q
    scale = max(abs(prm.x0), abs(prm.y0))
    if scale == 0:
        raise InvalidParameterError("input kernel is identically zero")
    u, v = prm.x0 / scale, prm.y0 / scale
    log_scale = math.log(scale)
    out = [SbmKernelState.from_values(0, prm.x0, prm.y0)]
    for layer in range(1, depth + 1):
        nu = 2 * sq * u * u + 2 * cross * (u * v + v * v)
        nv = 2 * sq * v * v + 2 * cross * (u * v + u * u)
        m = max(abs(nu), abs(nv))
        if m == 0:
            out.extend(SbmKernelState(k, -math.inf, 0.0, 0.0) for k in range(layer, depth + 1))
            break
        log_scale = 2 * log_scale + 2 * math.log(h) + math.log(m)
        u, v = nu / m, nv / m
        out.append(SbmKernelState(layer, log_scale, u, v))
    return out


def graphormer_sbm(params, alpha, depth):
    """Augmented Graphormer kernel ``alpha^l x0 + (1 - alpha^l) p`` (and likewise for ``y``).

    The global attention scale is divided out, leaving the convex re-mixing with
    the adjacency prior as the only effect of a layer.
    """
    prm = _params(params)
    depth = _check_depth(depth)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")
    a = alpha ** depth
    return SbmKernelState.from_values(depth, a * prm.x0 + (1 - a) * prm.p,
                                      a * prm.y0 + (1 - a) * prm.q)


def specformer_sbm(params, lambda1, lambda2, depth):
    """Specformer kernel with filter value ``lambda1`` on the constant mode and ``lambda2`` on the community mode.

    ``x, y = 1/2 [(x0 + y0) lambda1^(2l) ± (x0 - y0) lambda2^(2l)]``.
    """
    prm = _params(params)
    depth = _check_depth(depth)
    a = _smul(_slog(prm.x0 + prm.y0), (1, _even_power_log(lambda1, 2 * depth)))
    if lambda1 == 0 and depth > 0:
        a = (0, -math.inf)
    b = _smul(_slog(prm.x0 - prm.y0), (1, _even_power_log(lambda2, 2 * depth)))
    if lambda2 == 0 and depth > 0:
        b = (0, -math.inf)
    half = (1, math.log(0.5))
    x = _smul(half, _sadd(a, b))
    y = _smul(half, _sadd(a, (-b[0], b[1])))
    return SbmKernelState.from_logs(depth, x, y)


def remark_filter(params):
    """Filter values ``((n/2)(p+q), (n/2)(p-q))`` under which Specformer reproduces GCN."""
    prm = _params(params)
    return prm.half * (prm.p + prm.q), prm.half * (prm.p - prm.q)


def ratio_metric(state):
    """``y / x``; raises for ``x == 0``."""
    if state.x_unit == 0:
        raise DegenerateNodeError(f"intra-community kernel is zero at layer {state.layer}")
    return state.y_unit / state.x_unit


def gat_gamma_limit(params):
    """Formal depth limit of ``1 - r F^l`` over ``1 + r F^l``."""
    prm = _params(params)
    f = gat_factors(prm).F
    r = (prm.x0 - prm.y0) / (prm.x0 + prm.y0)
    if r == 0 or f < 1:
        return 1.0
    if f == 1:
        return (1 - r) / (1 + r)
    return -1.0


@dataclass(frozen=True)
class Diagnosis:
    verdict: str
    gamma: float
    final_gap: float


def oversmoothing_diagnosis(trajectory, tol=1e-3):
    """Classify a trajectory of block states.

    ``oversmoothing`` when ``|y/x - 1| < tol`` at the last layer and that gap is
    non-increasing over the last half, ``structure-preserved`` when the final gap
    is at least ``tol``, else ``undetermined``. ``gamma`` is the final ratio.
    """
    trajectory = list(trajectory)
    if len(trajectory) < 2:
        raise InvalidParameterError("need at least two states to diagnose a trajectory")
    ratios = np.array([ratio_metric(s) for s in trajectory])
    gaps = np.abs(ratios - 1.0)
    tail = gaps[len(gaps) // 2:]
    final = float(gaps[-1])
    if final >= tol:
        verdict = "structure-preserved"
    elif np.all(np.diff(tail) <= 0):
        verdict = "oversmoothing"
    else:
        verdict = "undetermined"
    return Diagnosis(verdict, float(ratios[-1]), final)


def closed_form_trajectory(model, params, depth, alpha=0.5, lambdas=None):
    """``[state_0, ..., state_depth]`` from the closed form of ``model``."""
    prm = _params(params)
    if model == "gcn":
        return [gcn_sbm(prm, k) for k in range(depth + 1)]
    if model == "gat":
        return [gat_sbm(prm, k)[0] for k in range(depth + 1)]
    if model == "gat_exact":
        return gat_sbm_recurrence(prm, depth)
    if model == "graphormer":
        return [graphormer_sbm(prm, alpha, k) for k in range(depth + 1)]
    if model == "specformer":
        l1, l2 = lambdas if lambdas is not None else remark_filter(prm)
        return [specformer_sbm(prm, l1, l2, k) for k in range(depth + 1)]
    raise InvalidParameterError(f"unknown SBM model {model!r}")


# matrix recursion on the population graph, used as an oracle for the closed forms

def block_scalars(k, labels):
    """Block means ``(x, y)`` and the largest within-block deviation from them."""
    k = np.asarray(k)
    same = labels[:, None] == labels[None, :]
    x, y = k[same].mean(), k[~same].mean()
    dev = max(np.max(np.abs(k[same] - x)), np.max(np.abs(k[~same] - y)))
    return float(x), float(y), float(dev)


def specformer_sbm_filter(params, lambda1, lambda2, tol=1e-9):
    """Per-eigenvalue filter on the normalised Laplacian of the population SBM.

    The zero eigenvalue (constant mode) gets ``lambda1``; every other mode gets
    ``lambda2``, which covers the community mode and leaves the bulk harmless
    because the block-constant kernels have no bulk component.
    """
    prm = _params(params)
    spec = normalized_laplacian_spectrum(population_sbm(prm))
    return spec, np.where(np.abs(spec.eigenvalues) < tol, lambda1, lambda2)


def sbm_matrix_trajectory(model, params, depth, alpha=0.5, lambdas=None):
    """Block scalars from iterating the dense kernel steps with unit variances.

    Returns a list of ``(x, y, max_deviation)`` for layers ``0..depth``.
    """
    prm = _params(params)
    hp = HyperParams()
    g = population_sbm(prm)
    a = np.array(g.adjacency)
    labels = community_labels(prm.n)
    k = sbm_input_kernel(prm)
    out = [block_scalars(k, labels)]
    if model == "gcn":
        step = lambda m: steps.gcn_step(m, a, hp)
    elif model == "gat":
        step = lambda m: steps.gat_step_linear(m, a, hp)
    elif model == "graphormer":
        ahp = hp.replace(alpha=alpha)

        def step(kt):
            # divide out the global scale, then re-mix with the adjacency prior
            z = float(np.sum(kt * kt))
            return steps.graphormer_augment(steps.graphormer_step_linear(kt, None, ahp) / z, a, ahp)
    elif model == "specformer":
        l1, l2 = lambdas if lambdas is not None else remark_filter(prm)
        spec, lam_bar = specformer_sbm_filter(prm, l1, l2)
        kl = np.outer(lam_bar, lam_bar)
        step = lambda m: steps.specformer_node_step(m, spec, kl, hp)
    else:
        raise InvalidParameterError(f"unknown SBM model {model!r}")
    for _ in range(depth):
        k = step(k)
        out.append(block_scalars(k, labels))
    return out


def relative_gap(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def phase_diagram_rows(models, grid, n, depth, x0=1.0, y0=0.0, alpha=0.5, tol=1e-3):
    """Rows of the phase diagram over ``grid`` (iterable of ``(p, q)``) for every layer."""
    rows = []
    for model in models:
        for p, q in grid:
            prm = SbmParams(n, p, q, x0, y0)
            traj = closed_form_trajectory(model, prm, depth, alpha=alpha)
            try:
                verdict = oversmoothing_diagnosis(traj, tol).verdict
            except DegenerateNodeError:
                verdict = "undetermined"
            fac = gat_factors(prm) if model in ("gat", "gat_exact") else None
            for st in traj:
                try:
                    ratio = ratio_metric(st)
                except DegenerateNodeError:
                    ratio = math.nan
                rows.append({
                    "model": model, "p": p, "q": q, "layer": st.layer,
                    "x_log": st.x_log, "x_sign": st.x_sign,
                    "y_log": st.y_log, "y_sign": st.y_sign,
                    "ratio": ratio, "verdict": verdict,
                    "F": "" if fac is None else fac.F,
                    "G_log": "" if fac is None else fac.G_log,
                })
    return rows


PHASE_COLUMNS = ("model", "p", "q", "layer", "x_log", "x_sign", "y_log", "y_sign",
                 "ratio", "verdict", "F", "G_log")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_phase_diagram(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PHASE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in PHASE_COLUMNS])
