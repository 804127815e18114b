from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

import numpy as np

from ..exceptions import InvalidKernelError, InvalidParameterError

MODELS = ("gcn", "gat", "gat_relu", "graphormer", "specformer", "gtn")

VARIANCE_FIELDS = (
    "sigma_w2", "sigma_v2", "sigma_H2", "sigma_Q2", "sigma_K2", "sigma_b2",
    "sigma_V2", "sigma_O2", "sigma_lambda2", "sigma_CE2",
)


@dataclass(frozen=True)
class HyperParams:
    """Prior variances of every weight family plus the Graphormer mixing weight.

    All variances default to 1 except ``sigma_b2``, which defaults to 0 so the
    structural attention bias is opt-in.
    """

    sigma_w2: float = 1.0
    sigma_v2: float = 1.0
    sigma_H2: float = 1.0
    sigma_Q2: float = 1.0
    sigma_K2: float = 1.0
    sigma_b2: float = 0.0
    sigma_V2: float = 1.0
    sigma_O2: float = 1.0
    sigma_lambda2: float = 1.0
    sigma_CE2: float = 1.0
    alpha: float = 0.5
    gtn_sigma_k2: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        for name in VARIANCE_FIELDS:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidParameterError(f"{name} must be a finite nonnegative variance, got {v}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        ks = tuple(float(v) for v in np.atleast_1d(self.gtn_sigma_k2))
        if any(v < 0 for v in ks):
            raise InvalidParameterError("gtn_sigma_k2 entries must be nonnegative")
        object.__setattr__(self, "gtn_sigma_k2", ks)

    def replace(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class KernelMatrix:
    """A node kernel tagged with where it came from.

    ``stage`` is ``"pre"`` for the pre-activation kernel and ``"post"`` after the
    activation / normalisation maps.
    """

    values: np.ndarray
    layer: int = 0
    model: Optional[str] = None
    stage: str = "post"

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def n(self):
        return self.values.shape[0]


def as_array(k):
    if isinstance(k, KernelMatrix):
        return k.values
    return np.asarray(k, dtype=float)


def symmetrize(m):
    return (m + m.T) / 2


def check_square(m, name="kernel"):
    m = as_array(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidKernelError(f"{name} must be square, got shape {m.shape}")
    return m


def check_kernel(k, sym_tol=1e-10, psd_rtol=1e-8):
    """Raise ``InvalidKernelError`` unless ``k`` is symmetric, PSD up to roundoff,
    with nonnegative diagonal. Returns the smallest eigenvalue."""
    k = check_square(k)
    asym = np.max(np.abs(k - k.T), initial=0.0)
    scale = max(np.max(np.abs(k), initial=0.0), 1e-300)
    if asym > sym_tol * max(scale, 1.0):
        raise InvalidKernelError(f"kernel is not symmetric (max asymmetry {asym:.3e})")
    floor = -psd_rtol * max(np.max(np.diag(k), initial=0.0), 1e-300)
    if np.any(np.diag(k) < floor):
        raise InvalidKernelError("kernel has a negative diagonal entry")
    min_eig = float(np.linalg.eigvalsh(symmetrize(k))[0])
    if min_eig < floor:
        raise InvalidKernelError(f"kernel is not PSD (min eigenvalue {min_eig:.3e})")
    return min_eig
