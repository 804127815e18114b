"""Kernel-ridge node classification with validation-based ridge selection."""

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from ._parallel import map_ordered
from .datasets import SPLIT_NAMES, SplitIndices
from .exceptions import InvalidParameterError, NumericalError
from .kernels.params import as_array
from .kernels.sweep import SweepOptions, run_depth_sweep
from .sbm import block_scalars

DEFAULT_RIDGE_GRID = (1e-6, 1e-4, 1e-2, 1.0, 10.0)
RESIDUAL_RTOL = 1e-8
SWEEP_COLUMNS = ("model", "depth", "pe_kind", "alpha", "val_acc", "test_acc", "ridge", "runtime_ms")


@dataclass(frozen=True)
class ClassificationResult:
    """Accuracies per split at the selected ridge, plus confusion counts.

    ``confusion[split][i, j]`` counts nodes of class ``classes[i]`` predicted as
    ``classes[j]``. ``val_accuracy_by_ridge`` maps every tried ridge to its
    validation accuracy.
    """

    accuracy: dict
    ridge: float
    confusion: dict
    classes: np.ndarray
    predictions: np.ndarray
    val_accuracy_by_ridge: dict = field(default_factory=dict)

    @property
    def val_accuracy(self):
        return self.accuracy["val"]

    @property
    def test_accuracy(self):
        return self.accuracy["test"]


def one_hot(labels, classes):
    return (np.asarray(labels)[:, None] == classes[None, :]).astype(float)


def solve_ridge_system(k_tt, targets, ridge, max_jitter_steps=3):
    """Solve ``(K + ridge I) alpha = Y`` by Cholesky.

    If the factorization fails, ``1e-10 * trace / n`` is added to the diagonal and
    multiplied by 10 on each further failure, at most ``max_jitter_steps`` times.
    One step of iterative refinement follows; the residual of the unjittered
    system must then be below ``1e-8 * ||Y||``.
    """
    k_tt = np.asarray(k_tt, dtype=float)
    m = k_tt.shape[0]
    system = k_tt + ridge * np.eye(m)
    base = 1e-10 * max(np.trace(k_tt) / max(m, 1), 1e-300)
    factor = None
    for step in range(max_jitter_steps + 1):
        jitter = 0.0 if step == 0 else base * 10 ** (step - 1)
        try:
            factor = linalg.cho_factor(system + jitter * np.eye(m), lower=True, check_finite=True)
            break
        except linalg.LinAlgError:
            continue
    if factor is None:
        raise NumericalError(f"kernel ridge system is not positive definite at ridge={ridge!r}")
    alpha = linalg.cho_solve(factor, targets)
    alpha = alpha + linalg.cho_solve(factor, targets - system @ alpha)
    resid = np.linalg.norm(system @ alpha - targets)
    scale = np.linalg.norm(targets)
    if not np.isfinite(resid) or resid > RESIDUAL_RTOL * max(scale, 1e-300):
        raise NumericalError(
            f"kernel ridge system is numerically singular at ridge={ridge!r} "
            f"(relative residual {resid / max(scale, 1e-300):.3e})")
    return alpha


def _accuracy(pred, truth):
    return float(np.mean(pred == truth)) if truth.size else float("nan")


def _confusion(pred, truth, classes):
    c = len(classes)
    out = np.zeros((c, c), dtype=np.int64)
    ti = np.searchsorted(classes, truth)
    pi = np.searchsorted(classes, pred)
    np.add.at(out, (ti, pi), 1)
    return out


def kernel_ridge_classify(k, labels, splits, ridge_grid=DEFAULT_RIDGE_GRID, workers=1):
    """Multi-output kernel ridge regression on one-hot targets, argmax decoding.

    Each ridge is fit on the train block and scored on the validation block;
    the best validation accuracy wins, ties going to the smallest ridge. Class
    score ties go to the smallest class label.
    """
    k = as_array(k)
    labels = np.asarray(labels)
    n = k.shape[0]
    if k.shape != (n, n) or labels.shape != (n,):
        raise InvalidParameterError(f"kernel {k.shape} and labels {labels.shape} do not match")
    if not isinstance(splits, SplitIndices):
        splits = SplitIndices(*splits)
    splits.check_range(n)
    if splits.train.size == 0:
        raise InvalidParameterError("train split is empty")
    grid = sorted(float(r) for r in ridge_grid)
    if not grid:
        raise InvalidParameterError("ridge grid is empty")
    if any(r < 0 or not np.isfinite(r) for r in grid):
        raise InvalidParameterError("ridge values must be finite and nonnegative")
    if len(grid) > 1 and splits.val.size == 0:
        raise InvalidParameterError("selecting a ridge needs a nonempty validation split")

    classes = np.unique(labels)
    tr = splits.train
    targets = one_hot(labels[tr], classes)
    k_tt = k[np.ix_(tr, tr)]
    k_all = k[:, tr]

    def fit(ridge):
        alpha = solve_ridge_system(k_tt, targets, ridge)
        # argmax returns the first maximum, i.e. the smallest class
        return classes[np.argmax(k_all @ alpha, axis=1)]

    preds = map_ordered(fit, grid, workers)
    val_acc = {r: _accuracy(p[splits.val], labels[splits.val]) for r, p in zip(grid, preds)}
    best = 0
    for i, r in enumerate(grid):
        if val_acc[r] > val_acc[grid[best]]:
            best = i
    pred = preds[best]
    acc = {s: _accuracy(pred[getattr(splits, s)], labels[getattr(splits, s)]) for s in SPLIT_NAMES}
    conf = {s: _confusion(pred[getattr(splits, s)], labels[getattr(splits, s)], classes) for s in SPLIT_NAMES}
    return ClassificationResult(acc, grid[best], conf, classes, pred, val_acc)


def depth_accuracy_sweep(g, model, hp=None, depths=(1,), splits=None, options=None, labels=None,
                         ridge_grid=DEFAULT_RIDGE_GRID, workers=1, k0=None, **overrides):
    """Classify with the layer-``depth`` kernel for every requested depth.

    LayerNorm is always on. Rows hold ``depth``, ``val_acc``, ``test_acc``,
    ``ridge``, ``ratio`` (inter/intra block mean of the kernel, only for two
    classes, else ``nan``) and ``runtime_ms`` (kernel plus solve time).
    ``k0`` replaces the feature kernel as the input kernel.
    """
    labels = g.labels if labels is None else labels
    if labels is None or np.ndim(labels) != 1:
        raise InvalidParameterError("depth_accuracy_sweep needs node labels")
    if splits is None:
        raise InvalidParameterError("depth_accuracy_sweep needs splits")
    labels = np.asarray(labels)
    depths = sorted({int(d) for d in depths})
    if not depths or depths[0] < 0:
        raise InvalidParameterError("depths must be nonnegative")
    options = replace(options or SweepOptions(), layernorm=True, **overrides)
    t0 = time.perf_counter()
    traj = run_depth_sweep(g, model, hp, depths[-1], options, k0=k0)
    kernel_ms = (time.perf_counter() - t0) * 1e3 / max(depths[-1], 1)
    two_blocks = np.unique(labels).size == 2
    rows = []
    for d in depths:
        t1 = time.perf_counter()
        res = kernel_ridge_classify(traj[d].values, labels, splits, ridge_grid, workers)
        if two_blocks:
            x, y, _ = block_scalars(traj[d].values, labels)
            ratio = y / x
        else:
            ratio = float("nan")
        rows.append({
            "depth": d,
            "val_acc": res.val_accuracy,
            "test_acc": res.test_accuracy,
            "ridge": res.ridge,
            "ratio": ratio,
            "runtime_ms": kernel_ms * max(d, 1) + (time.perf_counter() - t1) * 1e3,
        })
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_sweep_table(path, rows, timings=True):
    """CSV with the columns of ``SWEEP_COLUMNS``.

    With ``timings=False`` the ``runtime_ms`` field is left empty so the file
    depends only on the inputs.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            row = dict(row)
            if not timings:
                row["runtime_ms"] = None
            w.writerow([_fmt(row.get(c)) for c in SWEEP_COLUMNS])
