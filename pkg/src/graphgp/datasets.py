"""Plain-text dataset ingestion.

Edge file: one ``i j`` pair of 0-based indices per line, ``#`` lines ignored.
Feature file: CSV, row ``i`` holds the features of node ``i``.
Label file: one integer class per line.
Split file: lines ``train:``, ``val:`` and ``test:`` followed by comma-separated indices.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import DatasetParseError
from .graph import Graph

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in SPLIT_NAMES:
            a = np.array(getattr(self, name), dtype=np.int64).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for i, a in enumerate(SPLIT_NAMES):
            for b in SPLIT_NAMES[i + 1:]:
                common = np.intersect1d(getattr(self, a), getattr(self, b))
                if common.size:
                    raise DatasetParseError(
                        f"splits {a} and {b} overlap on {common.size} node(s), e.g. {int(common[0])}")

    def check_range(self, n):
        for name in SPLIT_NAMES:
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise DatasetParseError(f"{name} split has an index outside [0, {n})")


def random_split(n, fractions=(0.6, 0.2, 0.2), seed=0, labels=None):
    """Random train/val/test partition; stratified by ``labels`` when given."""
    rng = np.random.default_rng(seed)
    groups = [np.arange(n)] if labels is None else [np.flatnonzero(labels == c) for c in np.unique(labels)]
    parts = {name: [] for name in SPLIT_NAMES}
    for idx in groups:
        idx = rng.permutation(idx)
        n_tr = int(round(fractions[0] * idx.size))
        n_va = int(round(fractions[1] * idx.size))
        parts["train"].append(idx[:n_tr])
        parts["val"].append(idx[n_tr:n_tr + n_va])
        parts["test"].append(idx[n_tr + n_va:])
    return SplitIndices(*(np.sort(np.concatenate(parts[k])) for k in SPLIT_NAMES))


def read_edges(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split()
            if len(tok) != 2:
                raise DatasetParseError(f"{path}:{lineno}: expected two node indices, got {s!r}")
            try:
                i, j = int(tok[0]), int(tok[1])
            except ValueError:
                raise DatasetParseError(f"{path}:{lineno}: non-integer node index in {s!r}") from None
            if i < 0 or j < 0:
                raise DatasetParseError(f"{path}:{lineno}: negative node index in {s!r}")
            pairs.append((i, j, lineno))
    return pairs


def read_features(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DatasetParseError(f"{path}:{lineno}: non-numeric feature value") from None
            if len(rows[-1]) != len(rows[0]):
                raise DatasetParseError(
                    f"{path}:{lineno}: row has {len(rows[-1])} columns, expected {len(rows[0])}")
    if not rows:
        raise DatasetParseError(f"{path}: no feature rows")
    return np.array(rows)


def read_labels(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise DatasetParseError(f"{path}:{lineno}: label {s!r} is not an integer") from None
    return np.array(out, dtype=np.int64)


def read_splits(path):
    found = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            name, sep, rest = s.partition(":")
            name = name.strip()
            if not sep or name not in SPLIT_NAMES:
                raise DatasetParseError(f"{path}:{lineno}: expected one of train:/val:/test:, got {s!r}")
            if name in found:
                raise DatasetParseError(f"{path}:{lineno}: duplicate {name} line")
            try:
                found[name] = [int(t) for t in rest.split(",") if t.strip()]
            except ValueError:
                raise DatasetParseError(f"{path}:{lineno}: non-integer index in {name} split") from None
    missing = [k for k in SPLIT_NAMES if k not in found]
    if missing:
        raise DatasetParseError(f"{path}: missing split line(s) {', '.join(missing)}")
    return SplitIndices(*(found[k] for k in SPLIT_NAMES))


def load_dataset(edge_path, feature_path, label_path=None, split_path=None):
    """Read a graph and its splits. Duplicate and reversed edges collapse to one entry.

    Labels and splits are optional; missing ones come back as ``None``.
    """
    x = read_features(feature_path)
    n = x.shape[0]
    labels = None if label_path is None else read_labels(label_path)
    if labels is not None and labels.size != n:
        raise DatasetParseError(f"{label_path}: {labels.size} labels for {n} feature rows")
    adj = np.zeros((n, n))
    for i, j, lineno in read_edges(edge_path):
        if i >= n or j >= n:
            raise DatasetParseError(f"{edge_path}:{lineno}: node index {max(i, j)} out of range for {n} nodes")
        adj[i, j] = adj[j, i] = 1.0
    if split_path is None:
        return Graph(adj, x, labels), None
    splits = read_splits(split_path)
    splits.check_range(n)
    return Graph(adj, x, labels), splits
