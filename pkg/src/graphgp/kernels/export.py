"""CSV export of kernel trajectories."""

import csv
import os

import numpy as np

SUMMARY_COLUMNS = ("layer", "trace", "min_eig", "intra_mean", "inter_mean", "ratio")


def _f(v):
    return repr(float(v))


def write_matrix_csv(path, m):
    m = np.asarray(m, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"n{j}" for j in range(m.shape[1])])
        for row in m:
            w.writerow([_f(v) for v in row])


def summary_row(k, layer, labels=None):
    k = np.asarray(k, dtype=float)
    row = {"layer": layer, "trace": float(np.trace(k)),
           "min_eig": float(np.linalg.eigvalsh((k + k.T) / 2)[0]),
           "intra_mean": "", "inter_mean": "", "ratio": ""}
    if labels is not None:
        labels = np.asarray(labels)
        same = labels[:, None] == labels[None, :]
        intra, inter = float(k[same].mean()), float(k[~same].mean())
        row.update(intra_mean=intra, inter_mean=inter,
                   ratio=inter / intra if intra != 0 else float("nan"))
    return row


def write_trajectory(directory, trajectory, labels=None, prefix="kernel"):
    """Write ``<prefix>_layer<l>.csv`` per layer plus ``<prefix>_summary.csv``.

    The summary carries community statistics only when ``labels`` is given.
    Returns the written paths.
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    rows = []
    for k in trajectory:
        layer = getattr(k, "layer", len(rows))
        arr = np.asarray(k, dtype=float)
        p = os.path.join(directory, f"{prefix}_layer{layer:03d}.csv")
        write_matrix_csv(p, arr)
        paths.append(p)
        rows.append(summary_row(arr, layer, labels))
    p = os.path.join(directory, f"{prefix}_summary.csv")
    cols = SUMMARY_COLUMNS if labels is not None else SUMMARY_COLUMNS[:3]
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] if isinstance(r[c], (int, str)) else _f(r[c]) for c in cols])
    paths.append(p)
    return paths
