"""Execution of a validated experiment configuration.

Randomness: every consumer gets ``derive_seed(root, <module name>, <index>)``,
so results depend only on the root seed and never on the thread count.
"""

import csv
import hashlib
import json
import os
import time

import numpy as np

from .. import __version__
from .._parallel import derive_seed, map_ordered
from ..datasets import load_dataset, random_split
from ..graph import (
    SbmParams,
    normalized_laplacian_spectrum,
    population_sbm,
    sample_csbm,
    sbm_input_kernel,
    shortest_path_buckets,
)
from ..inference import SWEEP_COLUMNS, depth_accuracy_sweep, write_sweep_table
from ..kernels import steps
from ..kernels.attention_mc import gat_step_mc
from ..kernels.export import write_trajectory
from ..kernels.params import HyperParams
from ..kernels.positional import build_positional_covariance
from ..kernels.sweep import SweepOptions, run_depth_sweep, specformer_filter_kernel
from ..sampler import (
    EmpiricalMoments,
    SamplerConfig,
    gaussianity_report,
    sample_gat_layer,
    sample_graphormer_layer,
    sample_specformer_stack,
    write_histograms,
    write_moments,
    write_report,
)
from ..sbm import phase_diagram_rows, write_phase_diagram

MC_SUMMARY_COLUMNS = ("model", "width", "heads", "samples", "frobenius_error", "max_abs_skew",
                      "max_abs_excess_kurtosis", "ks_pass_fraction")


def int_seed(root, *keys):
    return int(derive_seed(root, *keys).generate_state(1, dtype=np.uint64)[0])


def hyperparams(cfg):
    return HyperParams(**cfg.values["hyperparams"])


def build_graph(cfg, repeat=0):
    """``(graph, input kernel or None, splits or None)`` for the configured source."""
    g = cfg.values["graph"]
    root = cfg["experiment.seed"]
    if g["source"] == "population-sbm":
        prm = SbmParams(g["n"], g["p"], g["q"], g["x0"], g["y0"])
        return population_sbm(prm), sbm_input_kernel(prm), None
    if g["source"] == "sampled-csbm":
        graph = sample_csbm(SbmParams(g["n"], g["p"], g["q"]), g["feature_dim"], g["mean_separation"],
                            seed=int_seed(root, "graph", repeat))
        return graph, None, None
    graph, splits = load_dataset(g["edges"], g["features"], g["labels"], g["splits"])
    return graph, None, splits


def sweep_options(cfg, graph, hp):
    k, g = cfg.values["kernel"], cfg.values["graph"]
    pe = None
    if k["pe"] is not None:
        pe = build_positional_covariance(graph, k["pe"], k["pe_rank"], hp, self_loops=g["self_loops"])
    relation = shortest_path_buckets(graph, k["max_bucket"]) if k["relation"] == "shortest-path" else None
    return SweepOptions(
        activation=k["activation"], layernorm=k["layernorm"], order=k["order"],
        self_loops=g["self_loops"], pe=pe, relation=relation, token_layers=k["token_layers"],
        embed_dim=k["embed_dim"], epsilon=k["epsilon"], decoder=k["decoder"],
        token_convention=k["token_convention"],
    )


def run_kernel_sweep(cfg, out, threads):
    hp = hyperparams(cfg)
    graph, k0, _ = build_graph(cfg)
    options = sweep_options(cfg, graph, hp)
    paths = []
    for model in cfg.models:
        traj = run_depth_sweep(graph, model, hp, cfg["kernel.depth"], options, k0=k0)
        paths += write_trajectory(out, traj, graph.labels, prefix=model)
    return paths


def run_sbm_phase(cfg, out, threads):
    g, s = cfg.values["graph"], cfg.values["sbm"]
    grid = [(p, q) for p in s["p_grid"] for q in s["q_grid"]]

    def one(model):
        return phase_diagram_rows([model], grid, g["n"], s["depth"], g["x0"], g["y0"],
                                  cfg["hyperparams.alpha"], s["tol"])

    rows = [r for part in map_ordered(one, cfg.models, threads) for r in part]
    path = os.path.join(out, "phase_diagram.csv")
    write_phase_diagram(path, rows)
    return [path]


def _mc_target(model, graph, hp, cfg, options, relation):
    """Analytic covariance the sampled layer converges to."""
    k0 = graph.feature_kernel()
    smp = cfg.values["sampler"]
    if model == "gat":
        if smp["attention"] == "identity" and smp["score_activation"] == "identity":
            return steps.gat_step_linear(k0, graph.adjacency, hp)
        return gat_step_mc(k0, graph.adjacency, hp, smp["score_activation"],
                           smp["attention"] == "softmax", samples=200_000,
                           seed=int_seed(cfg["experiment.seed"], "analytic")).estimate
    if model == "graphormer":
        r = np.zeros_like(k0) if options.pe is None else options.pe.R
        return steps.graphormer_step_linear(steps.graphormer_augment(k0, r, hp), relation, hp)
    spec = normalized_laplacian_spectrum(graph)
    return steps.specformer_node_step(k0, spec, specformer_filter_kernel(graph, hp, options, spec), hp)


def run_mc_validate(cfg, out, threads):
    hp = hyperparams(cfg)
    graph, _, _ = build_graph(cfg)
    options = sweep_options(cfg, graph, hp)
    smp = cfg.values["sampler"]
    heads = smp["heads"] or smp["widths"]
    root = cfg["experiment.seed"]
    paths, summary = [], []
    for model in cfg.models:
        target = _mc_target(model, graph, hp, cfg, options, options.relation)
        for i, (width, h) in enumerate(zip(smp["widths"], heads)):
            sc = SamplerConfig(width=width, heads=h, samples=smp["samples"], seed=int_seed(root, "sampler", model, i),
                               model=model, hp=hp, chunk=smp["chunk"], workers=threads)
            if model == "gat":
                m = sample_gat_layer(graph, sc, smp["attention"], smp["score_activation"])
            elif model == "graphormer":
                m = sample_graphormer_layer(graph, sc, options.pe, options.relation, smp["attention"])
            else:
                k = cfg.values["kernel"]
                m = sample_specformer_stack(graph, sc, k["token_layers"], k["decoder"], k["embed_dim"],
                                            k["epsilon"])
            report = gaussianity_report(m, target)
            stem = os.path.join(out, f"{model}_w{width}_h{h}")
            write_report(stem + "_report.txt", report)
            write_histograms(stem + "_hist.csv", m)
            write_moments(stem + "_moments.csv", m)
            paths += [stem + "_report.txt", stem + "_hist.csv", stem + "_moments.csv"]
            filters = m.extra.get("filters")
            if isinstance(filters, EmpiricalMoments):
                write_histograms(stem + "_filter_hist.csv", filters)
                paths.append(stem + "_filter_hist.csv")
            d = report.as_dict()
            summary.append([model, width, h, report.samples] + [d[c] for c in MC_SUMMARY_COLUMNS[4:]])
    path = os.path.join(out, "mc_summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MC_SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return paths + [path]


def run_classify(cfg, out, threads):
    hp = hyperparams(cfg)
    c = cfg.values["classify"]
    root = cfg["experiment.seed"]
    pe_kind = cfg["kernel.pe"] or ""
    per_repeat = []
    for rep in range(c["repeats"]):
        graph, k0, splits = build_graph(cfg, rep)
        if splits is None:
            splits = random_split(graph.n, c["fractions"], int_seed(root, "split", rep), graph.labels)
        options = sweep_options(cfg, graph, hp)
        for model in cfg.models:
            rows = depth_accuracy_sweep(graph, model, hp, cfg["kernel.depths"], splits, options,
                                        ridge_grid=c["ridge_grid"], workers=threads, k0=k0)
            for r in rows:
                per_repeat.append(dict(r, repeat=rep, model=model, pe_kind=pe_kind, alpha=hp.alpha))
    rep_path = os.path.join(out, "classify_repeats.csv")
    cols = ("repeat",) + SWEEP_COLUMNS[:-1] + ("ratio", "runtime_ms")
    with open(rep_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in per_repeat:
            vals = []
            for col in cols:
                v = r[col]
                if col == "runtime_ms" and not c["timings"]:
                    v = ""
                vals.append(repr(float(v)) if isinstance(v, (float, np.floating)) else v)
            w.writerow(vals)
    median_rows = []
    for model in cfg.models:
        for d in sorted(set(cfg["kernel.depths"])):
            sel = [r for r in per_repeat if r["model"] == model and r["depth"] == d]
            median_rows.append({
                "model": model, "depth": d, "pe_kind": pe_kind, "alpha": hp.alpha,
                "val_acc": float(np.median([r["val_acc"] for r in sel])),
                "test_acc": float(np.median([r["test_acc"] for r in sel])),
                "ridge": float(np.median([r["ridge"] for r in sel])),
                "runtime_ms": float(np.median([r["runtime_ms"] for r in sel])),
            })
    path = os.path.join(out, "classify.csv")
    write_sweep_table(path, median_rows, timings=c["timings"])
    return [path, rep_path]


RUNNERS = {
    "kernel-sweep": run_kernel_sweep,
    "sbm-phase": run_sbm_phase,
    "mc-validate": run_mc_validate,
    "classify": run_classify,
}


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def execute(cfg, threads=1):
    """Run the experiment, write its artifacts and ``manifest.json``; return the manifest."""
    out = cfg["experiment.output"]
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    paths = RUNNERS[cfg.kind](cfg, out, threads)
    wall = time.perf_counter() - t0
    artifacts = {os.path.relpath(p, out).replace(os.sep, "/"): sha256(p) for p in sorted(set(paths))}
    manifest = {
        "version": __version__,
        "config": os.path.abspath(cfg.path),
        "kind": cfg.kind,
        "seed": cfg["experiment.seed"],
        "threads": threads,
        "resolved": cfg.as_dict(),
        "origin": cfg.origin,
        "artifacts": artifacts,
        "wall_time_s": wall,
    }
    with open(os.path.join(out, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
