import csv
import json
import os
import shutil

import pytest

from graphgp.cli.config import load_config
from graphgp.cli.main import main
from graphgp.exceptions import ConfigError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text.lstrip())
    return str(path)


PHASE = """
[experiment]
kind = sbm-phase
model = gcn, gat
[graph]
n = 8
[sbm]
p_grid = 0.2, 0.8
q_grid = 0.1:0.5:3
depth = 4
"""


def test_validate_lists_resolved_defaults(tmp_path, capsys):
    cfg = _write(tmp_path, "a.ini", PHASE)
    assert main(["validate", cfg]) == 0
    out = capsys.readouterr().out
    assert "hyperparams.sigma_w2 = 1.0  [default]" in out
    assert "hyperparams.sigma_b2 = 0.0  [default]" in out
    assert "experiment.seed = 0  [default]" in out
    assert "sbm.depth = 4  [config]" in out


def test_alpha_out_of_range_reports_field_path(tmp_path, capsys):
    cfg = _write(tmp_path, "a.ini", PHASE + "[hyperparams]\nalpha = 1.5\n")
    assert main(["validate", cfg]) == 2
    err = capsys.readouterr().err
    assert "hyperparams.alpha (line 11): must lie in [0, 1]" in err


def test_graphormer_without_encoding_is_cross_field_error(tmp_path, capsys):
    cfg = _write(tmp_path, "a.ini", "[experiment]\nkind = kernel-sweep\nmodel = graphormer\n")
    assert main(["validate", cfg]) == 2
    assert "cross-field" in capsys.readouterr().err


def test_unknown_keys_sections_and_bad_values(tmp_path):
    cfg = _write(tmp_path, "a.ini", "[experiment]\nkind = nope\nseeed = 3\n[extra]\nx = 1\n")
    with pytest.raises(ConfigError) as info:
        load_config(cfg)
    paths = [p for p, _ in info.value.diagnostics]
    assert any(p.startswith("experiment.kind") for p in paths)
    assert any(p.startswith("experiment.seeed") for p in paths)
    assert any(p.startswith("extra") for p in paths)


def test_missing_kind_and_missing_file(tmp_path, capsys):
    cfg = _write(tmp_path, "a.ini", "[graph]\nn = 8\n")
    assert main(["validate", cfg]) == 2
    assert "experiment.kind: required key is missing" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "none.ini")]) == 2


def test_files_source_checks_paths(tmp_path, capsys):
    cfg = _write(tmp_path, "a.ini", "[experiment]\nkind = classify\n[graph]\nsource = files\n"
                                    "edges = missing.txt\nfeatures = f.csv\n")
    assert main(["validate", cfg]) == 2
    err = capsys.readouterr().err
    assert "file not found: missing.txt" in err
    assert "graph.labels" in err


def test_sbm_phase_shape_contract(tmp_path):
    cfg = _write(tmp_path, "a.ini", PHASE)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    with open(out / "phase_diagram.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 3 * 5
    assert {r["model"] for r in rows} == {"gcn", "gat"}
    assert all(r["F"] == "" for r in rows if r["model"] == "gcn")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "phase_diagram.csv" in manifest["artifacts"]
    assert manifest["resolved"]["sbm"]["depth"] == 4
    assert manifest["wall_time_s"] >= 0


def test_mc_validate_writes_one_report_per_width(tmp_path):
    cfg = _write(tmp_path, "a.ini", """
[experiment]
kind = mc-validate
model = gat
[graph]
n = 10
p = 0.6
q = 0.2
feature_dim = 5
[sampler]
widths = 8, 32, 128, 512
samples = 100
""")
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    reports = sorted(f for f in os.listdir(out) if f.endswith("_report.txt"))
    assert reports == [f"gat_w{w}_h{w}_report.txt" for w in (128, 32, 512, 8)]
    with open(out / "mc_summary.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_rerun_gives_identical_checksums_and_seed_override(tmp_path):
    cfg = _write(tmp_path, "a.ini", """
[experiment]
kind = classify
model = gcn, gat
[graph]
n = 40
p = 0.3
q = 0.05
[kernel]
depths = 1, 3
""")
    digests = []
    for i, seed in enumerate(("5", "5", "6")):
        out = tmp_path / f"out{i}"
        assert main(["run", cfg, "--out", str(out), "--seed", seed, "--threads", str(i + 1)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == int(seed) and manifest["origin"]["experiment"]["seed"] == "override"
        digests.append(manifest["artifacts"])
    assert digests[0] == digests[1]
    assert digests[0] != digests[2]


def test_timings_are_opt_in(tmp_path):
    base = "[experiment]\nkind = classify\n[graph]\nn = 20\np = 0.5\nq = 0.05\n[kernel]\ndepths = 1\n"
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, "a.ini", base + "[classify]\ntimings = true\n"), "--out", str(out)]) == 0
    with open(out / "classify.csv", newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["runtime_ms"]) > 0


def test_toy_dataset_run(tmp_path, request):
    data = request.config.rootpath / "data" / "toy"
    for name in os.listdir(data):
        shutil.copy(data / name, tmp_path / name)
    cfg = _write(tmp_path, "a.ini", """
[experiment]
kind = classify
model = gcn
[graph]
source = files
edges = edges.txt
features = features.csv
labels = labels.txt
splits = splits.txt
[kernel]
depths = 1
[classify]
ridge_grid = 1e-2
""")
    assert main(["validate", cfg]) == 0
    assert main(["run", cfg, "--out", str(tmp_path / "out")]) == 0


def test_bad_dataset_exits_with_validation_code(tmp_path, capsys):
    (tmp_path / "e.txt").write_text("0 1\n1 9\n")
    (tmp_path / "f.csv").write_text("1,0\n0,1\n1,1\n")
    cfg = _write(tmp_path, "a.ini", "[experiment]\nkind = kernel-sweep\n[graph]\nsource = files\n"
                                    "edges = e.txt\nfeatures = f.csv\n")
    assert main(["validate", cfg]) == 2
    assert "out of range" in capsys.readouterr().err


def test_numerical_error_exit_code_and_provenance(tmp_path, capsys):
    # node 2 is isolated, so the normalised adjacency divides by a zero degree
    (tmp_path / "e.txt").write_text("0 1\n")
    (tmp_path / "f.csv").write_text("1,0\n0,1\n1,1\n")
    cfg = _write(tmp_path, "a.ini", "[experiment]\nkind = kernel-sweep\nmodel = gcn\n[graph]\nsource = files\n"
                                    "edges = e.txt\nfeatures = f.csv\n")
    assert main(["run", cfg, "--out", str(tmp_path / "out")]) == 3
    err = capsys.readouterr().err
    assert "graphgp.graph." in err and "DegenerateDegreeError" in err
