"""INI experiment configuration: schema, defaults and validation.

Every key has a typed field with a default (or is required). Validation
collects all problems as ``(path, message)`` pairs, where the path is
``section.key`` optionally suffixed with ``(line N)``.
"""

import configparser
import os
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from ..exceptions import ConfigError
from ..kernels.params import MODELS, VARIANCE_FIELDS
from ..kernels.positional import PE_KINDS, canonical_pe_kind

KINDS = ("kernel-sweep", "sbm-phase", "mc-validate", "classify")
SOURCES = ("population-sbm", "sampled-csbm", "files")
SBM_MODELS = ("gcn", "gat", "gat_exact", "graphormer", "specformer")
SAMPLER_MODELS = ("gat", "graphormer", "specformer")
_REQUIRED = object()


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("expected a nonempty comma-separated list")
        return [conv(t) for t in items]
    return parse


def _grid(text):
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return [float(v) for v in np.linspace(start, stop, count)]
    return _list(float)(text)


def _choice(options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _optional_str(text):
    t = text.strip()
    return None if t.lower() in ("", "none") else t


def _pe(text):
    t = _optional_str(text)
    return None if t is None else canonical_pe_kind(t)


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any = _REQUIRED
    check: Optional[Callable[[Any], Optional[str]]] = None
    doc: str = ""


def _min(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def _unit_interval(v):
    return None if 0.0 <= v <= 1.0 else "must lie in [0, 1]"


def _all(check):
    def inner(values):
        for v in values:
            msg = check(v)
            if msg:
                return f"every entry {msg}"
        return None
    return inner


SCHEMA = {
    "experiment": {
        "kind": Field(_choice(KINDS), doc="experiment kind"),
        "model": Field(_list(str.strip), ["gcn"], doc="model name or comma list"),
        "seed": Field(int, 0, _min(0), doc="root seed"),
        "output": Field(str.strip, "out", doc="output directory"),
    },
    "graph": {
        "source": Field(_choice(SOURCES), "sampled-csbm"),
        "n": Field(int, 40, _min(2)),
        "p": Field(float, 0.2, _unit_interval),
        "q": Field(float, 0.02, _unit_interval),
        "x0": Field(float, 1.0),
        "y0": Field(float, 0.0),
        "feature_dim": Field(int, 16, _min(1)),
        "mean_separation": Field(float, 1.5, _min(0.0)),
        "self_loops": Field(_bool, False),
        "edges": Field(_optional_str, None),
        "features": Field(_optional_str, None),
        "labels": Field(_optional_str, None),
        "splits": Field(_optional_str, None),
    },
    "hyperparams": dict(
        {name: Field(float, 0.0 if name == "sigma_b2" else 1.0, _min(0.0)) for name in VARIANCE_FIELDS},
        alpha=Field(float, 0.5, _unit_interval),
    ),
    "kernel": {
        "depth": Field(int, 8, _min(0)),
        "depths": Field(_list(int), [1, 2, 4, 8, 16, 32], _all(_min(0))),
        "activation": Field(_choice(("relu", "identity")), "relu"),
        "layernorm": Field(_bool, True),
        "order": Field(_choice(("act_ln", "ln_act")), "act_ln"),
        "pe": Field(_pe, None, doc=f"one of {', '.join(PE_KINDS)} or none"),
        "pe_rank": Field(int, 8, _min(1)),
        "relation": Field(_choice(("none", "shortest-path")), "none"),
        "max_bucket": Field(int, 4, _min(1)),
        "token_layers": Field(int, 1, _min(1)),
        "embed_dim": Field(int, 8, _min(1)),
        "epsilon": Field(float, 1.0),
        "decoder": Field(_choice(("identity", "relu")), "identity"),
        "token_convention": Field(_choice(("pairwise", "literal")), "pairwise"),
    },
    "sbm": {
        "p_grid": Field(_grid, [0.1, 0.3, 0.5, 0.7, 0.9], _all(_unit_interval)),
        "q_grid": Field(_grid, [0.1, 0.3, 0.5, 0.7, 0.9], _all(_unit_interval)),
        "depth": Field(int, 10, _min(0)),
        "tol": Field(float, 1e-3, _min(0.0)),
    },
    "sampler": {
        "widths": Field(_list(int), [8, 32, 128, 512], _all(_min(1))),
        "heads": Field(_list(int), None, _all(_min(1)), doc="defaults to widths"),
        "samples": Field(int, 2000, _min(2)),
        "attention": Field(_choice(("identity", "softmax")), "identity"),
        "score_activation": Field(_choice(("identity", "relu", "leaky_relu", "tanh")), "identity"),
        "chunk": Field(int, 64, _min(1)),
    },
    "classify": {
        "ridge_grid": Field(_list(float), [1e-6, 1e-4, 1e-2, 1.0, 10.0], _all(_min(0.0))),
        "fractions": Field(_list(float), [0.6, 0.2, 0.2]),
        "repeats": Field(int, 1, _min(1)),
        "timings": Field(_bool, False),
    },
}


@dataclass
class ExperimentConfig:
    """Resolved configuration: every key of the schema with its value and origin."""

    values: dict
    origin: dict
    path: str = ""
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def models(self):
        return self.values["experiment"]["model"]

    @property
    def kind(self):
        return self.values["experiment"]["kind"]

    def as_dict(self):
        return {s: {k: v for k, v in sec.items()} for s, sec in self.values.items()}

    def resolved_lines(self):
        """``section.key = value  [default|config|override]`` for every key."""
        out = []
        for s, sec in self.values.items():
            for k, v in sec.items():
                out.append(f"{s}.{k} = {_show(v)}  [{self.origin[s][k]}]")
        return out


def _show(v):
    if isinstance(v, list):
        return ", ".join(_show(x) for x in v)
    if v is None:
        return "none"
    return str(v).lower() if isinstance(v, bool) else str(v)


def _line_numbers(text):
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = i
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = i
    return lines


def _where(lines, section, key=None):
    path = section if key is None else f"{section}.{key}"
    ln = lines.get((section, key))
    return f"{path} (line {ln})" if ln else path


def load_config(path, overrides=None):
    """Parse and validate ``path``; raise ``ConfigError`` listing every problem.

    ``overrides`` maps ``section.key`` to already-typed values (command-line flags).
    """
    if not os.path.isfile(path):
        raise ConfigError([(str(path), "config file not found")])
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError([(str(path), str(exc).replace("\n", " "))]) from None
    lines = _line_numbers(text)
    errors = []
    values, origin = {}, {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append((_where(lines, section), f"unknown section; expected one of {', '.join(SCHEMA)}"))
    for section, fields_ in SCHEMA.items():
        values[section], origin[section] = {}, {}
        given = parser[section] if parser.has_section(section) else {}
        for key in given:
            if key not in fields_:
                errors.append((_where(lines, section, key), "unknown key"))
        for key, f in fields_.items():
            if key in given:
                try:
                    v = f.parse(given[key])
                except (ValueError, TypeError) as exc:
                    errors.append((_where(lines, section, key), str(exc)))
                    continue
                values[section][key], origin[section][key] = v, "config"
            elif f.default is _REQUIRED:
                errors.append((f"{section}.{key}", "required key is missing"))
                continue
            else:
                values[section][key], origin[section][key] = f.default, "default"
            if f.check is not None and values[section][key] is not None:
                msg = f.check(values[section][key])
                if msg:
                    errors.append((_where(lines, section, key), msg))
    for key, v in (overrides or {}).items():
        section, name = key.split(".")
        values[section][name], origin[section][name] = v, "override"
    cfg = ExperimentConfig(values, origin, str(path), lines)
    if not errors:
        errors.extend(_cross_checks(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg):
    errs = []

    def w(section, key=None):
        return _where(cfg.lines, section, key)

    kind, models = cfg.kind, cfg.models
    allowed = {"sbm-phase": SBM_MODELS, "mc-validate": SAMPLER_MODELS}.get(kind, MODELS)
    for m in models:
        if m not in allowed:
            errs.append((w("experiment", "model"), f"model {m!r} is not available for {kind}; "
                                                   f"expected one of {', '.join(allowed)}"))
    g, k, hp = cfg.values["graph"], cfg.values["kernel"], cfg.values["hyperparams"]
    if g["source"] in ("population-sbm", "sampled-csbm") or kind == "sbm-phase":
        if g["n"] % 2:
            errs.append((w("graph", "n"), "two equal communities need an even node count"))
    if g["source"] == "population-sbm" and not g["x0"] >= abs(g["y0"]):
        errs.append((w("graph", "x0"), "need x0 >= |y0| for a PSD input kernel"))
    if g["source"] == "files" and kind != "sbm-phase":
        needed = ["edges", "features"] + (["labels"] if kind == "classify" else [])
        base = os.path.dirname(os.path.abspath(cfg.path))
        for key in dict.fromkeys(needed + ["labels", "splits"]):
            v = g[key]
            if v is None:
                if key in needed:
                    errs.append((w("graph", key), f"graph source 'files' needs graph.{key}"))
                continue
            full = v if os.path.isabs(v) else os.path.join(base, v)
            if not os.path.isfile(full):
                errs.append((w("graph", key), f"file not found: {v}"))
            else:
                g[key] = full
    if kind == "mc-validate" and g["source"] == "population-sbm":
        errs.append((w("graph", "source"), "mc-validate samples networks on node features; "
                                           "population-sbm has none"))
    smp = cfg.values["sampler"]
    if kind == "mc-validate" and smp["attention"] == "softmax" and set(models) - {"gat"}:
        errs.append((w("sampler", "attention"), "softmax attention has a reference kernel only for gat"))
    uses_graphormer = "graphormer" in models and kind != "sbm-phase"
    if uses_graphormer and k["pe"] is None and k["relation"] == "none":
        errs.append((w("kernel"), "graphormer needs kernel.pe or kernel.relation (cross-field)"))
    if "graphormer" in models and hp["sigma_b2"] > 0 and k["relation"] == "none" and kind != "sbm-phase":
        errs.append((w("hyperparams", "sigma_b2"), "sigma_b2 > 0 needs kernel.relation (cross-field)"))
    if k["pe"] in ("laplacian", "spectral") and g["source"] != "files" and k["pe_rank"] > g["n"]:
        errs.append((w("kernel", "pe_rank"), f"pe_rank must be <= graph.n = {g['n']}"))
    heads = cfg.values["sampler"]["heads"]
    if heads is not None and len(heads) != len(cfg.values["sampler"]["widths"]):
        errs.append((w("sampler", "heads"), "needs one entry per width"))
    fr = cfg.values["classify"]["fractions"]
    if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9 or fr[0] == 0:
        errs.append((w("classify", "fractions"), "needs three nonnegative fractions summing to 1, train > 0"))
    return errs
