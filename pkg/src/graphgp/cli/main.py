"""``graphgp run|validate <config>``.

Exit codes: 0 success, 2 configuration or input-data errors, 3 numerical
errors raised while computing.
"""

import argparse
import sys
import traceback

from ..exceptions import ConfigError, DatasetParseError, GraphGPError, InvalidParameterError
from .config import load_config
from .runner import build_graph, execute

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="graphgp", description="Graph Gaussian-process kernel experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run an experiment"), ("validate", "check a config without running it")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="INI experiment configuration")
        s.add_argument("--out", help="output directory (overrides experiment.output)")
        s.add_argument("--seed", type=int, help="root seed, u64 (overrides experiment.seed)")
        s.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    return p


def _overrides(args):
    out = {}
    if args.out is not None:
        out["experiment.output"] = args.out
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError([("--seed", "must be an unsigned 64-bit integer")])
        out["experiment.seed"] = args.seed
    if args.threads < 1:
        raise ConfigError([("--threads", "must be >= 1")])
    return out


def _provenance(exc):
    """``module.function`` of the innermost library frame that raised ``exc``."""
    where = "graphgp"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("graphgp") and not mod.startswith("graphgp.cli"):
            where = f"{mod}.{frame.f_code.co_name}"
    return where


def _report_config_error(exc):
    for path, msg in exc.diagnostics:
        print(f"error: {path}: {msg}", file=sys.stderr)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "validate":
            # reading input files is part of validation; nothing is computed
            if cfg["graph.source"] == "files" and cfg.kind != "sbm-phase":
                build_graph(cfg)
            for line in cfg.resolved_lines():
                print(line)
            print(f"ok: {args.config}")
            return EXIT_OK
        manifest = execute(cfg, threads=args.threads)
    except ConfigError as exc:
        _report_config_error(exc)
        return EXIT_CONFIG
    except DatasetParseError as exc:
        print(f"error: input data: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameterError as exc:
        print(f"error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphGPError as exc:
        print(f"error [{_provenance(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, digest in manifest["artifacts"].items():
        print(f"{digest}  {name}")
    print(f"wrote {len(manifest['artifacts'])} artifact(s) to {cfg['experiment.output']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
