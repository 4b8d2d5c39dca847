"""Command-line experiment runner.

    sweepopt run CONFIG.json [--out DIR] [--jobs N]
    sweepopt run --preset NAME [--out DIR] [--jobs N]
    sweepopt presets

Exit codes: 0 success, 2 unreadable or malformed config, 3 schema violation,
4 runtime failure (partial results are written before exiting).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from . import config
from .runner import RunError, execute

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _preset_dir():
    return resources.files("sweepopt") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in _preset_dir().iterdir()
                  if p.name.endswith(".json"))


def preset_bytes(name: str) -> bytes:
    path = _preset_dir() / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_bytes()


def list_presets() -> list[dict]:
    out = []
    for name in preset_names():
        cfg = json.loads(preset_bytes(name))
        out.append({"name": name, "description": cfg.get("description", ""),
                    "figure": cfg.get("figure", "")})
    return out


def _build_parser():
    p = argparse.ArgumentParser(prog="sweepopt", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config or a preset")
    r.add_argument("config", nargs="?", help="path to a JSON config")
    r.add_argument("--preset", help="run a bundled preset instead of a file")
    r.add_argument("--out", help="output directory (default: $SWEEPOPT_OUT "
                                 "or ./sweepopt_out/<name>)")
    r.add_argument("--jobs", type=int, default=1, help="parallel runs")
    sub.add_parser("presets", help="list bundled presets")
    return p


def _out_dir(args, name):
    if args.out:
        return args.out
    env = os.environ.get("SWEEPOPT_OUT")
    if env:
        return os.path.join(env, name)
    return os.path.join("sweepopt_out", name)


def _cmd_run(args) -> int:
    if (args.config is None) == (args.preset is None):
        print("error: give either a config path or --preset NAME", file=sys.stderr)
        return EXIT_PARSE
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    if args.preset:
        try:
            raw = preset_bytes(args.preset)
        except KeyError as e:
            print(f"error: {e.args[0]}", file=sys.stderr)
            return EXIT_PARSE
        source, name = f"preset {args.preset}", args.preset
    else:
        try:
            with open(args.config, "rb") as fh:
                raw = fh.read()
        except OSError as e:
            print(f"error: cannot read {args.config}: {e.strerror}", file=sys.stderr)
            return EXIT_PARSE
        source = args.config
        name = os.path.splitext(os.path.basename(args.config))[0]
    try:
        text = raw.decode("utf-8")
        cfg = config.parse(text, source)
    except UnicodeDecodeError as e:
        print(f"error: {source}: not UTF-8 ({e.reason})", file=sys.stderr)
        return EXIT_PARSE
    except config.ConfigParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        config.validate(cfg, source)
    except config.ConfigValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    out = _out_dir(args, name)
    try:
        summary = execute(cfg, raw, out, args.jobs)
    except RunError as e:
        print(f"error: run failed: {e}; partial results in {out}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(summary['runs'])} run(s) to {out} "
          f"in {summary['wall_time']:.2f} s")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "presets":
        for p in list_presets():
            print(f"{p['name']:18s} {p['figure']}: {p['description']}")
        return 0
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
