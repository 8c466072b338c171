"""``bazykin`` command line.

    bazykin turing-curve --preset fig6a --out runs/fig6a
    bazykin simulate-pde --config my.json --seed 7 --out runs/pattern
    bazykin equilibria --out runs/eq

The command may be omitted when the config or preset names it.  Exit codes:
0 ok, 2 config error, 3 numerical failure, 4 not settled or ambiguous.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import BazykinError, ConfigError, UnsettledError
from . import config as cfgmod
from .commands import HANDLERS
from .output import OutputWriter

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNSETTLED = 0, 2, 3, 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, UnsettledError):
        return EXIT_UNSETTLED
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bazykin", description="Slow-fast Bazykin predator-prey toolkit.")
    ap.add_argument("command", nargs="?", choices=cfgmod.COMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario file (JSON)")
    src.add_argument("--preset", metavar="NAME", help="bundled scenario, see --list-presets")
    ap.add_argument("--out", metavar="DIR", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, metavar="U64", help="seed for random initial conditions")
    ap.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes for sweeps")
    ap.add_argument("--list-presets", action="store_true")
    return ap


def scenario_from_args(args) -> dict:
    if args.config:
        doc = cfgmod.load(args.config)
    elif args.preset:
        doc = cfgmod.load_preset(args.preset)
    elif args.command:
        doc = cfgmod.default_scenario(args.command)
    else:
        raise ConfigError("give a command, --config or --preset", "command")
    if args.command and isinstance(doc, dict) and doc.get("command") != args.command:
        raise ConfigError(f"scenario is for {doc.get('command')!r}, not {args.command!r}", "command")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer", "--seed")
        doc["seed"] = args.seed
    if args.threads < 1:
        raise ConfigError("need at least one thread", "--threads")
    return cfgmod.resolve(doc)


def run_scenario(sc: dict, out_dir, threads: int = 1) -> tuple[int, dict]:
    """Run a resolved scenario, writing artifacts and manifest to ``out_dir``."""
    out = OutputWriter(out_dir)
    try:
        code, summary = HANDLERS[sc["command"]](sc, out, threads)
        status = "ok" if code == EXIT_OK else "not-settled"
    except BazykinError as exc:
        code, status = exit_code_for(exc), "error"
        summary = {"error": exc.kind, "message": str(exc)}
        out.manifest(sc, status, code, summary)
        raise
    out.manifest(sc, status, code, summary)
    return code, summary


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_presets:
        for name in cfgmod.preset_names():
            doc = cfgmod.load_preset(name)
            print(f"{name:10s} {doc['command']:15s} {doc.get('description', '')}")
        return EXIT_OK
    try:
        sc = scenario_from_args(args)
        code, summary = run_scenario(sc, args.out, args.threads)
    except BazykinError as exc:
        print(f"bazykin: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    print(f"{sc['command']}: wrote {args.out}/manifest.json")
    for k, v in summary.items():
        print(f"  {k}: {v}")
    return code


if __name__ == "__main__":
    sys.exit(main())
