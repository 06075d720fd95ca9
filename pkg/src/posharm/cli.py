"""Command-line front end.

Exit status: 0 all checks passed, 1 an invariant check failed, 2 bad input,
3 a resource cap (ball size or exact-solve size) was hit.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from posharm.ballcache import CACHE_ENV
from posharm.experiments import (
    EXIT_BAD_INPUT,
    ConfigError,
    ExperimentConfig,
    list_presets,
    run_experiment,
    run_preset,
)

SUBCOMMANDS = {
    "ball": ("ball", "build B(a, r) and list interior and boundary vertices"),
    "exit": ("exit", "solve the exit measure of B(a, r) and check its invariants"),
    "epsilon-scan": ("epsilon-scan", "epsilon(B(a, r); a, b) over a radius range"),
    "growth": ("growth", "ball and boundary sizes with growth classification"),
    "certify": ("certify", "growth-bound certificate for given delta and r0"),
    "lemma2": ("lemma2", "randomised monotonicity suite"),
    "telescope": ("telescope", "geodesic ratio products on every boundary point"),
    "harmonic": ("harmonic", "randomised checks of the approximate harmonic functions"),
    "simulate": ("simulate", "Monte Carlo exit law against the exact solver"),
    "probe-grigorchuk": ("probe-grigorchuk", "relations, balls and epsilon scans for the Grigorchuk group"),
}


def _parse_probs(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"expected name=prob, got {part!r}")
        name, value = part.split("=", 1)
        out[name.strip()] = value.strip()
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its fields")
    p.add_argument("--group", help='group spec: "z:2", "free:2", "heis", "lamplighter", "bs:1:2", "grigorchuk"')
    p.add_argument("--probs", type=_parse_probs, help="step probabilities, e.g. a=1/2,A=1/4,b=1/8,B=1/8")
    p.add_argument("--radius-min", type=int)
    p.add_argument("--radius-max", type=int)
    p.add_argument("--mode", choices=("exact", "float", "auto"))
    p.add_argument("--a", help="base vertex (word or literal, default identity)")
    p.add_argument("--b", help="second vertex (default a times the first generator)")
    p.add_argument("--delta", help="certificate parameter in (0,1), rational")
    p.add_argument("--r0", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--size-cap", type=int, help="maximum vertices per ball (default 5000000)")
    p.add_argument("--exact-limit", type=int, help="maximum interior vertices for exact solves (default 20000)")
    p.add_argument("--name", help="output subdirectory name")
    p.add_argument("--out", help="output directory (default: results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posharm",
        description="Exit measures, discrepancies and positive harmonic functions on Cayley graphs.",
        epilog=f"Set {CACHE_ENV} to cache directed balls on disk.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("presets", help="list built-in presets")
    run = sub.add_parser("run", help="run a built-in preset")
    run.add_argument("preset")
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    for cmd, (_, help_text) in SUBCOMMANDS.items():
        _add_common(sub.add_parser(cmd, help=help_text, description=help_text))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command][0]
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data["experiment"] = kind
    if kind == "probe-grigorchuk":
        data.setdefault("group", "grigorchuk")
    cfg = ExperimentConfig.from_dict(data)
    overrides = {}
    for f in fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    return replace(cfg, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "presets":
        for name, desc in list_presets():
            print(f"{name:20s} {desc}")
        return 0
    try:
        if args.command == "run":
            status, results = run_preset(args.preset, args.out, seed=args.seed, workers=args.workers)
        else:
            cfg = config_from_args(args)
            res = run_experiment(cfg)
            status, results = res.status, [res]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    for res in results:
        flag = "ok" if res.status == 0 else f"status {res.status}"
        print(f"{res.config.label}: {flag}")
        for msg in res.failures:
            print(f"  FAIL {msg}")
    return status


if __name__ == "__main__":
    sys.exit(main())
