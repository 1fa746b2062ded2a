"""Shared setup for the experiment scripts: a generated grid network."""
from __future__ import annotations

import argparse

from sotaprune.datagen import PRESETS, generate, make_grid, preset
from sotaprune.network import StochasticGraph


def add_network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=50)
    p.add_argument("--height", type=int, default=50)
    p.add_argument("--freeflow", default="4,12", help="LO,HI free-flow steps per arc")
    p.add_argument("--preset", default="graph5", choices=sorted(PRESETS))
    p.add_argument("--dt", type=float, default=5.0, help="seconds per grid step")
    p.add_argument("--seed", type=int, default=3)


def build_network(args, preset_name: str | None = None) -> StochasticGraph:
    lo, hi = (int(x) for x in args.freeflow.split(","))
    g, ff = make_grid(args.width, args.height, (lo, hi), args.seed)
    specs = generate(g, ff, preset(preset_name or args.preset, seed=args.seed))
    return StochasticGraph.from_specs(g, specs, dt=args.dt)
