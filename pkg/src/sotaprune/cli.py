"""Command-line front end: ``sotaprune <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import bench, datagen
from .distributions import DEFAULT_TAIL_EPS, PmfSpec
from .graph import WeightView, dijkstra, read_graph, write_graph
from .network import DistFormatError, load_network, read_dist_specs, write_dist_specs
from .pruning import PenaltyParams, ViaParams, build, write_pruneset
from .solver import simulate_policy, solve_label_setting, write_policy

TECHNIQUES = "full|corridor:K|penalty|via|via-mix"


def _int_pair(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def _add_network(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph file")
    p.add_argument("--dists", required=True, help="arc distribution file")
    p.add_argument("--dt", type=float, default=1.0, help="seconds per grid step (default 1)")
    p.add_argument("--tail-eps", type=float, default=DEFAULT_TAIL_EPS, help="discarded tail mass per arc")


def _add_technique_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("technique parameters")
    g.add_argument("--view", choices=[v.value for v in WeightView], default="mean",
                   help="weight view for pruning searches")
    g.add_argument("--stretch-eps", type=float, default=ViaParams.stretch_eps)
    g.add_argument("--sharing-gamma", type=float, default=ViaParams.sharing_gamma)
    g.add_argument("--penalty-rounds", type=int, default=PenaltyParams.rounds)
    g.add_argument("--penalty-factor", type=float, default=PenaltyParams.penalty_factor)
    g.add_argument("--adjoint-factor", type=float, default=PenaltyParams.adjoint_factor)
    g.add_argument("--no-adjoint", action="store_true", help="do not penalise arcs leaving the path")
    g.add_argument("--stop-stretch", type=float, default=PenaltyParams.stop_stretch)


def _add_query(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    b = p.add_mutually_exclusive_group()
    b.add_argument("--budget", type=int, help="budget in grid steps")
    b.add_argument("--budget-factor", type=float, default=3.0,
                   help="budget as a multiple of the free-flow distance (default 3)")


def _params(args) -> tuple[WeightView, ViaParams, PenaltyParams]:
    via = ViaParams(args.stretch_eps, args.sharing_gamma)
    penalty = PenaltyParams(args.penalty_rounds, args.penalty_factor, not args.no_adjoint,
                            args.adjoint_factor, args.stop_stretch)
    return WeightView(args.view), via, penalty


def _network(args):
    return load_network(args.graph, args.dists, args.tail_eps, args.dt)


def _budget(sg, args) -> int:
    if args.budget is not None:
        return args.budget
    d = dijkstra(sg.graph, args.source, sg.offsets).dist[args.target]
    if not np.isfinite(d):
        raise SystemExit(f"error: target {args.target} is unreachable from {args.source}")
    return int(math.ceil(args.budget_factor * d))


def _mask(sg, args):
    if args.technique == "full":
        return None
    view, via, penalty = _params(args)
    return build(sg, args.source, args.target, args.technique, view, via, penalty)


# --- subcommands -----------------------------------------------------------

def cmd_gen_grid(args) -> int:
    g, freeflow = datagen.make_grid(args.width, args.height, args.freeflow, args.seed)
    write_graph(g, args.out)
    if args.dists:
        write_dist_specs(g, [PmfSpec(int(f), (1.0,)) for f in freeflow], args.dists)
    print(f"grid {args.width}x{args.height}: {g.n} nodes, {g.m} arcs -> {args.out}")
    return 0


def cmd_gen_dist(args) -> int:
    g = read_graph(args.graph)
    freeflow = [s.shift for s in read_dist_specs(g, args.dists)]
    overrides = {k: v for k, v in (("seed", args.seed), ("rounds", args.rounds), ("paths", args.paths),
                                   ("hotspots", args.hotspots)) if v is not None}
    if args.config:
        settings = datagen.settings_from_config(args.config, **overrides)
    elif args.preset:
        settings = datagen.preset(args.preset, **overrides)
    elif args.setting:
        settings = datagen.GenSettings(datagen.Setting(args.setting), **overrides)
    else:
        raise SystemExit("error: give one of --preset, --config or --setting")
    report = datagen.GenReport()
    specs = datagen.generate(g, freeflow, settings, report)
    if args.smooth is not None:
        specs = datagen.smooth_variance(specs, args.smooth)
    write_dist_specs(g, specs, args.out)
    skipped = sum(r.skipped for r in report.rounds)
    print(f"{settings.setting.value}: {len(report.rounds)} rounds, {skipped} unusable draws -> {args.out}")
    return 0


def cmd_solve(args) -> int:
    sg = _network(args)
    T = _budget(sg, args)
    policy, stats = solve_label_setting(sg, args.target, T, _mask(sg, args), fft=args.fft)
    p = policy.prob[args.source, T]
    print(f"budget {T}: arrival probability {p:.6f}; convolutions {stats.convolutions}, "
          f"order_len {stats.order_len}, touched {stats.touched_nodes}")
    if args.out:
        write_policy(policy, args.out)
    return 0


def cmd_prune(args) -> int:
    sg = _network(args)
    ps = _mask(sg, args)
    if ps is None:
        raise SystemExit("error: 'full' is not a pruning technique")
    print(f"{ps.technique}: {len(ps)} of {sg.n} nodes ({ps.percent_of(sg.n):.2f}%)")
    if args.out:
        write_pruneset(ps, args.out)
    return 0


def cmd_simulate(args) -> int:
    sg = _network(args)
    T = _budget(sg, args)
    policy, _ = solve_label_setting(sg, args.target, T, _mask(sg, args), fft=args.fft)
    res = simulate_policy(sg, policy, args.source, T, args.samples, args.seed)
    print(f"exact {policy.prob[args.source, T]:.6f}  simulated {res.rate:.6f} "
          f"[{res.ci_low:.6f}, {res.ci_high:.6f}] over {res.samples} samples")
    return 0


def _bench_config(args) -> bench.BenchConfig:
    view, via, penalty = _params(args)
    techniques = [t for spec in args.technique for t in spec.split(",") if t]
    return bench.BenchConfig(techniques=tuple(techniques or bench.DEFAULT_TECHNIQUES),
                             n_queries=args.queries, budget_factor=args.budget_factor,
                             seed=args.seed, view=view, via=via, penalty=penalty,
                             fft=args.fft, workers=args.workers)


def _emit(records, args) -> None:
    bench.write_records_csv(records, args.out)
    if args.summary:
        bench.write_summary_csv(bench.summarize(records), args.summary)
    print(f"{len(records)} rows -> {args.out}")


def cmd_bench(args) -> int:
    sg = _network(args)
    _emit(bench.run_benchmark(sg, _bench_config(args)), args)
    return 0


def cmd_rank_sweep(args) -> int:
    sg = _network(args)
    config = _bench_config(args)
    _emit(bench.rank_sweep(sg, args.ranks, config.n_queries, config), args)
    return 0


def cmd_variance_export(args) -> int:
    sg = _network(args)
    bench.variance_export(sg, args.out)
    print(f"{sg.m} arcs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sotaprune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-grid", help="write a bidirected grid and its free-flow point masses")
    p.add_argument("--width", type=int, default=50)
    p.add_argument("--height", type=int, default=50)
    p.add_argument("--freeflow", type=_int_pair, default=(1, 1), metavar="LO,HI",
                   help="free-flow steps drawn uniformly per arc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="graph file to write")
    p.add_argument("--dists", help="also write free-flow point masses here")
    p.set_defaults(func=cmd_gen_grid)

    p = sub.add_parser("gen-dist", help="generate gamma arc distributions")
    p.add_argument("--graph", required=True)
    p.add_argument("--dists", required=True, help="base distributions; their shifts are the free-flow times")
    p.add_argument("--preset", choices=sorted(datagen.PRESETS))
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--setting", choices=[s.value for s in datagen.Setting])
    p.add_argument("--rounds", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--hotspots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--smooth", type=float, metavar="Q", help="cap variance at this network quantile")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_dist)

    for name, func, helptext in (("solve", cmd_solve, "solve one query"),
                                 ("prune", cmd_prune, "build a pruned node set"),
                                 ("simulate", cmd_simulate, "Monte Carlo check of a solved policy")):
        p = sub.add_parser(name, help=helptext)
        _add_network(p)
        _add_query(p)
        p.add_argument("--technique", default="full" if name != "prune" else "corridor:1",
                       metavar=TECHNIQUES)
        _add_technique_params(p)
        p.add_argument("--fft", action="store_true", help="frequency-domain convolution kernel")
        if name == "simulate":
            p.add_argument("--samples", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=0)
        else:
            p.add_argument("--out")
        p.set_defaults(func=func)

    for name, func, helptext in (("bench", cmd_bench, "random query benchmark"),
                                 ("rank-sweep", cmd_rank_sweep, "benchmark by Dijkstra rank")):
        p = sub.add_parser(name, help=helptext)
        _add_network(p)
        p.add_argument("--technique", action="append", default=[], metavar=TECHNIQUES,
                       help="repeatable or comma separated (default: all pruning techniques)")
        p.add_argument("--queries", type=int, default=10, help="queries (per rank for rank-sweep)")
        p.add_argument("--budget-factor", type=float, default=3.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--fft", action="store_true")
        p.add_argument("--out", required=True, help="per-query CSV")
        p.add_argument("--summary", help="aggregated CSV")
        if name == "rank-sweep":
            p.add_argument("--ranks", type=lambda s: [int(x) for x in s.split(",")], required=True,
                           metavar="R1,R2,...")
        _add_technique_params(p)
        p.set_defaults(func=func)

    p = sub.add_parser("variance-export", help="per-arc min/mean/max/variance CSV")
    _add_network(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_variance_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DistFormatError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
