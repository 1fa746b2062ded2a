#!/usr/bin/env python3
"""Convolutions kept versus error, across technique parameter sweeps.

One summary row per configuration: convolutions as a percentage of the
classic run and the mean error as a percentage of the worst configuration.
"""
import argparse
import csv

import numpy as np
from _common import add_network_args, build_network

from sotaprune.bench import BenchConfig, run_benchmark
from sotaprune.pruning import PenaltyParams, ViaParams


def configurations():
    for k in (0, 1, 2, 3, 5, 8):
        yield f"corridor:{k}", BenchConfig(techniques=(f"corridor:{k}",))
    for rounds in (2, 5, 10, 20):
        yield f"penalty rounds={rounds}", BenchConfig(techniques=("penalty",), penalty=PenaltyParams(rounds=rounds))
    for eps in (0.1, 0.25, 0.5):
        for name in ("via", "via-mix"):
            yield f"{name} eps={eps}", BenchConfig(techniques=(name,), via=ViaParams(stretch_eps=eps))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    add_network_args(p)
    p.add_argument("--queries", type=int, default=30)
    p.add_argument("--out", default="tradeoff.csv")
    args = p.parse_args()

    sg = build_network(args)
    rows = []
    for label, cfg in configurations():
        cfg.n_queries, cfg.seed = args.queries, args.seed
        recs = [r for r in run_benchmark(sg, cfg) if r.technique not in ("classic", "optimal")]
        rows.append((label, 100 * np.mean([r.conv_ratio for r in recs]), np.mean([r.mean_error for r in recs])))
    worst = max(err for _, _, err in rows) or 1.0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config", "conv_pct", "mean_error", "error_pct_of_max"])
        for label, conv, err in rows:
            w.writerow([label, f"{conv:.4f}", f"{err:.6g}", f"{100 * err / worst:.4f}"])
            print(f"{label:>22}: {conv:6.2f}% convolutions, error {100 * err / worst:6.2f}% of max")


if __name__ == "__main__":
    main()
