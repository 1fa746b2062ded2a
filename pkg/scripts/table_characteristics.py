#!/usr/bin/env python3
"""Per-preset characteristics of generated inputs.

For each datagen preset: share of nodes in the optimal ordering, the
classic/optimal order ratio, and the budget factors needed for 25/50/75/100%
arrival probability (blank when the budget cap is reached first).
"""
import argparse
import csv
import math

import numpy as np
from _common import add_network_args, build_network

from sotaprune.bench import BenchConfig, run_benchmark
from sotaprune.datagen import PRESETS


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    add_network_args(p)
    p.add_argument("--queries", type=int, default=30)
    p.add_argument("--out", default="characteristics.csv")
    args = p.parse_args()

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["preset", "setting", "optimal_nodes_pct", "order_ratio", "bf25", "bf50", "bf75", "bf100"])
        for name in sorted(PRESETS):
            sg = build_network(args, name)
            recs = [r for r in run_benchmark(sg, BenchConfig(techniques=(), n_queries=args.queries,
                                                             seed=args.seed)) if r.technique == "optimal"]
            nodes = np.mean([r.pruned_nodes_pct for r in recs])
            ratio = np.mean([r.classic_optimal_ratio for r in recs])
            factors = []
            for i in range(4):
                vals = [r.budget_factors[i] for r in recs]
                factors.append("" if any(math.isnan(v) for v in vals) else f"{np.mean(vals):.2f}")
            w.writerow([name, PRESETS[name].setting.value, f"{nodes:.2f}", f"{ratio:.2f}", *factors])
            print(f"{name}: nodes {nodes:.2f}%  order x{ratio:.2f}  budget factors {factors}")


if __name__ == "__main__":
    main()
