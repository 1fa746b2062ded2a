#!/usr/bin/env python3
"""Mean error against the normalized budget for every pruning technique.

Writes the per-query CSV and the aggregated curves (columns e000..e100).
"""
import argparse
import logging

from _common import add_network_args, build_network

from sotaprune.bench import DEFAULT_TECHNIQUES, BenchConfig, run_benchmark, summarize, write_records_csv, \
    write_summary_csv


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    add_network_args(p)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--budget-factor", type=float, default=3.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="error_curves.csv")
    p.add_argument("--summary", default="error_curves_summary.csv")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    sg = build_network(args)
    cfg = BenchConfig(techniques=("full",) + DEFAULT_TECHNIQUES, n_queries=args.queries,
                      budget_factor=args.budget_factor, seed=args.seed, workers=args.workers)
    records = run_benchmark(sg, cfg)
    write_records_csv(records, args.out)
    summary = summarize(records)
    write_summary_csv(summary, args.summary)
    for s in summary:
        quarter = ", ".join(f"{s.errors[i]:.4f}" for i in (0, 25, 50, 75, 100))
        print(f"{s.technique:>11}: mean error at 0/25/50/75/100% = {quarter}")


if __name__ == "__main__":
    main()
