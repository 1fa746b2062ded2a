#!/usr/bin/env python3
"""Mean error per technique grouped by Dijkstra rank of the target."""
import argparse

from _common import add_network_args, build_network

from sotaprune.bench import BenchConfig, rank_sweep, summarize, write_records_csv, write_summary_csv


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    add_network_args(p)
    p.add_argument("--ranks", default="8,32,128,512,2048")
    p.add_argument("--queries", type=int, default=10, help="queries per rank")
    p.add_argument("--out", default="rank_sweep.csv")
    p.add_argument("--summary", default="rank_sweep_summary.csv")
    args = p.parse_args()

    sg = build_network(args)
    ranks = [int(r) for r in args.ranks.split(",")]
    records = rank_sweep(sg, ranks, args.queries, BenchConfig(seed=args.seed))
    write_records_csv(records, args.out)
    summary = summarize(records)
    write_summary_csv(summary, args.summary)
    for rank in ranks:
        rows = sorted((s for s in summary if s.rank == rank and s.technique not in ("classic", "optimal")),
                      key=lambda s: s.mean_error)
        print(f"rank {rank:>5}: " + "  ".join(f"{s.technique} {s.mean_error:.4f}" for s in rows))


if __name__ == "__main__":
    main()
