"""Benchmark harness: query batches, error curves, order ratios and CSV output.

Every query solves the full graph first (the classic ordering), then the
a-posteriori optimal ordering, then one masked solve per pruning technique.
Rows are produced in query order, so a fixed seed gives a byte-identical CSV.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import WeightView, dijkstra, node_of_rank
from .network import StochasticGraph
from .pruning import PenaltyParams, ViaParams, build
from .solver import (
    CERTAIN,
    InsufficientBudget,
    Policy,
    SolveStats,
    budget_for_probability,
    extract_optimal_order,
    rerun_on_order,
    solve_label_setting,
)

log = logging.getLogger(__name__)

DEFAULT_TECHNIQUES = ("corridor:1", "corridor:2", "corridor:5", "penalty", "via", "via-mix")
ARRIVAL_LEVELS = (0.25, 0.50, 0.75, 1.00)
CURVE_SAMPLES = 101
DOMINANCE_TOL = 1e-9
RELEVANT_PROB = 0.001


@dataclass
class BenchConfig:
    techniques: tuple[str, ...] = DEFAULT_TECHNIQUES
    n_queries: int = 10
    budget_factor: float = 3.0
    seed: int = 0
    view: WeightView = WeightView.MEAN
    via: ViaParams = field(default_factory=ViaParams)
    penalty: PenaltyParams = field(default_factory=PenaltyParams)
    fft: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.budget_factor < 1:
            raise ValueError("budget factor must be at least 1")
        if self.n_queries < 1:
            raise ValueError("need at least one query")
        self.techniques = tuple(self.techniques)
        self.view = WeightView(self.view)


@dataclass(frozen=True)
class BudgetWindow:
    lo: int
    hi: int


def budget_window(policy: Policy, s: int) -> BudgetWindow:
    """First relevant budget and first certain arrival on the full graph."""
    p = policy.prob[s]
    hi_hits = np.flatnonzero(p >= CERTAIN)
    hi = int(hi_hits[0]) if hi_hits.size else policy.budget
    lo_hits = np.flatnonzero(p > RELEVANT_PROB)
    lo = int(lo_hits[0]) if lo_hits.size else hi
    return BudgetWindow(min(lo, hi), hi)


def error_curve(full: Policy, pruned: Policy, s: int, window: BudgetWindow,
                samples: int = CURVE_SAMPLES) -> np.ndarray:
    """Probability lost by pruning at evenly spaced budgets across the window.

    Budgets are rounded to the nearest grid step.  A degenerate window yields
    a single sample.  Negative differences beyond the tolerance mean the
    pruned policy beat the full one, which is impossible, so they raise.
    """
    if window.lo == window.hi:
        taus = np.array([window.lo])
    else:
        taus = np.rint(np.linspace(window.lo, window.hi, samples)).astype(np.int64)
    if taus[-1] > min(full.budget, pruned.budget):
        raise ValueError("window exceeds the solved budget")
    delta = full.prob[s, taus] - pruned.prob[s, taus]
    if delta.min() < -DOMINANCE_TOL:
        raise AssertionError(f"pruned policy exceeds the full one by {-delta.min():.3g}")
    return np.maximum(delta, 0.0)


@dataclass
class BenchRecord:
    query: int
    s: int
    t: int
    budget: int
    technique: str
    params: str
    nodes: int
    pruned_nodes_pct: float
    convolutions: int
    order_len: int
    conv_ratio: float         # vs classic
    order_ratio: float        # pruned / classic
    classic_optimal_ratio: float
    tau_lo: int
    tau_hi: int
    max_error: float
    mean_error: float
    budget_factors: tuple[float, ...]
    errors: np.ndarray        # error at each normalized budget sample
    rank: int | None = None


def _params_text(params: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in sorted(params.items()))


def _budget_factors(policy: Policy, s: int, ref: float) -> tuple[float, ...]:
    out = []
    for p in ARRIVAL_LEVELS:
        try:
            out.append(budget_for_probability(policy, s, p, freeflow=ref))
        except InsufficientBudget:
            out.append(math.nan)
    return tuple(out)


def _record(query, s, t, name, params, nodes, n, stats: SolveStats, classic: SolveStats,
            optimal: SolveStats, full: Policy, policy: Policy, window, ref, rank) -> BenchRecord:
    errors = error_curve(full, policy, s, window)
    return BenchRecord(
        query=query, s=s, t=t, budget=full.budget, technique=name, params=_params_text(params),
        nodes=int(nodes), pruned_nodes_pct=100.0 * nodes / n,
        convolutions=stats.convolutions, order_len=stats.order_len,
        conv_ratio=stats.convolutions / classic.convolutions,
        order_ratio=stats.order_len / classic.order_len,
        classic_optimal_ratio=classic.order_len / optimal.order_len,
        tau_lo=window.lo, tau_hi=window.hi,
        max_error=float(errors.max()), mean_error=float(errors.mean()),
        budget_factors=_budget_factors(policy, s, ref), errors=errors, rank=rank)


def run_query(sg: StochasticGraph, query: int, s: int, t: int, config: BenchConfig,
              rank: int | None = None) -> list[BenchRecord]:
    """All rows for one (s, t): classic, optimal, then each technique."""
    ref = float(dijkstra(sg.graph, s, sg.offsets).dist[t])
    T = int(math.ceil(config.budget_factor * ref))
    full, classic = solve_label_setting(sg, t, T, stop_source=s, fft=config.fft)
    T = full.budget
    window = budget_window(full, s)

    order = extract_optimal_order(sg, full, s)
    opt_policy, optimal = rerun_on_order(sg, t, T, order, fft=config.fft)

    rows = [
        _record(query, s, t, "classic", {}, sg.n, sg.n, classic, classic, optimal,
                full, full, window, ref, rank),
        _record(query, s, t, "optimal", order.params, len(order), sg.n, optimal, classic, optimal,
                full, opt_policy, window, ref, rank),
    ]
    for name in config.techniques:
        if name == "full":
            policy, stats, ps_len, params = full, classic, sg.n, {}
        else:
            ps = build(sg, s, t, name, config.view, config.via, config.penalty)
            policy, stats = rerun_on_order(sg, t, T, ps, fft=config.fft)
            ps_len, params = len(ps), ps.params
        rows.append(_record(query, s, t, name, params, ps_len, sg.n, stats, classic, optimal,
                            full, policy, window, ref, rank))
    return rows


def sample_queries(sg: StochasticGraph, n_queries: int, seed: int) -> list[tuple[int, int]]:
    """Uniform random (s, t) pairs, resampling pairs with no s-t path."""
    rng = np.random.default_rng(seed)
    out = []
    trees: dict[int, np.ndarray] = {}
    while len(out) < n_queries:
        s, t = (int(x) for x in rng.integers(sg.n, size=2))
        if s == t:
            continue
        if s not in trees:
            trees[s] = dijkstra(sg.graph, s, sg.offsets).dist
        if not np.isfinite(trees[s][t]):
            log.info("resampling disconnected pair %d -> %d", s, t)
            continue
        out.append((s, t))
    return out


def sample_rank_queries(sg: StochasticGraph, rank: int, n_queries: int,
                        rng: np.random.Generator, max_tries: int = 10_000) -> list[tuple[int, int]]:
    if not 1 <= rank < sg.n:
        raise ValueError(f"rank {rank} outside 1..{sg.n - 1}")
    out = []
    for _ in range(max_tries):
        if len(out) == n_queries:
            return out
        s = int(rng.integers(sg.n))
        t = node_of_rank(sg.graph, s, rank, sg.offsets)
        if t is None:
            log.info("rank %d unreachable from %d, resampling", rank, s)
            continue
        out.append((s, t))
    raise RuntimeError(f"could not find {n_queries} sources with a node of rank {rank}")


_WORKER_SG: StochasticGraph | None = None


def _init_worker(sg):
    global _WORKER_SG
    _WORKER_SG = sg


def _worker(job):
    return run_query(_WORKER_SG, *job)


def _run_jobs(sg, jobs, workers: int) -> list[BenchRecord]:
    if workers <= 1:
        results = [run_query(sg, *job) for job in jobs]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(sg,)) as pool:
            # map keeps submission order, so rows stay in query order
            results = list(pool.map(_worker, jobs))
    return [row for rows in results for row in rows]


def run_benchmark(sg: StochasticGraph, config: BenchConfig | None = None) -> list[BenchRecord]:
    config = config or BenchConfig()
    jobs = [(q, s, t, config) for q, (s, t) in enumerate(sample_queries(sg, config.n_queries, config.seed))]
    return _run_jobs(sg, jobs, config.workers)


def rank_sweep(sg: StochasticGraph, ranks: Sequence[int], queries_per_rank: int,
               config: BenchConfig | None = None) -> list[BenchRecord]:
    """Benchmark rows with targets chosen by Dijkstra rank from random sources."""
    config = config or BenchConfig()
    rng = np.random.default_rng(config.seed)
    jobs = []
    for rank in ranks:
        for s, t in sample_rank_queries(sg, rank, queries_per_rank, rng):
            jobs.append((len(jobs), s, t, config, rank))
    return _run_jobs(sg, jobs, config.workers)


# --- aggregation -----------------------------------------------------------

@dataclass
class TechniqueSummary:
    technique: str
    queries: int
    pruned_nodes_pct: float
    conv_ratio: float
    order_ratio: float
    classic_optimal_ratio: float
    mean_error: float
    max_error: float
    error_pct_of_max: float
    budget_factors: tuple[float, ...]
    errors: np.ndarray
    rank: int | None = None


def _nanmean(values) -> float:
    arr = np.asarray(values, dtype=float)
    ok = ~np.isnan(arr)
    return float(arr[ok].mean()) if ok.any() else math.nan


def summarize(records: Sequence[BenchRecord]) -> list[TechniqueSummary]:
    """Per technique (and rank, if present) means over queries.

    Error curves are averaged on the normalized budget axis; single-sample
    curves from degenerate windows are spread over all samples.
    ``error_pct_of_max`` scales each technique's mean error by the largest
    mean error among the pruning techniques.
    """
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.rank, r.technique), []).append(r)
    out = []
    for (rank, name), rows in groups.items():
        curves = np.stack([np.broadcast_to(r.errors, (CURVE_SAMPLES,)) for r in rows])
        out.append(TechniqueSummary(
            technique=name, queries=len(rows),
            pruned_nodes_pct=float(np.mean([r.pruned_nodes_pct for r in rows])),
            conv_ratio=float(np.mean([r.conv_ratio for r in rows])),
            order_ratio=float(np.mean([r.order_ratio for r in rows])),
            classic_optimal_ratio=float(np.mean([r.classic_optimal_ratio for r in rows])),
            mean_error=float(np.mean([r.mean_error for r in rows])),
            max_error=float(np.max([r.max_error for r in rows])),
            error_pct_of_max=math.nan,
            budget_factors=tuple(_nanmean([r.budget_factors[i] for r in rows])
                                 for i in range(len(ARRIVAL_LEVELS))),
            errors=curves.mean(axis=0), rank=rank))
    for rank in {s.rank for s in out}:
        same = [s for s in out if s.rank == rank]
        worst = max((s.mean_error for s in same if s.technique not in ("classic", "optimal", "full")),
                    default=0.0)
        for s in same:
            s.error_pct_of_max = 100.0 * s.mean_error / worst if worst > 0 else 0.0
    return out


# --- CSV -------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else f"{float(x):.10g}"
    return str(x)


def _level_names(prefix: str) -> list[str]:
    return [f"{prefix}{int(round(100 * p))}" for p in ARRIVAL_LEVELS]


def _curve_names() -> list[str]:
    return [f"e{i:03d}" for i in range(CURVE_SAMPLES)]


RECORD_COLUMNS = (["query", "rank", "s", "t", "budget", "technique", "params", "nodes", "pruned_nodes_pct",
                   "convolutions", "order_len", "conv_ratio", "order_ratio", "classic_optimal_ratio",
                   "tau_lo", "tau_hi", "max_error", "mean_error"] + _level_names("bf") + _curve_names())

SUMMARY_COLUMNS = (["rank", "technique", "queries", "pruned_nodes_pct", "conv_ratio", "order_ratio",
                    "classic_optimal_ratio", "mean_error", "max_error", "error_pct_of_max"]
                   + _level_names("bf") + _curve_names())


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def record_row(r: BenchRecord) -> list[str]:
    curve = np.broadcast_to(r.errors, (CURVE_SAMPLES,))
    vals = [r.query, r.rank, r.s, r.t, r.budget, r.technique, r.params, r.nodes, r.pruned_nodes_pct,
            r.convolutions, r.order_len, r.conv_ratio, r.order_ratio, r.classic_optimal_ratio,
            r.tau_lo, r.tau_hi, r.max_error, r.mean_error, *r.budget_factors, *curve]
    return [_fmt(v) for v in vals]


def summary_row(s: TechniqueSummary) -> list[str]:
    vals = [s.rank, s.technique, s.queries, s.pruned_nodes_pct, s.conv_ratio, s.order_ratio,
            s.classic_optimal_ratio, s.mean_error, s.max_error, s.error_pct_of_max,
            *s.budget_factors, *s.errors]
    return [_fmt(v) for v in vals]


def write_records_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(RECORD_COLUMNS)
        w.writerows(record_row(r) for r in records)


def write_summary_csv(summaries: Sequence[TechniqueSummary], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(summary_row(s) for s in summaries)


VARIANCE_COLUMNS = ["from", "to", "min", "mean", "max", "variance"]


def variance_rows(sg: StochasticGraph) -> list[list[str]]:
    g = sg.graph
    return [[_fmt(int(g.src[a])), _fmt(int(g.dst[a])), _fmt(int(sg.offsets[a])), _fmt(sg.means[a]),
             _fmt(int(sg.maxes[a])), _fmt(sg.variances[a])] for a in range(sg.m)]


def variance_export(sg: StochasticGraph, path: str | Path) -> None:
    """Per-arc scalar views in grid steps, one row per arc."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(VARIANCE_COLUMNS)
        w.writerows(variance_rows(sg))
