import csv

import numpy as np
import pytest
from scipy import stats

from sotaprune.bench import (
    BenchConfig,
    BudgetWindow,
    RECORD_COLUMNS,
    budget_window,
    error_curve,
    rank_sweep,
    run_benchmark,
    sample_queries,
    summarize,
    variance_export,
    write_records_csv,
    write_summary_csv,
)
from sotaprune.distributions import GammaSpec
from sotaprune.graph import Graph, dijkstra, dijkstra_rank
from sotaprune.network import StochasticGraph
from sotaprune.solver import solve_label_setting, solve_successive_approx

from helpers import generated_grid, network, point, random_grid_network, uniform


def point_grid(seed=0):
    sg = random_grid_network(6, 6, seed)
    rng = np.random.default_rng(seed)
    return StochasticGraph.from_specs(sg.graph, [point(int(x)) for x in rng.integers(1, 6, size=sg.m)])


def detour_instance():
    # s=0 -> 1 -> t=4 is safe but slow; 0 -> 2 -> 3 -> 4 is a risky detour
    return network(5, {(0, 1): point(3), (1, 4): point(4), (0, 2): uniform(1, 3),
                       (2, 3): uniform(1, 2), (3, 4): point(1), (2, 1): point(1)})


# --- windows and curves -------------------------------------------------------------

def test_budget_window():
    sg = network(2, {(0, 1): uniform(2, 6)})
    policy, _ = solve_label_setting(sg, 1, 10)
    assert budget_window(policy, 0) == BudgetWindow(2, 6)
    short, _ = solve_label_setting(sg, 1, 4)
    assert budget_window(short, 0) == BudgetWindow(2, 4)


def test_error_curve_identity_and_degenerate():
    sg = network(2, {(0, 1): uniform(2, 6)})
    policy, _ = solve_label_setting(sg, 1, 10)
    curve = error_curve(policy, policy, 0, BudgetWindow(2, 6))
    assert curve.shape == (101,) and np.all(curve == 0)
    assert error_curve(policy, policy, 0, BudgetWindow(3, 3)).shape == (1,)


def test_error_curve_without_any_path_is_full_probability():
    sg = detour_instance()
    full, _ = solve_label_setting(sg, 4, 12)
    cut, _ = solve_label_setting(sg, 4, 12, [0, 4])
    window = budget_window(full, 0)
    taus = np.rint(np.linspace(window.lo, window.hi, 101)).astype(int)
    np.testing.assert_array_equal(error_curve(full, cut, 0, window), full.prob[0, taus])


def test_error_curve_matches_oracle_differences():
    sg = detour_instance()
    T = 12
    full, _ = solve_label_setting(sg, 4, T)
    keep = np.array([True, True, False, False, True])
    pruned, _ = solve_label_setting(sg, 4, T, keep)
    window = budget_window(full, 0)
    curve = error_curve(full, pruned, 0, window)
    a = solve_successive_approx(sg, 4, T)
    b = solve_successive_approx(sg, 4, T, keep)
    taus = np.rint(np.linspace(window.lo, window.hi, 101)).astype(int)
    np.testing.assert_allclose(curve, a.prob[0, taus] - b.prob[0, taus], atol=1e-9, rtol=0)
    assert curve.max() > 0.1


def test_error_curve_flags_dominance_violation():
    sg = detour_instance()
    full, _ = solve_label_setting(sg, 4, 12)
    cut, _ = solve_label_setting(sg, 4, 12, [0, 1, 4])
    with pytest.raises(AssertionError):
        error_curve(cut, full, 0, budget_window(full, 0))


# --- benchmark runs ---------------------------------------------------------------------------

def test_full_technique_has_zero_error():
    sg = random_grid_network(5, 5, 3)
    records = run_benchmark(sg, BenchConfig(techniques=("full",), n_queries=3, seed=1))
    assert [r.technique for r in records[:3]] == ["classic", "optimal", "full"]
    assert all(np.all(r.errors == 0) for r in records if r.technique in ("full", "classic"))


def test_point_masses_give_zero_error_everywhere():
    sg = point_grid()
    records = run_benchmark(sg, BenchConfig(n_queries=4, seed=2))
    for r in records:
        assert np.all(r.errors == 0)
        assert r.budget_factors == (1.0, 1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def grid_records():
    sg = generated_grid(8, 8, paths=300, rounds=10)
    return sg, run_benchmark(sg, BenchConfig(n_queries=6, seed=5))


def test_record_invariants(grid_records):
    sg, records = grid_records
    by_query = {}
    for r in records:
        by_query.setdefault(r.query, {})[r.technique] = r
    assert len(by_query) == 6
    for rows in by_query.values():
        classic = rows["classic"]
        assert rows["optimal"].max_error <= 1e-9
        for r in rows.values():
            assert np.all(r.errors >= 0)
            assert 0 < r.pruned_nodes_pct <= 100
            assert r.convolutions <= classic.convolutions
            assert r.budget == classic.budget
        assert np.all(rows["corridor:2"].errors <= rows["corridor:1"].errors + 1e-12)
        assert np.all(rows["corridor:5"].errors <= rows["corridor:2"].errors + 1e-12)


def test_summary_is_mean_of_records(grid_records):
    _, records = grid_records
    summary = {s.technique: s for s in summarize(records)}
    rows = [r for r in records if r.technique == "penalty"]
    assert summary["penalty"].queries == len(rows)
    assert summary["penalty"].conv_ratio == pytest.approx(np.mean([r.conv_ratio for r in rows]))
    np.testing.assert_allclose(summary["penalty"].errors, np.mean([r.errors for r in rows], axis=0))
    assert summary["classic"].conv_ratio == 1.0
    worst = max(s.mean_error for k, s in summary.items() if k not in ("classic", "optimal"))
    assert max(s.error_pct_of_max for s in summary.values()) == pytest.approx(100.0 if worst else 0.0)


def test_csv_layout_and_determinism(tmp_path):
    sg = generated_grid(6, 6, paths=100, rounds=5)
    cfg = BenchConfig(techniques=("corridor:1", "penalty"), n_queries=3, seed=4)
    write_records_csv(run_benchmark(sg, cfg), tmp_path / "a.csv")
    write_records_csv(run_benchmark(sg, cfg), tmp_path / "b.csv")
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw == (tmp_path / "b.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == RECORD_COLUMNS
    assert len(rows) == 1 + 3 * 4
    assert rows[0][-1] == "e100"
    write_summary_csv(summarize(run_benchmark(sg, cfg)), tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().count("\n") == 1 + 4


def test_parallel_workers_match_serial():
    sg = generated_grid(6, 6, paths=100, rounds=5)
    serial = run_benchmark(sg, BenchConfig(techniques=("corridor:1",), n_queries=4, seed=8))
    pooled = run_benchmark(sg, BenchConfig(techniques=("corridor:1",), n_queries=4, seed=8, workers=2))
    assert [(r.query, r.technique, r.convolutions) for r in serial] == \
           [(r.query, r.technique, r.convolutions) for r in pooled]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.errors, b.errors)


def test_disconnected_pairs_are_resampled(caplog):
    g = Graph.from_arcs(4, [(0, 1), (1, 0), (2, 3), (3, 2)])
    sg = StochasticGraph.from_specs(g, [point(1)] * 4)
    with caplog.at_level("INFO"):
        pairs = sample_queries(sg, 20, seed=0)
    assert len(pairs) == 20
    assert all({s, t} in ({0, 1}, {2, 3}) for s, t in pairs)
    assert "resampling" in caplog.text


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(budget_factor=0.5)
    with pytest.raises(ValueError):
        BenchConfig(n_queries=0)


# --- rank sweep -------------------------------------------------------------------------------------

def test_rank_sweep_targets():
    sg = random_grid_network(5, 5, 1)
    records = rank_sweep(sg, [1, 6], 3, BenchConfig(techniques=("corridor:1",), seed=3))
    assert [r.rank for r in records if r.technique == "classic"] == [1, 1, 1, 6, 6, 6]
    for r in records:
        assert dijkstra_rank(sg.graph, r.s, r.t, sg.offsets) == r.rank
        if r.rank == 1:
            d = dijkstra(sg.graph, r.s, sg.offsets).dist
            d[r.s] = np.inf
            assert d[r.t] == d.min()
    again = rank_sweep(sg, [1, 6], 3, BenchConfig(techniques=("corridor:1",), seed=3))
    assert [(r.s, r.t) for r in again] == [(r.s, r.t) for r in records]
    with pytest.raises(ValueError):
        rank_sweep(sg, [25], 1)


# --- variance export ------------------------------------------------------------------------------------

def test_variance_export_points(tmp_path):
    sg = point_grid()
    variance_export(sg, tmp_path / "v.csv")
    rows = list(csv.DictReader((tmp_path / "v.csv").open()))
    assert len(rows) == sg.m
    assert all(float(r["variance"]) == 0 and r["min"] == r["max"] for r in rows)


def test_variance_export_gamma_against_quadrature(tmp_path):
    g = Graph.from_arcs(3, [(0, 1), (1, 2), (2, 0)])
    specs = [GammaSpec(4, 2, 1), GammaSpec(2, 5, 3), GammaSpec(9, 1.5, 2)]
    sg = StochasticGraph.from_specs(g, specs)
    variance_export(sg, tmp_path / "v.csv")
    rows = list(csv.DictReader((tmp_path / "v.csv").open()))
    h = 1e-3
    for row, spec in zip(rows, specs):
        x = (np.arange(int(200 / h)) + 0.5) * h
        f = stats.gamma(spec.shape, scale=spec.scale).pdf(x)
        mean = (x * f).sum() / f.sum()
        var = ((x - mean) ** 2 * f).sum() / f.sum()
        assert float(row["variance"]) == pytest.approx(var, rel=0.02)
        assert float(row["mean"]) == pytest.approx(mean + spec.shift, abs=0.1)
