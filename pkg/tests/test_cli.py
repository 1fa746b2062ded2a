import csv

import pytest

from sotaprune.cli import main
from sotaprune.graph import read_graph
from sotaprune.network import read_dist_specs
from sotaprune.pruning import read_pruneset
from sotaprune.solver import read_policy


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    g, base, dists = d / "g.txt", d / "base.txt", d / "d.txt"
    assert main(["gen-grid", "--width", "6", "--height", "5", "--freeflow", "4,12", "--seed", "1",
                 "--out", str(g), "--dists", str(base)]) == 0
    assert main(["gen-dist", "--graph", str(g), "--dists", str(base), "--preset", "graph5",
                 "--paths", "200", "--rounds", "5", "--seed", "2", "--out", str(dists)]) == 0
    return d, g, dists


def net(files):
    _, g, dists = files
    return ["--graph", str(g), "--dists", str(dists), "--dt", "5"]


def test_generated_files(files):
    _, g, dists = files
    graph = read_graph(g)
    assert graph.n == 30
    specs = read_dist_specs(graph, dists)
    assert all(4 <= s.shift <= 12 for s in specs)


def test_solve_and_policy_export(files, capsys):
    d = files[0]
    assert main(["solve", *net(files), "--source", "0", "--target", "29", "--out", str(d / "p.txt")]) == 0
    assert "arrival probability" in capsys.readouterr().out
    policy = read_policy(d / "p.txt")
    assert policy.target == 29
    assert main(["solve", *net(files), "--source", "0", "--target", "29", "--budget", "40",
                 "--technique", "corridor:1", "--fft"]) == 0


def test_prune_and_simulate(files, capsys):
    d = files[0]
    assert main(["prune", *net(files), "--source", "0", "--target", "29", "--technique", "via-mix",
                 "--stretch-eps", "0.5", "--out", str(d / "ps.txt")]) == 0
    assert 0 in read_pruneset(d / "ps.txt", 30) and 29 in read_pruneset(d / "ps.txt", 30)
    assert main(["simulate", *net(files), "--source", "0", "--target", "29", "--samples", "2000",
                 "--technique", "penalty", "--no-adjoint"]) == 0
    assert "simulated" in capsys.readouterr().out


def test_bench_is_byte_identical(files):
    d = files[0]
    args = ["bench", *net(files), "--technique", "corridor:1,penalty", "--technique", "via",
            "--queries", "3", "--seed", "7"]
    assert main([*args, "--out", str(d / "a.csv"), "--summary", str(d / "sa.csv")]) == 0
    assert main([*args, "--out", str(d / "b.csv")]) == 0
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()
    techniques = [r["technique"] for r in csv.DictReader((d / "sa.csv").open())]
    assert techniques == ["classic", "optimal", "corridor:1", "penalty", "via"]


def test_rank_sweep_and_variance(files):
    d = files[0]
    assert main(["rank-sweep", *net(files), "--ranks", "1,5", "--queries", "2", "--technique", "corridor:2",
                 "--out", str(d / "r.csv")]) == 0
    ranks = [r["rank"] for r in csv.DictReader((d / "r.csv").open()) if r["technique"] == "classic"]
    assert ranks == ["1", "1", "5", "5"]
    assert main(["variance-export", *net(files), "--out", str(d / "v.csv")]) == 0
    assert len((d / "v.csv").read_text().splitlines()) == 1 + read_graph(files[1]).m


def test_malformed_input_reports_line(files, capsys):
    d, g, _ = files
    bad = d / "bad.txt"
    bad.write_text("0 1 gamma 1 1 1\n0 1 gamma 1 1 1\n")
    assert main(["variance-export", "--graph", str(g), "--dists", str(bad), "--out", str(d / "x.csv")]) == 2
    assert "bad.txt:2" in capsys.readouterr().err


def test_unknown_technique(files, capsys):
    assert main(["prune", *net(files), "--source", "0", "--target", "29", "--technique", "ksp"]) == 2
    assert "unknown technique" in capsys.readouterr().err
