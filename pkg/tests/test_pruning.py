import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sotaprune.graph import Graph, WeightView, masked_distances, path_length, shortest_path
from sotaprune.network import StochasticGraph
from sotaprune.pruning import (
    PenaltyParams,
    ViaParams,
    build,
    corridor,
    penalty_alternative_graph,
    prune_dead_ends,
    read_pruneset,
    via_alternative_graph,
    write_pruneset,
)

from helpers import network, point, random_grid_network, simple_paths

seeds = st.integers(0, 2**32 - 1)
TECHNIQUES = ["corridor:0", "corridor:1", "corridor:3", "penalty", "via", "via-mix"]


def det_network(g: Graph, w) -> StochasticGraph:
    return StochasticGraph.from_specs(g, [point(int(x)) for x in w])


def small_grid(seed, w=3, h=3, max_w=3):
    sg = random_grid_network(w, h, 0)
    rng = np.random.default_rng(seed)
    return det_network(sg.graph, rng.integers(1, max_w + 1, size=sg.graph.m))


# --- brute-force oracles -----------------------------------------------------------

def lexmin_shortest(g, w, u, v, reverse=False):
    """Shortest u-v path; ties broken lexicographically (on the reversed list if asked)."""
    paths = simple_paths(g, u, v)
    if not paths:
        return None
    best = min(path_length(g, p, w) for p in paths)
    tight = [p for p in paths if path_length(g, p, w) == best]
    key = (lambda p: p[::-1]) if reverse else (lambda p: p)
    return min(tight, key=key)


def on_some_path(g, nodes, s, t):
    """Nodes reachable from s and reaching t inside the induced subgraph (plain BFS)."""
    arcs = [(a, b) for a, b in g.arcs() if a in nodes and b in nodes]

    def reach(root, edges):
        seen, todo = {root}, [root]
        while todo:
            u = todo.pop()
            for a, b in edges:
                if a == u and b not in seen:
                    seen.add(b)
                    todo.append(b)
        return seen

    return reach(s, arcs) & reach(t, [(b, a) for a, b in arcs])


def corridor_oracle(g, w, s, t, k):
    level = set(lexmin_shortest(g, w, s, t))
    for _ in range(k):
        nxt = set(level)
        for u in level:
            if u == t:
                continue
            for a in g.out_arc_ids(u):
                p = lexmin_shortest(g, w, int(g.dst[a]), t)
                if p is not None:
                    nxt.update(p)
        level = nxt
    return on_some_path(g, level, s, t)


def via_oracle(g, w, s, t, eps, gamma):
    sp = lexmin_shortest(g, w, s, t, reverse=True)
    d = path_length(g, sp, w)
    sp_arcs = set(zip(sp, sp[1:]))
    out = set(sp)
    for v in range(g.n):
        first = lexmin_shortest(g, w, s, v, reverse=True) if v != s else [s]
        second = lexmin_shortest(g, w, v, t) if v != t else [t]
        if first is None or second is None:
            continue
        route = first + second[1:]
        length = path_length(g, route, w)
        shared = sum(w[g.arc_id(a, b)] for a, b in zip(route, route[1:]) if (a, b) in sp_arcs)
        if length <= (1 + eps) * d and shared <= gamma * d:
            out.update(route)
    return on_some_path(g, out, s, t)


# --- corridor ------------------------------------------------------------------------

def test_corridor_three_by_three_unit():
    sg = det_network(random_grid_network(3, 3, 0).graph, np.ones(24, dtype=int))
    assert corridor(sg, 0, 8, 0).node_ids() == [0, 1, 2, 5, 8]
    assert corridor(sg, 0, 8, 1).node_ids() == [0, 1, 2, 3, 4, 5, 8]
    assert set(corridor(sg, 0, 8, 1).node_ids()) == corridor_oracle(sg.graph, sg.offsets, 0, 8, 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(0, 3), st.data())
def test_corridor_matches_recursion_oracle(seed, k, data):
    sg = small_grid(seed)
    s = data.draw(st.integers(0, 8))
    t = data.draw(st.integers(0, 8).filter(lambda x: x != s))
    got = set(corridor(sg, s, t, k, WeightView.FREE_FLOW).node_ids())
    assert got == corridor_oracle(sg.graph, sg.offsets, s, t, k)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_corridor_nesting(seed):
    sg = random_grid_network(7, 7, seed)
    rng = np.random.default_rng(seed)
    s, t = (int(x) for x in rng.choice(sg.n, size=2, replace=False))
    prev = None
    for k in range(5):
        cur = corridor(sg, s, t, k).nodes
        if prev is not None:
            assert np.all(cur >= prev)
        prev = cur


def test_corridor_rejects():
    sg = network(3, {(0, 1): point(1), (1, 2): point(1)})
    with pytest.raises(ValueError):
        corridor(sg, 2, 0, 1)
    with pytest.raises(ValueError):
        corridor(sg, 0, 2, -1)


# --- via ---------------------------------------------------------------------------------

def diamond(long=1):
    # a=0, b=1, c=2, d=3
    return network(4, {(0, 1): point(1), (1, 3): point(1), (0, 2): point(1), (2, 3): point(long)})


def test_via_diamond_keeps_both_routes():
    ps = via_alternative_graph(diamond(), 0, 3, ViaParams(0.25, 0.8))
    assert ps.node_ids() == [0, 1, 2, 3]


def test_via_zero_stretch_unique_path():
    ps = via_alternative_graph(diamond(2), 0, 3, ViaParams(0.0, 0.8))
    assert ps.node_ids() == [0, 1, 3]


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.25, 0.6]), st.sampled_from([0.3, 0.8, 1.0]), st.data())
def test_via_matches_enumeration_oracle(seed, eps, gamma, data):
    sg = small_grid(seed)
    s = data.draw(st.integers(0, 8))
    t = data.draw(st.integers(0, 8).filter(lambda x: x != s))
    ps = via_alternative_graph(sg, s, t, ViaParams(eps, gamma, (WeightView.FREE_FLOW,)))
    assert set(ps.node_ids()) == via_oracle(sg.graph, sg.offsets, s, t, eps, gamma)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_via_mix_contains_single_views(seed):
    sg = random_grid_network(6, 6, seed)
    rng = np.random.default_rng(seed)
    s, t = (int(x) for x in rng.choice(sg.n, size=2, replace=False))
    mix = build(sg, s, t, "via-mix").nodes
    for view in WeightView:
        single = via_alternative_graph(sg, s, t, ViaParams(views=(view,))).nodes
        assert np.all(mix >= single)


def test_via_params_validated():
    with pytest.raises(ValueError):
        ViaParams(-0.1)
    with pytest.raises(ValueError):
        ViaParams(0.2, 0.0)


# --- penalty -------------------------------------------------------------------------------

def test_penalty_diamond_trace():
    sg = diamond(2)
    trace = []
    ps = penalty_alternative_graph(sg, 0, 3, PenaltyParams(4, 2.0, adjoint=False, stop_stretch=0.6),
                                   trace=trace)
    # weights: short route 1+1 -> 2+2 -> 4+4, long route 1+2 -> 2+4
    assert [(p, n) for p, n, _ in trace] == [([0, 1, 3], 2), ([0, 2, 3], 3), ([0, 1, 3], 2), ([0, 2, 3], 3)]
    assert all(kept for _, _, kept in trace)
    assert ps.node_ids() == [0, 1, 2, 3]


def test_penalty_stops_on_long_detour():
    sg = network(4, {(0, 1): point(1), (1, 3): point(1), (0, 2): point(3), (2, 3): point(3)})
    trace = []
    ps = penalty_alternative_graph(sg, 0, 3, PenaltyParams(5, 2.0, adjoint=False, stop_stretch=0.6),
                                   trace=trace)
    # after one penalty the short route costs 4 < 6; after two it costs 8 > 6 and the
    # long route (original length 6 > 3.2) ends the loop
    assert [(p, n, k) for p, n, k in trace] == [([0, 1, 3], 2, True), ([0, 1, 3], 2, True),
                                               ([0, 2, 3], 6, False)]
    assert ps.node_ids() == [0, 1, 3]


def test_penalty_adjoint_weights_round_up():
    # the adjoint factor 1.1 lifts arc 0->2 from 1 to ceil(1.1) = 2 after round one
    sg = diamond(1)
    trace = []
    penalty_alternative_graph(sg, 0, 3, PenaltyParams(2, 1.4, adjoint=True, adjoint_factor=1.1),
                              trace=trace)
    # round two: short route 2+2, long route 2+1
    assert [p for p, _, _ in trace] == [[0, 1, 3], [0, 2, 3]]


def test_penalty_one_round_is_shortest_path():
    sg = random_grid_network(6, 6, 4)
    ps = penalty_alternative_graph(sg, 0, 35, PenaltyParams(rounds=1))
    nodes, _ = shortest_path(sg.graph, 0, 35, sg.weights(WeightView.MEAN))
    assert ps.node_ids() == sorted(nodes)


def test_penalty_params_validated():
    with pytest.raises(ValueError):
        PenaltyParams(rounds=0)
    with pytest.raises(ValueError):
        PenaltyParams(penalty_factor=1.0)


# --- shared properties -----------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(TECHNIQUES))
def test_prune_sets_are_connected_and_contain_shortest_path(seed, technique):
    sg = random_grid_network(6, 6, seed)
    rng = np.random.default_rng(seed)
    s, t = (int(x) for x in rng.choice(sg.n, size=2, replace=False))
    ps = build(sg, s, t, technique)
    assert s in ps and t in ps
    assert np.array_equal(prune_dead_ends(sg.graph, ps.nodes, s, t), ps.nodes)
    # some shortest path under the mean view survives inside the induced subgraph
    w = sg.weights(WeightView.MEAN)
    inside = masked_distances(sg.graph, w, s, ps.arc_mask(sg.graph))[t]
    assert inside == masked_distances(sg.graph, w, s)[t]
    again = build(sg, s, t, technique)
    assert np.array_equal(again.nodes, ps.nodes)


def test_dead_end_pruning():
    g = Graph.from_arcs(5, [(0, 1), (1, 2), (1, 3), (4, 1)])
    nodes = np.ones(5, dtype=bool)
    assert np.flatnonzero(prune_dead_ends(g, nodes, 0, 2)).tolist() == [0, 1, 2]


def test_build_dispatch():
    sg = diamond()
    assert len(build(sg, 0, 3, "full")) == 4
    with pytest.raises(ValueError, match="unknown technique"):
        build(sg, 0, 3, "ksp")


def test_pruneset_file_roundtrip(tmp_path):
    sg = random_grid_network(5, 5, 1)
    ps = build(sg, 0, 24, "corridor:2")
    write_pruneset(ps, tmp_path / "p.txt")
    back = read_pruneset(tmp_path / "p.txt", sg.n)
    assert back.node_ids() == ps.node_ids()
    assert back.technique == "corridor:2"
    assert (tmp_path / "p.txt").read_text().splitlines()[1] == f"node {ps.node_ids()[0]}"
