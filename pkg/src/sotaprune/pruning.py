"""Alternative-route subgraphs used to restrict the policy solver.

All techniques evaluate a deterministic weight view of the arc distributions
(the mean by default), return a node set with its induced arcs, and finish by
removing nodes that lie on no s-t path inside that induced subgraph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import BACKWARD, FORWARD, Graph, WeightView, dijkstra, masked_distances
from .network import StochasticGraph


@dataclass(eq=False)
class PruneSet:
    nodes: np.ndarray  # bool per node
    technique: str
    params: dict = field(default_factory=dict)

    def __contains__(self, v: int) -> bool:
        return bool(self.nodes[v])

    def __len__(self) -> int:
        return int(self.nodes.sum())

    def node_ids(self) -> list[int]:
        return np.flatnonzero(self.nodes).tolist()

    def arc_mask(self, g: Graph) -> np.ndarray:
        return self.nodes[g.src] & self.nodes[g.dst]

    def percent_of(self, n: int) -> float:
        return 100.0 * len(self) / n


@dataclass
class ViaParams:
    stretch_eps: float = 0.25
    sharing_gamma: float = 0.8
    views: tuple[WeightView, ...] = (WeightView.MEAN,)

    def __post_init__(self):
        if self.stretch_eps < 0:
            raise ValueError("stretch_eps must be non-negative")
        if not 0 < self.sharing_gamma <= 1:
            raise ValueError("sharing_gamma must lie in (0, 1]")
        self.views = tuple(WeightView(v) for v in self.views)


@dataclass
class PenaltyParams:
    rounds: int = 10
    penalty_factor: float = 1.4
    adjoint: bool = True
    adjoint_factor: float = 1.1
    stop_stretch: float = 0.25

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.penalty_factor <= 1 or (self.adjoint and self.adjoint_factor <= 1):
            raise ValueError("penalty factors must exceed 1")


VIA_MIX_VIEWS = (WeightView.FREE_FLOW, WeightView.MEAN, WeightView.MAX)


def prune_dead_ends(g: Graph, nodes: np.ndarray, s: int, t: int) -> np.ndarray:
    """Keep the nodes on some s-t path of the induced subgraph."""
    arcs = nodes[g.src] & nodes[g.dst]
    ones = np.ones(g.m)
    from_s = np.isfinite(masked_distances(g, ones, s, arcs, FORWARD))
    to_t = np.isfinite(masked_distances(g, ones, t, arcs, BACKWARD))
    return nodes & from_s & to_t


def _walk(parent: np.ndarray, v: int, marked: np.ndarray) -> None:
    while v >= 0 and not marked[v]:
        marked[v] = True
        v = int(parent[v])


def _require_reachable(dist: np.ndarray, node: int, s: int, t: int) -> None:
    if not np.isfinite(dist[node]):
        raise ValueError(f"target {t} is unreachable from {s}")


def corridor(sg: StochasticGraph, s: int, t: int, k: int,
             view: WeightView = WeightView.MEAN) -> PruneSet:
    """k-turn corridor read off a single backward shortest-path tree.

    Level 0 is the shortest path; level i adds, for every arc leaving a node
    added at level i-1, the shortest path from that arc's head to ``t``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    g = sg.graph
    back = dijkstra(g, t, sg.weights(view), BACKWARD)
    _require_reachable(back.dist, s, s, t)
    reach = np.isfinite(back.dist)
    nodes = np.zeros(g.n, dtype=bool)
    _walk(back.parent, s, nodes)
    frontier = np.flatnonzero(nodes)
    for _ in range(k):
        before = nodes.copy()
        for v in frontier:
            if v == t:
                continue
            for w in g.dst[g.out_ptr[v]:g.out_ptr[v + 1]]:
                if reach[w]:
                    _walk(back.parent, int(w), nodes)
        frontier = np.flatnonzero(nodes & ~before)
        if frontier.size == 0:
            break
    nodes = prune_dead_ends(g, nodes, s, t)
    return PruneSet(nodes, f"corridor:{k}", {"k": k, "view": WeightView(view).value})


def _parent_arcs(g: Graph, parent: np.ndarray, direction: str) -> np.ndarray:
    """Arc id joining each node to its tree parent (-1 for roots and unreached)."""
    out = np.full(g.n, -1, dtype=np.int64)
    has = np.flatnonzero(parent >= 0)
    if direction == FORWARD:
        tail, head = parent[has], has
    else:
        tail, head = has, parent[has]
    out[has] = np.searchsorted(g.src * g.n + g.dst, tail * g.n + head)
    return out


def _via_single(sg: StochasticGraph, s: int, t: int, eps: float, gamma: float,
                view: WeightView) -> np.ndarray:
    g = sg.graph
    w = sg.weights(view)
    fwd = dijkstra(g, s, w)
    _require_reachable(fwd.dist, t, s, t)
    d = fwd.dist[t]
    limit = (1 + eps) * d
    bwd = dijkstra(g, t, w, BACKWARD, limit=limit)
    fdist = np.where(fwd.dist <= limit, fwd.dist, np.inf)

    on_sp = np.zeros(g.m, dtype=bool)
    f_arc = _parent_arcs(g, fwd.parent, FORWARD)
    v = t
    while v != s:
        on_sp[f_arc[v]] = True
        v = int(fwd.parent[v])
    shared_w = np.where(on_sp, w, 0)

    # length shared with the shortest path along each tree path, accumulated root-outwards
    f_share = np.zeros(g.n)
    for v in fwd.order[1:]:
        f_share[v] = f_share[fwd.parent[v]] + shared_w[f_arc[v]]
    b_arc = _parent_arcs(g, bwd.parent, BACKWARD)
    b_share = np.zeros(g.n)
    for v in bwd.order[1:]:
        b_share[v] = b_share[bwd.parent[v]] + shared_w[b_arc[v]]

    total = fdist + bwd.dist
    keep = np.isfinite(total) & (total <= limit) & (f_share + b_share <= gamma * d)
    f_marked = np.zeros(g.n, dtype=bool)
    b_marked = np.zeros(g.n, dtype=bool)
    _walk(fwd.parent, t, f_marked)
    for v in np.flatnonzero(keep):
        _walk(fwd.parent, int(v), f_marked)
        _walk(bwd.parent, int(v), b_marked)
    return f_marked | b_marked


def via_alternative_graph(sg: StochasticGraph, s: int, t: int, params: ViaParams | None = None) -> PruneSet:
    """Union of all feasible via-node routes SP(s,v).SP(v,t) plus the shortest path.

    A candidate ``v`` must be settled by both the forward search from ``s`` and
    the backward search from ``t`` within ``(1 + stretch_eps) * dist``, keep
    the concatenated length within that bound, and share at most
    ``sharing_gamma * dist`` of length with the shortest path.  Several views
    are unioned.
    """
    params = params or ViaParams()
    nodes = np.zeros(sg.n, dtype=bool)
    for view in params.views:
        nodes |= _via_single(sg, s, t, params.stretch_eps, params.sharing_gamma, view)
    nodes = prune_dead_ends(sg.graph, nodes, s, t)
    name = "via-mix" if len(params.views) > 1 else "via"
    return PruneSet(nodes, name, {"stretch_eps": params.stretch_eps, "sharing_gamma": params.sharing_gamma,
                                  "views": [v.value for v in params.views]})


def _scale_up(w: np.ndarray, factor: float) -> np.ndarray:
    # round first so that e.g. 5 * 1.4 stays 7 instead of 7.000000000000001 -> 8
    return np.ceil(np.round(w * factor, 9)).astype(np.int64)


def penalty_alternative_graph(sg: StochasticGraph, s: int, t: int, params: PenaltyParams | None = None,
                              view: WeightView = WeightView.MEAN, trace: list | None = None) -> PruneSet:
    """Union of the paths found by iterated shortest paths with arc penalties.

    If ``trace`` is given, each round appends ``(path, original_length, kept)``.
    """
    params = params or PenaltyParams()
    g = sg.graph
    base = sg.weights(view)
    working = base.copy()
    nodes = np.zeros(g.n, dtype=bool)
    d = None
    for _ in range(params.rounds):
        res = dijkstra(g, s, working)
        _require_reachable(res.dist, t, s, t)
        path = res.path(t)
        arcs = np.array([g.arc_id(u, v) for u, v in zip(path, path[1:])], dtype=np.int64)
        length = int(base[arcs].sum())
        if d is None:
            d = length
        too_long = length > (1 + params.stop_stretch) * d
        if trace is not None:
            trace.append((path, length, not too_long))
        if too_long:
            break
        nodes[path] = True
        if params.adjoint:
            leaving = np.zeros(g.m, dtype=bool)
            for u in path:
                leaving[g.out_ptr[u]:g.out_ptr[u + 1]] = True
            leaving[arcs] = False
            working[leaving] = _scale_up(working[leaving], params.adjoint_factor)
        working[arcs] = _scale_up(working[arcs], params.penalty_factor)
    nodes = prune_dead_ends(g, nodes, s, t)
    return PruneSet(nodes, "penalty", {"rounds": params.rounds, "penalty_factor": params.penalty_factor,
                                       "adjoint": params.adjoint, "adjoint_factor": params.adjoint_factor,
                                       "stop_stretch": params.stop_stretch, "view": WeightView(view).value})


def full_set(sg: StochasticGraph) -> PruneSet:
    return PruneSet(np.ones(sg.n, dtype=bool), "full")


def build(sg: StochasticGraph, s: int, t: int, technique: str, view: WeightView = WeightView.MEAN,
          via: ViaParams | None = None, penalty: PenaltyParams | None = None) -> PruneSet:
    """Dispatch on a technique name: full, corridor:K, penalty, via, via-mix."""
    name, _, arg = technique.partition(":")
    if name == "full":
        return full_set(sg)
    if name == "corridor":
        return corridor(sg, s, t, int(arg or 1), view)
    if name == "penalty":
        return penalty_alternative_graph(sg, s, t, penalty, view)
    if name in ("via", "via-mix"):
        base = via or ViaParams()
        views = VIA_MIX_VIEWS if name == "via-mix" else (view,)
        return via_alternative_graph(sg, s, t, ViaParams(base.stretch_eps, base.sharing_gamma, views))
    raise ValueError(f"unknown technique {technique!r}")


def write_pruneset(ps: PruneSet, path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {ps.technique} {ps.params}\n")
        for v in ps.node_ids():
            fh.write(f"node {v}\n")


def read_pruneset(path: str | Path, n: int) -> PruneSet:
    nodes = np.zeros(n, dtype=bool)
    technique = "file"
    for line in Path(path).read_text().splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "#":
            technique = tok[1] if len(tok) > 1 else technique
            continue
        if tok[0] != "node" or len(tok) != 2:
            raise ValueError(f"bad prune-set line: {line!r}")
        nodes[int(tok[1])] = True
    return PruneSet(nodes, technique)
