"""Directed graph storage and deterministic shortest-path machinery.

Arcs are stored sorted by ``(src, dst)`` so that the out-arcs of a node form a
contiguous block with ascending heads.  Weights are never stored on the graph;
every routine takes an integer weight array indexed by arc id, which is how the
free-flow / mean / max views of the arc distributions are plugged in.

Tie-breaking is fixed throughout: nodes with equal keys are settled in
ascending id order and a node's parent is the lowest-id predecessor achieving
its distance.  That rule depends only on the distances, so the heap-based
:func:`dijkstra` and the bulk :func:`shortest_path_trees` agree exactly.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

FORWARD = "forward"
BACKWARD = "backward"


class WeightView(Enum):
    FREE_FLOW = "freeflow"
    MEAN = "mean"
    MAX = "max"


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph without self-loops or parallel arcs."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    out_ptr: np.ndarray = field(repr=False)
    in_ptr: np.ndarray = field(repr=False)
    in_arcs: np.ndarray = field(repr=False)

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable[tuple[int, int]]) -> "Graph":
        pairs = np.asarray(list(arcs), dtype=np.int64).reshape(-1, 2)
        if n < 1:
            raise ValueError("graph needs at least one node")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ValueError("arc endpoint out of range")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            bad = pairs[pairs[:, 0] == pairs[:, 1]][0]
            raise ValueError(f"self-loop at node {bad[0]}")
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
        dup = np.all(pairs[1:] == pairs[:-1], axis=1)
        if np.any(dup):
            u, v = pairs[1:][dup][0]
            raise ValueError(f"parallel arc {u}->{v}")
        src = np.ascontiguousarray(pairs[:, 0])
        dst = np.ascontiguousarray(pairs[:, 1])
        out_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=out_ptr[1:])
        in_arcs = np.lexsort((src, dst)).astype(np.int64)
        in_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=n), out=in_ptr[1:])
        for a in (src, dst, out_ptr, in_ptr, in_arcs):
            a.flags.writeable = False
        return cls(n, src, dst, out_ptr, in_ptr, in_arcs)

    @property
    def m(self) -> int:
        return len(self.src)

    def out_arc_ids(self, u: int) -> range:
        return range(self.out_ptr[u], self.out_ptr[u + 1])

    def in_arc_ids(self, v: int) -> np.ndarray:
        return self.in_arcs[self.in_ptr[v]:self.in_ptr[v + 1]]

    def arc_id(self, u: int, v: int) -> int:
        lo, hi = self.out_ptr[u], self.out_ptr[u + 1]
        k = lo + int(np.searchsorted(self.dst[lo:hi], v))
        if k < hi and self.dst[k] == v:
            return int(k)
        raise KeyError((u, v))

    def arcs(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))


# --- text format -----------------------------------------------------------

def read_graph(path: str | Path) -> Graph:
    lines = Path(path).read_text().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise GraphFormatError(f"{path}: empty graph file")
    lineno, head = rows[0]
    if len(head) != 4 or head[0] != "nodes" or head[2] != "arcs":
        raise GraphFormatError(f"{path}:{lineno}: expected 'nodes <n> arcs <m>'")
    try:
        n, m = int(head[1]), int(head[3])
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: non-integer node or arc count") from None
    body = rows[1:]
    if len(body) != m:
        raise GraphFormatError(f"{path}: header announces {m} arcs, found {len(body)}")
    arcs = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, tok in body:
        where = f"{path}:{lineno}"
        if len(tok) != 2:
            raise GraphFormatError(f"{where}: expected 'from to'")
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphFormatError(f"{where}: non-integer node id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"{where}: node id out of range 0..{n - 1}")
        if u == v:
            raise GraphFormatError(f"{where}: self-loop at node {u}")
        if (u, v) in seen:
            raise GraphFormatError(f"{where}: parallel arc {u}->{v} (first on line {seen[u, v]})")
        seen[u, v] = lineno
        arcs.append((u, v))
    try:
        return Graph.from_arcs(n, arcs)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def write_graph(g: Graph, path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"nodes {g.n} arcs {g.m}\n")
        for u, v in g.arcs():
            fh.write(f"{u} {v}\n")


# --- single-source Dijkstra ------------------------------------------------

@dataclass
class SearchResult:
    """Distances (``inf`` if unreachable), parents (-1 for none) and settle order.

    In a backward search ``parent[v]`` is the next node on v's shortest path
    towards the root.
    """

    root: int
    direction: str
    dist: np.ndarray
    parent: np.ndarray
    order: list[int]

    def path(self, v: int) -> list[int] | None:
        """Tree path between the root and ``v`` oriented along the arcs."""
        if not np.isfinite(self.dist[v]):
            return None
        nodes = [v]
        while nodes[-1] != self.root:
            nodes.append(int(self.parent[nodes[-1]]))
        if self.direction == FORWARD:
            nodes.reverse()
        return nodes


def dijkstra(g: Graph, root: int, weights: Sequence[int] | np.ndarray,
             direction: str = FORWARD, limit: float = np.inf) -> SearchResult:
    """Plain binary-heap Dijkstra; nodes beyond ``limit`` are left unsettled."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(direction)
    w = np.asarray(weights).tolist()
    n = g.n
    dist = [np.inf] * n
    parent = [-1] * n
    done = [False] * n
    if direction == FORWARD:
        ptr, nbr, arc_of = g.out_ptr.tolist(), g.dst.tolist(), None
    else:
        ptr, nbr, arc_of = g.in_ptr.tolist(), g.src.tolist(), g.in_arcs.tolist()
    dist[root] = 0
    heap = [(0, root)]
    order = []
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        if d > limit:
            break
        done[u] = True
        order.append(u)
        for k in range(ptr[u], ptr[u + 1]):
            a = k if arc_of is None else arc_of[k]
            v = nbr[a]
            if done[v]:
                continue
            nd = d + w[a]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < parent[v]:
                parent[v] = u
    dist_arr = np.array(dist, dtype=float)
    parent_arr = np.array(parent, dtype=np.int64)
    if np.isfinite(limit):
        unsettled = ~np.array(done)
        dist_arr[unsettled] = np.inf
        parent_arr[unsettled] = -1
    return SearchResult(root, direction, dist_arr, parent_arr, order)


def shortest_path(g: Graph, s: int, t: int, weights) -> tuple[list[int], int] | None:
    """Minimal-length s-t path and its length, or None if t is unreachable."""
    res = dijkstra(g, s, weights)
    nodes = res.path(t)
    if nodes is None:
        return None
    return nodes, int(res.dist[t])


def path_length(g: Graph, nodes: Sequence[int], weights) -> int:
    w = np.asarray(weights)
    return int(sum(w[g.arc_id(u, v)] for u, v in zip(nodes, nodes[1:])))


def dijkstra_rank(g: Graph, s: int, v: int, weights) -> int:
    res = dijkstra(g, s, weights)
    if not np.isfinite(res.dist[v]):
        raise ValueError(f"node {v} unreachable from {s}")
    return res.order.index(v)


def node_of_rank(g: Graph, s: int, rank: int, weights) -> int | None:
    order = dijkstra(g, s, weights).order
    return order[rank] if rank < len(order) else None


def masked_distances(g: Graph, weights, root: int, arc_mask: np.ndarray | None = None,
                     direction: str = FORWARD) -> np.ndarray:
    """Distances from (forward) or to (backward) ``root`` using only masked arcs."""
    w = np.asarray(weights, dtype=float)
    keep = np.ones(g.m, dtype=bool) if arc_mask is None else np.asarray(arc_mask, dtype=bool)
    src, dst = g.src[keep], g.dst[keep]
    if direction == BACKWARD:
        src, dst = dst, src
    mat = csr_matrix((w[keep], (src, dst)), shape=(g.n, g.n))
    return _csgraph_dijkstra(mat, directed=True, indices=root)


# --- bulk trees --------------------------------------------------------------

def shortest_path_trees(g: Graph, weights, roots: Sequence[int],
                        direction: str = FORWARD) -> tuple[np.ndarray, np.ndarray]:
    """Distance and parent matrices for many roots at once.

    Distances come from scipy's C Dijkstra; parents are then derived with the
    same lowest-id rule as :func:`dijkstra`, so rows match it exactly.
    """
    w = np.asarray(weights, dtype=float)
    roots = np.asarray(roots, dtype=np.int64)
    mat = csr_matrix((w, (g.src, g.dst)), shape=(g.n, g.n))
    if direction == BACKWARD:
        mat = mat.T.tocsr()
    D = _csgraph_dijkstra(mat, directed=True, indices=roots)
    D = np.atleast_2d(D)
    if direction == FORWARD:
        tail, head = g.src, g.dst
    else:
        tail, head = g.dst, g.src
    # arc tail->head in search orientation; head's parent candidates are tails
    tight = np.isfinite(D[:, tail]) & (D[:, tail] + w == D[:, head])
    parent = np.full(D.shape, g.n, dtype=np.int64)
    rows, cols = np.nonzero(tight)
    np.minimum.at(parent, (rows, head[cols]), tail[cols])
    parent[parent == g.n] = -1
    return D, parent
