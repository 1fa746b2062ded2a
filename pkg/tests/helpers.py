"""Shared builders for the test suite."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from sotaprune.datagen import generate, make_grid, preset
from sotaprune.distributions import PmfSpec
from sotaprune.graph import Graph
from sotaprune.network import StochasticGraph


def network(n: int, arcs: dict[tuple[int, int], PmfSpec]) -> StochasticGraph:
    """Graph plus explicit pmfs, keyed by arc."""
    g = Graph.from_arcs(n, list(arcs))
    return StochasticGraph.from_specs(g, [arcs[a] for a in g.arcs()])


def point(at: int) -> PmfSpec:
    return PmfSpec(at, (1.0,))


def uniform(lo: int, hi: int) -> PmfSpec:
    k = hi - lo + 1
    return PmfSpec(lo, tuple([1.0 / k] * k))


def random_pmf(rng: np.random.Generator, max_offset: int = 4, max_len: int = 6) -> PmfSpec:
    k = int(rng.integers(1, max_len + 1))
    mass = rng.dirichlet(np.ones(k))
    mass[0] = max(mass[0], 1e-3)
    mass[-1] = max(mass[-1], 1e-3)
    return PmfSpec(int(rng.integers(1, max_offset + 1)), tuple((mass / mass.sum()).tolist()))


def random_network(seed: int, max_nodes: int = 10, max_arcs: int = 25,
                   max_offset: int = 4, max_len: int = 6) -> StochasticGraph:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, max_nodes + 1))
    pairs = [p for p in itertools.permutations(range(n), 2)]
    m = int(rng.integers(n, min(max_arcs, len(pairs)) + 1))
    chosen = rng.choice(len(pairs), size=m, replace=False)
    return network(n, {pairs[i]: random_pmf(rng, max_offset, max_len) for i in sorted(chosen)})


def random_grid_network(w: int, h: int, seed: int, max_offset: int = 3,
                        max_len: int = 6) -> StochasticGraph:
    g, _ = make_grid(w, h)
    rng = np.random.default_rng(seed)
    return StochasticGraph.from_specs(g, [random_pmf(rng, max_offset, max_len) for _ in range(g.m)])


@lru_cache(maxsize=None)
def generated_grid(w: int, h: int, preset_name: str = "graph5", seed: int = 1,
                   freeflow=(4, 12), dt: float = 5.0, **overrides) -> StochasticGraph:
    """Grid with gamma arcs from a datagen preset (cached per configuration)."""
    g, ff = make_grid(w, h, freeflow, seed)
    specs = generate(g, ff, preset(preset_name, seed=seed, **overrides))
    return StochasticGraph.from_specs(g, specs, dt=dt)


def simple_paths(g: Graph, s: int, t: int):
    """All simple s-t paths by depth-first enumeration (small graphs only)."""
    out = []
    stack = [(s, [s])]
    while stack:
        u, path = stack.pop()
        if u == t:
            out.append(path)
            continue
        for a in g.out_arc_ids(u):
            v = int(g.dst[a])
            if v not in path:
                stack.append((v, path + [v]))
    return out
