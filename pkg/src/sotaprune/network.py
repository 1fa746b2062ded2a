"""Stochastic graphs: topology plus one travel-time distribution per arc."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import (
    DEFAULT_TAIL_EPS,
    DiscretePdf,
    GammaSpec,
    NormalMixtureSpec,
    PmfSpec,
    discretize,
    scalar_views,
)
from .graph import Graph, WeightView, read_graph


class DistFormatError(ValueError):
    pass


@dataclass(eq=False)
class StochasticGraph:
    graph: Graph
    pdfs: list[DiscretePdf]
    specs: list | None = None
    offsets: np.ndarray = field(init=False, repr=False)
    means: np.ndarray = field(init=False, repr=False)
    maxes: np.ndarray = field(init=False, repr=False)
    variances: np.ndarray = field(init=False, repr=False)
    _buckets: list | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if len(self.pdfs) != self.graph.m:
            raise ValueError(f"{len(self.pdfs)} distributions for {self.graph.m} arcs")
        views = [scalar_views(p) for p in self.pdfs]
        self.offsets = np.array([v.min for v in views], dtype=np.int64)
        self.means = np.array([v.mean for v in views], dtype=float)
        self.maxes = np.array([v.max for v in views], dtype=np.int64)
        self.variances = np.array([v.variance for v in views], dtype=float)

    @classmethod
    def from_specs(cls, graph: Graph, specs: Sequence, tail_eps: float = DEFAULT_TAIL_EPS,
                   dt: float = 1.0) -> "StochasticGraph":
        specs = list(specs)
        return cls(graph, [discretize(s, tail_eps, dt) for s in specs], specs)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    def weights(self, view: WeightView | str) -> np.ndarray:
        """Integer arc weights in time steps under a scalar view."""
        view = WeightView(view)
        if view is WeightView.FREE_FLOW:
            return self.offsets.copy()
        if view is WeightView.MAX:
            return self.maxes.copy()
        rounded = np.floor(self.means + 0.5).astype(np.int64)
        return np.clip(rounded, self.offsets, self.maxes)

    @property
    def min_offset(self) -> int:
        return int(self.offsets.min()) if self.m else 1

    def kernel_buckets(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        """Arcs grouped by power-of-two padded pdf length.

        Each entry is ``(width, arc_ids, reversed_masses)`` where row ``i`` of
        ``reversed_masses`` holds arc ``arc_ids[i]``'s mass reversed and
        left-padded with zeros to ``width``.
        """
        if self._buckets is None:
            lengths = np.array([len(p) for p in self.pdfs], dtype=np.int64)
            widths = 1 << np.ceil(np.log2(np.maximum(lengths, 1))).astype(np.int64)
            buckets = []
            for width in np.unique(widths):
                ids = np.flatnonzero(widths == width)
                rev = np.zeros((len(ids), int(width)))
                for row, a in enumerate(ids):
                    mass = self.pdfs[a].mass
                    rev[row, width - len(mass):] = mass[::-1]
                buckets.append((int(width), ids, rev))
            self._buckets = buckets
        return self._buckets


# --- distribution file -----------------------------------------------------

def format_spec(spec) -> str:
    if isinstance(spec, GammaSpec):
        return f"gamma {float(spec.shape)!r} {float(spec.scale)!r} {int(spec.shift)}"
    if isinstance(spec, NormalMixtureSpec):
        parts = [f"nm {len(spec.components)}"]
        parts += [f"{float(w)!r} {float(mu)!r} {float(sd)!r}" for w, mu, sd in spec.components]
        parts.append(str(int(spec.shift)))
        return " ".join(parts)
    if isinstance(spec, PmfSpec):
        if len(spec.mass) == 1 and spec.mass[0] == 1.0:
            return f"point {spec.offset}"
        return " ".join(["pmf", str(spec.offset)] + [repr(float(x)) for x in spec.mass])
    raise TypeError(spec)


def parse_spec(tokens: list[str]):
    kind, args = tokens[0], tokens[1:]
    if kind == "gamma":
        if len(args) != 3:
            raise ValueError("gamma expects <shape> <scale> <shift>")
        return GammaSpec(float(args[0]), float(args[1]), int(args[2]))
    if kind == "nm":
        k = int(args[0])
        if k < 1 or len(args) != 3 * k + 2:
            raise ValueError("nm expects <K> then K triples <w> <mu> <sigma> then <shift>")
        comps = tuple((float(args[1 + 3 * i]), float(args[2 + 3 * i]), float(args[3 + 3 * i]))
                      for i in range(k))
        return NormalMixtureSpec(comps, int(args[-1]))
    if kind == "point":
        if len(args) != 1:
            raise ValueError("point expects <steps>")
        return PmfSpec(int(args[0]), (1.0,))
    if kind == "pmf":
        if len(args) < 2:
            raise ValueError("pmf expects <offset> <m0> [m1 ...]")
        return PmfSpec(int(args[0]), tuple(float(x) for x in args[1:]))
    raise ValueError(f"unknown distribution kind {kind!r}")


def read_dist_specs(graph: Graph, path: str | Path) -> list:
    specs: list = [None] * graph.m
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        where = f"{path}:{lineno}"
        if len(tok) < 3:
            raise DistFormatError(f"{where}: expected 'from to <kind> ...'")
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise DistFormatError(f"{where}: non-integer node id") from None
        try:
            a = graph.arc_id(u, v)
        except (KeyError, IndexError):
            raise DistFormatError(f"{where}: arc {u}->{v} is not in the graph") from None
        if specs[a] is not None:
            raise DistFormatError(f"{where}: arc {u}->{v} listed twice")
        try:
            specs[a] = parse_spec(tok[2:])
            discretize(specs[a])
        except ValueError as exc:
            raise DistFormatError(f"{where}: {exc}") from None
    missing = [i for i, s in enumerate(specs) if s is None]
    if missing:
        a = missing[0]
        raise DistFormatError(f"{path}: no distribution for arc {graph.src[a]}->{graph.dst[a]} "
                              f"({len(missing)} arcs missing)")
    return specs


def write_dist_specs(graph: Graph, specs: Sequence, path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        for (u, v), spec in zip(graph.arcs(), specs):
            fh.write(f"{u} {v} {format_spec(spec)}\n")


def load_network(graph_path, dist_path, tail_eps: float = DEFAULT_TAIL_EPS, dt: float = 1.0) -> StochasticGraph:
    g = read_graph(graph_path)
    specs = read_dist_specs(g, dist_path)
    try:
        return StochasticGraph.from_specs(g, specs, tail_eps, dt)
    except ValueError as exc:
        raise DistFormatError(f"{dist_path}: {exc}") from None
