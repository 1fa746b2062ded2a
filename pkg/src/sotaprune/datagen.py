"""Synthetic gamma travel-time inputs over a base graph.

Path-based settings run in rounds.  Each round draws a batch of free-flow
shortest paths (or single arcs), counts how often every arc was used, raises
the gamma parameters of used arcs and shrinks those of unused arcs back
towards the base.  The free-flow shift of an arc never changes, so the
shortest paths drawn in later rounds are the same kind of paths as in the
first.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import GammaSpec, NormalMixtureSpec
from .graph import Graph, shortest_path_trees

log = logging.getLogger(__name__)


class Setting(Enum):
    RANDOM_PATHS = "random-paths"
    RANDOM_SHUFFLE = "random-shuffle"
    HOTSPOTS = "hotspots"
    RANDOM_ARCS = "random-arcs"
    RANDOM_ARC_DISTRIBUTIONS = "random-arc-distributions"


@dataclass
class GenSettings:
    setting: Setting
    rounds: int = 1
    paths: int = 0
    hotspots: int = 0
    seed: int = 0
    decrease_factor: float = 0.9
    shape_add: tuple[float, float] = (0.02, 0.08)
    scale_add: tuple[float, float] = (0.1, 0.5)
    base_shape: float = 1.0
    base_scale: float = 1.0
    saturation: int = 5

    def __post_init__(self):
        self.setting = Setting(self.setting)
        self.shape_add = tuple(self.shape_add)
        self.scale_add = tuple(self.scale_add)

    def validate(self) -> None:
        s = self.setting
        if s is not Setting.RANDOM_ARC_DISTRIBUTIONS and self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if s in (Setting.RANDOM_PATHS, Setting.HOTSPOTS, Setting.RANDOM_ARCS) and self.paths < 1:
            raise ValueError(f"{s.value} needs paths >= 1")
        if s is Setting.HOTSPOTS and self.hotspots < 1:
            raise ValueError("hotspots needs hotspots >= 1")
        if s not in (Setting.RANDOM_PATHS, Setting.HOTSPOTS, Setting.RANDOM_ARCS) and self.paths:
            raise ValueError(f"{s.value} takes no paths parameter")
        if s is not Setting.HOTSPOTS and self.hotspots:
            raise ValueError(f"{s.value} takes no hotspots parameter")
        if self.saturation < 1:
            raise ValueError("saturation must be at least 1")
        if not 0 < self.decrease_factor <= 1:
            raise ValueError("decrease_factor must lie in (0, 1]")


PRESETS: dict[str, GenSettings] = {
    "graph1": GenSettings(Setting.RANDOM_SHUFFLE, rounds=15),
    "graph2": GenSettings(Setting.RANDOM_ARCS, rounds=40, paths=50_000),
    "graph3": GenSettings(Setting.HOTSPOTS, rounds=15, paths=5_000, hotspots=50),
    "graph4": GenSettings(Setting.RANDOM_PATHS, rounds=100, paths=2_500),
    "graph5": GenSettings(Setting.RANDOM_PATHS, rounds=25, paths=10_000),
}


def preset(name: str, **overrides) -> GenSettings:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)


def settings_from_config(path: str | Path, **overrides) -> GenSettings:
    """Read ``key=value`` lines; a ``preset=graphN`` line seeds the defaults."""
    values: dict = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    base = preset(values.pop("preset")) if "preset" in values else None
    kinds = {f.name: f.type for f in fields(GenSettings)}
    parsed: dict = {}
    for key, value in values.items():
        if key not in kinds:
            raise ValueError(f"unknown setting {key!r}")
        if key == "setting":
            parsed[key] = Setting(value)
        elif key in ("shape_add", "scale_add"):
            lo, hi = value.split(",")
            parsed[key] = (float(lo), float(hi))
        elif key in ("decrease_factor", "base_shape", "base_scale"):
            parsed[key] = float(value)
        else:
            parsed[key] = int(value)
    parsed.update(overrides)
    if base is not None:
        return replace(base, **parsed)
    return GenSettings(**parsed)


# --- grids -----------------------------------------------------------------

def make_grid(w: int, h: int, freeflow_range: tuple[int, int] = (1, 1),
              seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Bidirected 4-neighbour grid; node ``r * w + c``; free-flow steps per arc."""
    if w < 2 or h < 2:
        raise ValueError("grid needs w, h >= 2")
    lo, hi = freeflow_range
    if lo < 1 or hi < lo:
        raise ValueError("free-flow range must satisfy 1 <= lo <= hi")
    arcs = []
    for r in range(h):
        for c in range(w):
            v = r * w + c
            if c + 1 < w:
                arcs += [(v, v + 1), (v + 1, v)]
            if r + 1 < h:
                arcs += [(v, v + w), (v + w, v)]
    g = Graph.from_arcs(w * h, arcs)
    rng = np.random.default_rng(seed)
    freeflow = rng.integers(lo, hi + 1, size=g.m)
    return g, freeflow


# --- path sampling ---------------------------------------------------------

@dataclass
class RoundCount:
    counter: np.ndarray
    attempted: int
    skipped: int = 0


class PathSampler:
    """Free-flow shortest paths with per-source trees cached across rounds."""

    def __init__(self, g: Graph, freeflow: Sequence[int], chunk: int = 256):
        self.g = g
        self.freeflow = np.asarray(freeflow, dtype=np.int64)
        self.chunk = chunk
        self._rows: dict[int, np.ndarray] = {}
        self._keys = g.src * g.n + g.dst

    def _parent_arcs(self, sources: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        missing = [s for s in np.unique(sources).tolist() if s not in self._rows]
        for i in range(0, len(missing), self.chunk):
            batch = np.array(missing[i:i + self.chunk])
            _, parent = shortest_path_trees(self.g, self.freeflow, batch)
            for s, row in zip(batch.tolist(), parent):
                arc = np.full(self.g.n, -1, dtype=np.int32)
                has = row >= 0
                arc[has] = np.searchsorted(self._keys, row[has] * self.g.n + np.flatnonzero(has))
                self._rows[s] = arc
        uniq, inverse = np.unique(sources, return_inverse=True)
        return np.stack([self._rows[s] for s in uniq.tolist()]), inverse

    def count_paths(self, sources: np.ndarray, targets: np.ndarray) -> RoundCount:
        """Arc usage of the shortest paths between paired sources and targets."""
        counter = np.zeros(self.g.m, dtype=np.int64)
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        if len(sources) == 0:
            return RoundCount(counter, 0)
        rows, which = self._parent_arcs(sources)
        cur = targets.copy()
        first = rows[which, cur]
        unreachable = (first < 0) & (cur != sources)
        active = (cur != sources) & ~unreachable
        while active.any():
            idx = np.flatnonzero(active)
            arcs = rows[which[idx], cur[idx]]
            counter += np.bincount(arcs, minlength=self.g.m)
            cur[idx] = self.g.src[arcs]
            active[idx] = cur[idx] != sources[idx]
        skipped = int(unreachable.sum())
        if skipped:
            log.info("skipped %d disconnected pairs", skipped)
        return RoundCount(counter, len(sources), skipped)

    def random_paths(self, P: int, rng: np.random.Generator) -> RoundCount:
        s = rng.integers(self.g.n, size=P)
        t = rng.integers(self.g.n, size=P)
        return self.count_paths(s, t)

    def shuffle(self, rng: np.random.Generator) -> RoundCount:
        return self.count_paths(np.arange(self.g.n), rng.permutation(self.g.n))

    def hotspots(self, P: int, H: int, rng: np.random.Generator) -> RoundCount:
        spots = rng.choice(self.g.n, size=H, replace=H > self.g.n)
        per = np.full(H, P // H)
        per[:P % H] += 1
        targets = np.repeat(spots, per)
        sources = rng.integers(self.g.n, size=P)
        return self.count_paths(sources, targets)

    def random_arcs(self, P: int, rng: np.random.Generator) -> RoundCount:
        picks = rng.integers(self.g.m, size=P)
        return RoundCount(np.bincount(picks, minlength=self.g.m).astype(np.int64), P)


def apply_counters(shape: np.ndarray, scale: np.ndarray, counter: np.ndarray,
                   settings: GenSettings) -> None:
    """One round of parameter updates, in place.

    Used arcs gain an additive penalty interpolated from the low to the high
    value as the counter grows from 1 to ``saturation``; unused arcs shrink by
    ``decrease_factor`` but never below the base parameters.
    """
    used = counter > 0
    if settings.saturation > 1:
        frac = np.clip((counter - 1) / (settings.saturation - 1), 0.0, 1.0)
    else:
        frac = np.ones(len(counter))
    lo, hi = settings.shape_add
    shape[used] += lo + (hi - lo) * frac[used]
    lo, hi = settings.scale_add
    scale[used] += lo + (hi - lo) * frac[used]
    shape[~used] = np.maximum(settings.base_shape, shape[~used] * settings.decrease_factor)
    scale[~used] = np.maximum(settings.base_scale, scale[~used] * settings.decrease_factor)


def random_arc_distributions(g: Graph, freeflow: Sequence[int], seed: int,
                             low: float = 0.01, high: float = 10.0) -> list[GammaSpec]:
    rng = np.random.default_rng(seed)
    shape = rng.uniform(low, high, size=g.m)
    scale = rng.uniform(low, high, size=g.m)
    return [GammaSpec(float(a), float(b), int(f)) for a, b, f in zip(shape, scale, freeflow)]


@dataclass
class GenReport:
    rounds: list[RoundCount] = field(default_factory=list)


def generate(g: Graph, freeflow: Sequence[int], settings: GenSettings,
             report: GenReport | None = None) -> list[GammaSpec]:
    """Gamma spec per arc for one of the five input settings."""
    settings.validate()
    freeflow = np.asarray(freeflow, dtype=np.int64)
    if settings.setting is Setting.RANDOM_ARC_DISTRIBUTIONS:
        return random_arc_distributions(g, freeflow, settings.seed)
    rng = np.random.default_rng(settings.seed)
    sampler = PathSampler(g, freeflow)
    shape = np.full(g.m, settings.base_shape)
    scale = np.full(g.m, settings.base_scale)
    for _ in range(settings.rounds):
        if settings.setting is Setting.RANDOM_PATHS:
            rc = sampler.random_paths(settings.paths, rng)
        elif settings.setting is Setting.RANDOM_SHUFFLE:
            rc = sampler.shuffle(rng)
        elif settings.setting is Setting.HOTSPOTS:
            rc = sampler.hotspots(settings.paths, settings.hotspots, rng)
        else:
            rc = sampler.random_arcs(settings.paths, rng)
        apply_counters(shape, scale, rc.counter, settings)
        if report is not None:
            report.rounds.append(rc)
    return [GammaSpec(float(a), float(b), int(f)) for a, b, f in zip(shape, scale, freeflow)]


# --- smoothing -------------------------------------------------------------

def spec_variance(spec) -> float:
    """Continuous variance of a parametric spec (seconds squared)."""
    if isinstance(spec, GammaSpec):
        return spec.shape * spec.scale ** 2
    if isinstance(spec, NormalMixtureSpec):
        w = np.array([c[0] for c in spec.components])
        mu = np.array([c[1] for c in spec.components])
        sd = np.array([c[2] for c in spec.components])
        mean = float(np.dot(w, mu))
        return float(np.dot(w, sd ** 2 + mu ** 2) - mean ** 2)
    raise TypeError(f"no variance for {spec!r}")


def smooth_variance(specs: Sequence, cap_quantile: float = 0.9) -> list:
    """Shrink arcs above the network variance quantile down to it.

    Gamma arcs keep their shape and lower the scale; normal mixtures are
    contracted about their mean.  Other specs pass through untouched.
    """
    if not 0.5 < cap_quantile < 1:
        raise ValueError("cap_quantile must lie in (0.5, 1)")
    specs = list(specs)
    idx = [i for i, s in enumerate(specs) if isinstance(s, (GammaSpec, NormalMixtureSpec))]
    if not idx:
        return specs
    var = np.array([spec_variance(specs[i]) for i in idx])
    cap = float(np.quantile(var, cap_quantile))
    out = list(specs)
    for i, v in zip(idx, var):
        if v <= cap:
            continue
        s = specs[i]
        if isinstance(s, GammaSpec):
            out[i] = GammaSpec(s.shape, float(np.sqrt(cap / s.shape)), s.shift)
        else:
            f = float(np.sqrt(cap / v))
            w = np.array([c[0] for c in s.components])
            mean = float(np.dot(w, [c[1] for c in s.components]))
            comps = tuple((wk, mean + f * (mu - mean), f * sd) for wk, mu, sd in s.components)
            out[i] = NormalMixtureSpec(comps, s.shift)
    return out
