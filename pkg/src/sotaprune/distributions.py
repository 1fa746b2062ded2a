"""Discretized travel-time distributions and convolution kernels.

All distributions live on one uniform grid of width ``dt`` seconds; grid index
``i`` stands for a travel time of ``i`` steps.  A continuous delay ``x`` (in
steps) lands in the bin nearest to it, i.e. bin ``shift + j`` collects
``x in [j - 0.5, j + 0.5)``, and any mass below ``-0.5`` is clipped into bin
``shift``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

DEFAULT_TAIL_EPS = 1e-6
MASS_SLACK = 1e-9


class ConvolutionCounter:
    """Per-run tally of logical convolution products."""

    def __init__(self) -> None:
        self.count = 0

    def add(self, k: int = 1) -> None:
        self.count += k


@dataclass(frozen=True, eq=False)
class DiscretePdf:
    offset: int
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("mass must be a non-empty 1-D array")
        if int(self.offset) != self.offset or self.offset < 1:
            raise ValueError(f"offset must be an integer >= 1, got {self.offset}")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("mass entries must be finite and non-negative")
        if mass[0] <= 0 or mass[-1] <= 0:
            raise ValueError("mass must be trimmed (positive first and last entry)")
        total = mass.sum()
        if total > 1 + MASS_SLACK:
            raise ValueError(f"total mass {total} exceeds 1")
        mass.flags.writeable = False
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return len(self.mass)

    @property
    def last(self) -> int:
        return self.offset + len(self.mass) - 1

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def cdf(self, length: int | None = None) -> np.ndarray:
        """Cumulative mass on grid cells ``0 .. length-1`` (default: through ``last``)."""
        if length is None:
            length = self.last + 1
        out = np.zeros(length)
        if self.offset < length:
            k = min(len(self.mass), length - self.offset)
            out[self.offset:self.offset + k] = np.cumsum(self.mass[:k])
            out[self.offset + k:] = out[self.offset + k - 1]
        return out

    def dense(self, length: int) -> np.ndarray:
        """Mass on grid cells ``0 .. length-1``, cut off beyond ``length``."""
        out = np.zeros(length)
        k = max(0, min(len(self.mass), length - self.offset))
        out[self.offset:self.offset + k] = self.mass[:k]
        return out

    def __repr__(self) -> str:
        return f"DiscretePdf(offset={self.offset}, len={len(self.mass)}, total={self.total:.6g})"


def point_mass(at: int) -> DiscretePdf:
    return DiscretePdf(at, np.ones(1))


def from_dense(mass: Sequence[float], start: int = 0) -> DiscretePdf | None:
    """Trim zeros off a dense array whose first cell is grid index ``start``."""
    mass = np.asarray(mass, dtype=float)
    nz = np.flatnonzero(mass > 0)
    if nz.size == 0:
        return None
    return DiscretePdf(start + int(nz[0]), mass[nz[0]:nz[-1] + 1])


# --- parametric specs ------------------------------------------------------

@dataclass(frozen=True)
class GammaSpec:
    shape: float
    scale: float
    shift: int


@dataclass(frozen=True)
class NormalMixtureSpec:
    components: tuple[tuple[float, float, float], ...]  # (weight, mu, sigma)
    shift: int


@dataclass(frozen=True)
class PmfSpec:
    """Explicit mass table starting at grid index ``offset``; point masses included."""

    offset: int
    mass: tuple[float, ...]

    @property
    def shift(self) -> int:
        return self.offset


def _check_shift(shift) -> None:
    if int(shift) != shift or shift < 1:
        raise ValueError(f"shift must be an integer >= 1, got {shift}")


def _check_tail(tail_eps: float) -> None:
    if not 0 < tail_eps <= 1e-3:
        raise ValueError(f"tail_eps must lie in (0, 1e-3], got {tail_eps}")


def _binned(cdf_edges: np.ndarray, shift: int, tail_eps: float) -> DiscretePdf:
    # cdf_edges[j] = CDF(j + 0.5); the first bin also absorbs everything below
    mass = np.diff(cdf_edges, prepend=0.0)
    mass = np.clip(mass, 0.0, None)
    cum = np.cumsum(mass)
    stop = int(np.searchsorted(cum, 1.0 - tail_eps))
    mass = mass[:stop + 1]
    mass = mass / mass.sum()
    pdf = from_dense(mass, start=shift)
    assert pdf is not None
    return pdf


def discretize_gamma(spec: GammaSpec, tail_eps: float = DEFAULT_TAIL_EPS, dt: float = 1.0) -> DiscretePdf:
    if spec.shape <= 0 or spec.scale <= 0:
        raise ValueError(f"gamma shape and scale must be positive: {spec}")
    _check_shift(spec.shift)
    _check_tail(tail_eps)
    return _gamma_cached(float(spec.shape), float(spec.scale) / dt, int(spec.shift), tail_eps)


@lru_cache(maxsize=65536)
def _gamma_cached(shape: float, scale: float, shift: int, tail_eps: float) -> DiscretePdf:
    hi = int(math.ceil(scale * special.gammainccinv(shape, tail_eps / 2))) + 2
    edges = special.gammainc(shape, (np.arange(hi + 1) + 0.5) / scale)
    return _binned(edges, shift, tail_eps)


def discretize_normal_mixture(spec: NormalMixtureSpec, tail_eps: float = DEFAULT_TAIL_EPS,
                              dt: float = 1.0) -> DiscretePdf:
    comps = spec.components
    if not comps:
        raise ValueError("normal mixture needs at least one component")
    weights = np.array([c[0] for c in comps], dtype=float)
    mus = np.array([c[1] for c in comps], dtype=float) / dt
    sigmas = np.array([c[2] for c in comps], dtype=float) / dt
    if np.any(sigmas <= 0):
        raise ValueError("normal mixture sigmas must be positive")
    if np.any(weights <= 0) or np.any(weights > 1) or abs(weights.sum() - 1) > 1e-9:
        raise ValueError(f"mixture weights must lie in (0,1] and sum to 1, got {weights.sum()}")
    _check_shift(spec.shift)
    _check_tail(tail_eps)
    z = -special.ndtri(tail_eps / (2 * len(comps)))
    hi = max(0, int(math.ceil(np.max(mus + z * sigmas)))) + 2
    x = np.arange(hi + 1) + 0.5
    edges = (weights[:, None] * special.ndtr((x[None, :] - mus[:, None]) / sigmas[:, None])).sum(axis=0)
    return _binned(edges, int(spec.shift), tail_eps)


def discretize(spec, tail_eps: float = DEFAULT_TAIL_EPS, dt: float = 1.0) -> DiscretePdf:
    if isinstance(spec, GammaSpec):
        return discretize_gamma(spec, tail_eps, dt)
    if isinstance(spec, NormalMixtureSpec):
        return discretize_normal_mixture(spec, tail_eps, dt)
    if isinstance(spec, PmfSpec):
        return DiscretePdf(spec.offset, np.array(spec.mass, dtype=float))
    raise TypeError(f"unknown distribution spec {spec!r}")


# --- convolution -----------------------------------------------------------

def convolve(a: DiscretePdf, b: DiscretePdf, counter: ConvolutionCounter | None = None) -> DiscretePdf:
    if counter is not None:
        counter.add()
    return DiscretePdf(a.offset + b.offset, np.convolve(a.mass, b.mass))


def convolve_truncated(a: DiscretePdf, b: DiscretePdf, budget: int,
                       counter: ConvolutionCounter | None = None) -> DiscretePdf | None:
    """Convolution restricted to grid cells ``<= budget``; None if nothing remains."""
    if counter is not None:
        counter.add()
    offset = a.offset + b.offset
    keep = budget - offset + 1
    if keep <= 0:
        return None
    # only the first `keep` cells of each factor can contribute
    mass = np.convolve(a.mass[:keep], b.mass[:keep])[:keep]
    return from_dense(mass, start=offset)


def convolve_fft(a: DiscretePdf, b: DiscretePdf, counter: ConvolutionCounter | None = None) -> DiscretePdf:
    if counter is not None:
        counter.add()
    n = len(a.mass) + len(b.mass) - 1
    size = 1 << max(0, (n - 1).bit_length())
    spec = np.fft.rfft(a.mass, size) * np.fft.rfft(b.mass, size)
    mass = np.fft.irfft(spec, size)[:n]
    np.clip(mass, 0.0, None, out=mass)
    out = from_dense(mass, start=a.offset + b.offset)
    assert out is not None
    return out


# --- summaries -------------------------------------------------------------

@dataclass(frozen=True)
class ScalarViews:
    min: int
    mean: float
    max: int
    variance: float


def scalar_views(p: DiscretePdf) -> ScalarViews:
    """Min, mean, max and variance in grid-index units (mass renormalized)."""
    idx = np.arange(p.offset, p.last + 1, dtype=float)
    w = p.mass / p.mass.sum()
    mean = float(np.dot(idx, w))
    var = float(np.dot((idx - mean) ** 2, w))
    return ScalarViews(p.offset, mean, p.last, var)
