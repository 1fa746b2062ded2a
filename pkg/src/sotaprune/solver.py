"""Optimal on-time-arrival policies.

For a target ``t`` and budget ``T`` (in grid steps) the policy maximises, at
every node ``u`` and remaining budget ``tau``, the probability of reaching
``t`` within ``tau``::

    prob_u(tau) = max_{(u,v)} sum_w c_uv[w] * prob_v(tau - w),   prob_t(tau) = 1

:func:`solve_label_setting` sweeps the budget axis in blocks of the smallest
arc offset: every value inside a block only reads successor values from
earlier blocks, so each block is final once computed.
:func:`solve_successive_approx` iterates the same equations to a fixed point
and exists as an independent check on small graphs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .graph import BACKWARD, masked_distances
from .network import StochasticGraph

# successors whose value is within this of the best count as tied
TIE_TOL = 1e-12
CERTAIN = 1.0 - 1e-9
_NO_NEXT = np.iinfo(np.int32).max


class ConvergenceError(RuntimeError):
    pass


class InsufficientBudget(ValueError):
    pass


@dataclass
class Policy:
    target: int
    budget: int
    prob: np.ndarray      # (n, budget + 1)
    next: np.ndarray      # (n, budget + 1) int32, -1 where undefined
    freeflow: np.ndarray  # free-flow distance to target inside the mask

    @property
    def n(self) -> int:
        return self.prob.shape[0]


@dataclass
class SolveStats:
    convolutions: int = 0
    order_len: int = 0
    touched_nodes: int = 0
    blocks: int = 0
    block_size: int = 0

    def merge(self, other: "SolveStats") -> "SolveStats":
        return SolveStats(self.convolutions + other.convolutions, self.order_len + other.order_len,
                          self.touched_nodes + other.touched_nodes, self.blocks + other.blocks,
                          max(self.block_size, other.block_size))


def node_mask(n: int, mask) -> np.ndarray:
    """Boolean node mask from None (everything), a PruneSet, a bool array or node ids."""
    if mask is None:
        return np.ones(n, dtype=bool)
    nodes = getattr(mask, "nodes", mask)
    arr = np.asarray(nodes)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"mask has shape {arr.shape}, expected ({n},)")
        return arr.copy()
    out = np.zeros(n, dtype=bool)
    out[np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.int64)] = True
    return out


def _setup(sg: StochasticGraph, target: int, budget: int, mask):
    if budget < 1:
        raise ValueError("budget must be at least one step")
    nodes = node_mask(sg.n, mask)
    if not nodes.any():
        raise ValueError("empty mask")
    if not nodes[target]:
        raise ValueError(f"target {target} is not in the mask")
    g = sg.graph
    arc_ok = nodes[g.src] & nodes[g.dst] & (g.src != target)
    freeflow = masked_distances(g, sg.offsets, target, arc_ok, BACKWARD)
    freeflow[~nodes] = np.inf
    return nodes, arc_ok, freeflow


def select_successors(vals: np.ndarray, starts: np.ndarray, heads: np.ndarray):
    """Row-group maxima and lowest-id near-argmax.

    ``vals`` holds one row per arc, grouped contiguously by tail with heads
    ascending inside a group; ``starts`` are the group offsets.  Returns the
    per-group maximum and the chosen head (-1 where the maximum is zero).
    """
    best = np.maximum.reduceat(vals, starts, axis=0)
    sizes = np.diff(np.append(starts, len(vals)))
    group = np.repeat(np.arange(len(starts)), sizes)
    ok = (vals > 0) & (vals >= best[group] - TIE_TOL)
    cand = np.where(ok, heads[:, None].astype(np.int64), _NO_NEXT)
    nxt = np.minimum.reduceat(cand, starts, axis=0)
    nxt[nxt == _NO_NEXT] = -1
    return best, nxt


def _block_direct(window: np.ndarray, rev: np.ndarray) -> np.ndarray:
    width = rev.shape[1]
    return np.einsum("ajl,al->aj", sliding_window_view(window, width, axis=1), rev)


def _block_fft(window: np.ndarray, rev: np.ndarray) -> np.ndarray:
    return fftconvolve(window, rev[:, ::-1], mode="valid", axes=1)


def solve_label_setting(sg: StochasticGraph, target: int, budget: int, mask=None,
                        stop_source: int | None = None, fft: bool = False) -> tuple[Policy, SolveStats]:
    """Block-wise label-setting solve, optionally restricted to a node mask.

    With ``stop_source`` the sweep ends after the first block in which that
    node's arrival probability reaches one, and the budget shrinks to the first
    such step.  ``fft`` evaluates the block products in the frequency domain;
    the convolution count is the same either way.
    """
    kernel = _block_fft if fft else _block_direct
    nodes, arc_ok, freeflow = _setup(sg, target, budget, mask)
    g = sg.graph
    n, T = sg.n, budget
    offsets = sg.offsets
    delta = int(offsets[arc_ok].min()) if arc_ok.any() else 1
    stats = SolveStats(block_size=delta)

    # an arc first contributes once tau reaches its offset plus the head's free-flow distance
    ready = offsets + freeflow[g.dst]
    plans = []
    pad = 1
    for width, ids, rev in sg.kernel_buckets():
        keep = arc_ok[ids] & np.isfinite(ready[ids])
        ids, rev = ids[keep], rev[keep]
        order = np.argsort(ready[ids], kind="stable")
        ids, rev = ids[order], rev[order]
        if len(ids):
            pad = max(pad, int(offsets[ids].max()) + width)
            plans.append((width, ids, rev, ready[ids]))

    P = np.zeros((n, pad + T + 1))
    P[target, pad:] = 1.0
    nxt = np.full((n, T + 1), -1, dtype=np.int32)
    touched = np.zeros(n, dtype=bool)
    final_T = T

    for lo in range(0, T + 1, delta):
        hi = min(lo + delta, T + 1)
        w = hi - lo
        part_ids, part_vals = [], []
        for width, ids, rev, rdy in plans:
            k = int(np.searchsorted(rdy, hi - 1, side="right"))
            if k == 0:
                continue
            a = ids[:k]
            start = pad + lo - offsets[a] - width + 1
            cols = start[:, None] + np.arange(width + w - 1)
            window = P[g.dst[a][:, None], cols]
            vals = kernel(window, rev[:k])
            part_ids.append(a)
            part_vals.append(vals)
        if not part_ids:
            continue
        arcs = np.concatenate(part_ids)
        vals = np.concatenate(part_vals)
        order = np.argsort(arcs, kind="stable")
        arcs, vals = arcs[order], vals[order]
        tails = g.src[arcs]
        starts = np.flatnonzero(np.r_[True, tails[1:] != tails[:-1]])
        best, choice = select_successors(vals, starts, g.dst[arcs])
        us = tails[starts]
        P[us, pad + lo:pad + hi] = best
        nxt[us, lo:hi] = choice
        touched[us] = True
        stats.convolutions += len(arcs)
        stats.order_len += len(us)
        stats.blocks += 1
        if stop_source is not None and P[stop_source, pad + hi - 1] >= CERTAIN:
            final_T = lo + int(np.argmax(P[stop_source, pad + lo:pad + hi] >= CERTAIN))
            break

    stats.touched_nodes = int(touched.sum())
    prob = P[:, pad:pad + final_T + 1].copy()
    policy = Policy(target, final_T, prob, nxt[:, :final_T + 1].copy(), freeflow)
    return policy, stats


def solve_successive_approx(sg: StochasticGraph, target: int, budget: int, mask=None,
                            max_iter: int = 10_000, eps: float = 1e-14) -> Policy:
    """Jacobi fixed-point iteration of the policy equations from prob = 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    nodes, arc_ok, freeflow = _setup(sg, target, budget, mask)
    g = sg.graph
    T = budget
    kernels = {a: sg.pdfs[a].dense(T + 1) for a in np.flatnonzero(arc_ok)}
    by_tail = {}
    for a in kernels:
        by_tail.setdefault(int(g.src[a]), []).append(a)

    prob = np.zeros((sg.n, T + 1))
    prob[target] = 1.0
    nxt = np.full((sg.n, T + 1), -1, dtype=np.int32)
    for _ in range(max_iter):
        new = np.zeros_like(prob)
        new[target] = 1.0
        for u, arcs in by_tail.items():
            vals = np.stack([np.convolve(kernels[a], prob[g.dst[a]])[:T + 1] for a in arcs])
            best, choice = select_successors(vals, np.array([0]), g.dst[arcs])
            new[u] = best[0]
            nxt[u] = choice[0]
        change = np.abs(new - prob).max()
        prob = new
        if change < eps:
            return Policy(target, T, prob, nxt, freeflow)
    raise ConvergenceError(f"no convergence within {max_iter} iterations (last change {change:.3g})")


# --- a-posteriori ordering -------------------------------------------------

def extract_optimal_order(sg: StochasticGraph, policy: Policy, source: int, budget: int | None = None):
    """Nodes the policy can actually visit from ``source`` within the budget."""
    from .pruning import PruneSet

    T = policy.budget if budget is None else min(budget, policy.budget)
    bound = {source: T}
    work = [source]
    g = sg.graph
    while work:
        u = work.pop()
        beta = bound[u]
        if u == policy.target:
            continue
        for v in np.unique(policy.next[u, :beta + 1]):
            if v < 0:
                continue
            rest = beta - int(sg.offsets[g.arc_id(u, int(v))])
            if rest > bound.get(int(v), -1):
                bound[int(v)] = rest
                work.append(int(v))
    mask = np.zeros(sg.n, dtype=bool)
    mask[list(bound)] = True
    return PruneSet(mask, "optimal", {"source": source, "budget": T})


def rerun_on_order(sg: StochasticGraph, target: int, budget: int, order,
                   fft: bool = False) -> tuple[Policy, SolveStats]:
    mask = node_mask(sg.n, order)
    mask[target] = True
    return solve_label_setting(sg, target, budget, mask, fft=fft)


# --- queries on a solved policy ---------------------------------------------

def budget_for_probability(policy: Policy, source: int, p: float, freeflow: float | None = None) -> float:
    """Smallest budget reaching arrival probability ``p``, relative to free flow."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    reach = np.flatnonzero(policy.prob[source] >= p - 1e-9)
    if reach.size == 0:
        raise InsufficientBudget(f"arrival probability {p} not reached within budget {policy.budget}")
    ref = policy.freeflow[source] if freeflow is None else freeflow
    if not ref > 0:
        raise ValueError("free-flow distance must be positive")
    return float(reach[0]) / float(ref)


@dataclass(frozen=True)
class SimulationResult:
    rate: float
    ci_low: float
    ci_high: float
    samples: int


def simulate_policy(sg: StochasticGraph, policy: Policy, source: int, budget: int | None = None,
                    n_samples: int = 100_000, seed: int = 0) -> SimulationResult:
    """Monte Carlo replay of the policy with independently sampled arc times.

    Reaching the target with non-negative remaining budget is a success;
    overrunning the budget or reaching a node without a successor is a failure.
    The interval is a 99% normal approximation.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    T = policy.budget if budget is None else budget
    if T > policy.budget:
        raise ValueError("budget exceeds the solved range")
    g = sg.graph
    rng = np.random.default_rng(seed)
    node = np.full(n_samples, source, dtype=np.int64)
    tau = np.full(n_samples, T, dtype=np.int64)
    alive = np.full(n_samples, source != policy.target)
    success = np.full(n_samples, source == policy.target)
    keys = g.src * g.n + g.dst
    cdfs: dict[int, np.ndarray] = {}
    while alive.any():
        idx = np.flatnonzero(alive)
        u, tt = node[idx], tau[idx]
        v = policy.next[u, tt].astype(np.int64)
        stuck = v < 0
        alive[idx[stuck]] = False
        idx, u, v, tt = idx[~stuck], u[~stuck], v[~stuck], tt[~stuck]
        arcs = np.searchsorted(keys, u * g.n + v)
        draw = rng.random(len(idx))
        omega = np.empty(len(idx), dtype=np.int64)
        for a in np.unique(arcs):
            sel = arcs == a
            if a not in cdfs:
                cdfs[a] = np.cumsum(sg.pdfs[a].mass)
            k = np.searchsorted(cdfs[a], draw[sel], side="right")
            # draws beyond the total mass never arrive
            omega[sel] = np.where(k < len(cdfs[a]), sg.pdfs[a].offset + k, T + 1)
        rest = tt - omega
        late = rest < 0
        alive[idx[late]] = False
        arrived = ~late & (v == policy.target)
        success[idx[arrived]] = True
        alive[idx[arrived]] = False
        go = ~late & ~arrived
        node[idx[go]] = v[go]
        tau[idx[go]] = rest[go]
    rate = float(success.mean())
    half = 2.5758293035489 * float(np.sqrt(rate * (1 - rate) / n_samples))
    return SimulationResult(rate, max(0.0, rate - half), min(1.0, rate + half), n_samples)


# --- export ----------------------------------------------------------------

def write_policy(policy: Policy, path: str | Path) -> None:
    """Tabular dump: ``u tau prob next`` whenever (prob, next) changes along tau.

    The layout is for debugging and the simulator; it is not a stable format.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# nodes {policy.n} target {policy.target} budget {policy.budget}\n")
        for u in range(policy.n):
            p, nx = policy.prob[u], policy.next[u]
            change = np.flatnonzero((np.diff(p, prepend=0.0) != 0) | (np.diff(nx, prepend=-1) != 0))
            for tau in change:
                fh.write(f"{u} {tau} {float(p[tau])!r} {int(nx[tau])}\n")


def read_policy(path: str | Path) -> Policy:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    n, target, T = int(head[2]), int(head[4]), int(head[6])
    prob = np.zeros((n, T + 1))
    nxt = np.full((n, T + 1), -1, dtype=np.int32)
    for line in lines[1:]:
        u, tau, p, v = line.split()
        u, tau = int(u), int(tau)
        prob[u, tau:] = float(p)
        nxt[u, tau:] = int(v)
    freeflow = np.array([np.argmax(row > 0) if row[-1] > 0 else np.inf for row in prob], dtype=float)
    return Policy(target, T, prob, nxt, freeflow)
