"""Greedy Louvain modularity optimisation from an arbitrary start partition.

The local-move phase runs in a numba kernel.  Vertex scan order is a
Fisher-Yates shuffle driven by an in-kernel SplitMix64 stream, so results
are reproducible bit for bit from ``rng_seed``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .partition import Partition, densify, modularity
from .errors import PreconditionError

# Smallest modularity gain for which a single move is carried out.  Guards
# against ping-ponging between partitions whose Q differs only by rounding.
MOVE_EPS = 1e-13


@dataclass(frozen=True)
class LouvainConfig:
    min_delta_q: float = 1e-9
    rng_seed: int = 0
    max_levels: int = 64
    shuffle: bool = True

    def __post_init__(self):
        if not self.min_delta_q > 0:
            raise ValueError("min_delta_q must be positive")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")


@dataclass(frozen=True, eq=False)
class LouvainResult:
    partition: Partition
    q: float
    levels: int
    moves: int
    # modularity after every local-move pass, starting with the start partition
    q_trace: tuple


@numba.njit(cache=True, nogil=True)
def _next(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _modularity_kernel(indptr, indices, weights, degrees, labels, two_m):
    n = len(degrees)
    tot = np.zeros(n)
    win = 0.0
    for i in range(n):
        tot[labels[i]] += degrees[i]
        for e in range(indptr[i], indptr[i + 1]):
            if labels[indices[e]] == labels[i]:
                win += weights[e]
    q = win / two_m
    for c in range(n):
        q -= (tot[c] / two_m) ** 2
    return q


@numba.njit(cache=True, nogil=True)
def _local_moves(indptr, indices, weights, degrees, labels, two_m, state,
                 shuffle, min_delta_q, move_eps, q_trace):
    """Move vertices greedily until a pass gains less than ``min_delta_q``.

    ``labels`` (values in ``[0, n)``) is updated in place.  Returns
    ``(moves, passes, state)``; the modularity after each pass is written to
    ``q_trace``.
    """
    n = len(degrees)
    m = two_m / 2.0
    tot = np.zeros(n)
    size = np.zeros(n, np.int64)
    for i in range(n):
        tot[labels[i]] += degrees[i]
        size[labels[i]] += 1
    empty = np.empty(n, np.int64)
    n_empty = 0
    for c in range(n - 1, -1, -1):
        if size[c] == 0:
            empty[n_empty] = c
            n_empty += 1
    link = np.zeros(n)
    mark = np.full(n, -1, np.int64)
    touched = np.empty(n, np.int64)
    order = np.arange(n)
    stamp = 0
    moves = 0
    passes = 0
    while passes < len(q_trace):
        if shuffle:
            for k in range(n - 1, 0, -1):
                state, r = _next(state)
                j = np.int64(r % np.uint64(k + 1))
                t = order[k]
                order[k] = order[j]
                order[j] = t
        pass_moves = 0
        pass_gain = 0.0
        for idx in range(n):
            i = order[idx]
            ci = labels[i]
            ki = degrees[i]
            stamp += 1
            cnt = 0
            for e in range(indptr[i], indptr[i + 1]):
                j = indices[e]
                if j == i:
                    continue
                c = labels[j]
                if mark[c] != stamp:
                    mark[c] = stamp
                    link[c] = 0.0
                    touched[cnt] = c
                    cnt += 1
                link[c] += weights[e]
            tot[ci] -= ki
            own = link[ci] if mark[ci] == stamp else 0.0
            own_gain = own - tot[ci] * ki / two_m
            best = -1
            best_gain = 0.0
            for t in range(cnt):
                c = touched[t]
                if c == ci:
                    continue
                g = link[c] - tot[c] * ki / two_m
                if best < 0 or g > best_gain or (g == best_gain and c < best):
                    best = c
                    best_gain = g
            # an empty community has gain exactly 0; only an option when
            # every neighbouring community is worse and i is not alone
            if (best < 0 or best_gain < 0.0) and size[ci] > 1 and n_empty > 0:
                best = empty[n_empty - 1]
                best_gain = 0.0
            if best >= 0 and (best_gain - own_gain) / m > move_eps:
                if size[best] == 0:
                    n_empty -= 1
                labels[i] = best
                tot[best] += ki
                size[best] += 1
                size[ci] -= 1
                if size[ci] == 0:
                    empty[n_empty] = ci
                    n_empty += 1
                pass_moves += 1
                pass_gain += (best_gain - own_gain) / m
            else:
                tot[ci] += ki
        q_trace[passes] = _modularity_kernel(indptr, indices, weights, degrees, labels, two_m)
        passes += 1
        moves += pass_moves
        if pass_moves == 0 or pass_gain < min_delta_q:
            break
    return moves, passes, state


def aggregate(g: Graph, labels) -> Graph:
    """Quotient graph: one supervertex per community of dense ``labels``.

    Matrix entries between communities are summed; the internal weight of a
    community becomes a self-loop entry ``A[c, c] = 2 W_in(c)``, which keeps
    degrees and modularity unchanged.
    """
    labels = np.asarray(labels, dtype=np.int64)
    c = int(labels.max()) + 1
    rows = np.repeat(labels, np.diff(g.indptr))
    mat = sp.csr_matrix((g.weights, (rows, labels[g.indices])), shape=(c, c))
    mat.sum_duplicates()
    mat.sort_indices()
    return Graph(mat.indptr, mat.indices, mat.data, [str(i) for i in range(c)])


def delta_q_move(g: Graph, labels, vertex: int, target: int) -> float:
    """Exact change in modularity when ``vertex`` moves to community ``target``.

    ``target`` may be a label not currently used (an empty community).
    """
    labels = np.asarray(labels)
    m = g.total_weight / 2.0
    ki = g.degrees[vertex]
    own = labels[vertex]
    if target == own:
        return 0.0
    nbrs, w = g.neighbors(vertex)
    not_self = nbrs != vertex
    k_own = w[not_self & (labels[nbrs] == own)].sum()
    k_tgt = w[not_self & (labels[nbrs] == target)].sum()
    tot_own = g.degrees[labels == own].sum() - ki
    tot_tgt = g.degrees[labels == target].sum()
    remove = -(k_own / m - tot_own * ki / (2.0 * m * m))
    insert = k_tgt / m - tot_tgt * ki / (2.0 * m * m)
    return float(remove + insert)


def _run_level(g: Graph, labels: np.ndarray, state, cfg: LouvainConfig, trace: list):
    buf = np.zeros(max(4 * g.n, 1024))
    moves, passes, state = _local_moves(
        g.indptr, g.indices, g.weights, g.degrees, labels, g.total_weight,
        np.uint64(state), cfg.shuffle, cfg.min_delta_q, MOVE_EPS, buf)
    trace.extend(buf[:passes].tolist())
    return int(moves), state


def louvain(g: Graph, start: Partition, cfg: LouvainConfig = LouvainConfig()) -> LouvainResult:
    """Run Louvain on ``g`` from ``start`` until no move improves modularity.

    One sweep is a local-move phase on the original vertices followed by the
    usual aggregate-and-move cycle, which stops at the first level without
    moves.  Sweeps repeat while any aggregated level moved something, so the
    result admits no improving single-vertex move and re-running from it
    makes zero moves.
    """
    if start.n != g.n:
        raise PreconditionError(f"start partition covers {start.n} vertices, graph has {g.n}")
    if g.total_weight <= 0:
        raise PreconditionError("graph has no edges")
    labels = np.array(start.labels, dtype=np.int64)
    state = np.uint64(cfg.rng_seed & 0xFFFFFFFFFFFFFFFF)
    trace = [modularity(g, start)]
    total_moves = 0
    levels = 0
    while True:
        moved, state = _run_level(g, labels, state, cfg, trace)
        total_moves += moved
        labels = densify(labels)
        membership = labels
        level_graph, level_labels = g, labels
        agg_moves = 0
        while levels < cfg.max_levels:
            level_graph = aggregate(level_graph, level_labels)
            levels += 1
            level_labels = np.arange(level_graph.n, dtype=np.int64)
            moved, state = _run_level(level_graph, level_labels, state, cfg, trace)
            if moved == 0:
                break
            agg_moves += moved
            level_labels = densify(level_labels)
            membership = level_labels[membership]
        total_moves += agg_moves
        labels = membership
        if agg_moves == 0 or levels >= cfg.max_levels:
            break
    part = Partition.from_labels(g, labels)
    return LouvainResult(part, modularity(g, part), levels, total_moves, tuple(trace))
