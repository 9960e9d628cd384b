"""Undirected graph substrate: loading, canonicalisation, components.

Graphs are stored in CSR form.  Row ``i`` lists the neighbours of vertex
``i`` in ascending order together with the edge weight.  A self-loop on
``i`` (only produced by Louvain aggregation) is stored as the matrix entry
``A[i, i]``, which carries *twice* the loop weight so that row sums are the
weighted degrees.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._io import atomic_write
from .errors import FormatError, PreconditionError

log = logging.getLogger(__name__)


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with dense integer vertex ids.

    Use :meth:`from_edges` rather than calling the constructor directly.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    ids: tuple
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "indptr", _frozen(self.indptr, np.int64))
        object.__setattr__(self, "indices", _frozen(self.indices, np.int64))
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))
        object.__setattr__(self, "ids", tuple(self.ids))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        deg = np.bincount(rows, weights=self.weights, minlength=self.n)
        object.__setattr__(self, "degrees", _frozen(deg, np.float64))

    @classmethod
    def from_edges(cls, n: int, src, dst, weights=None, ids: Sequence[str] | None = None,
                   allow_self_loops: bool = False) -> "Graph":
        """Build a canonical graph from an undirected edge list.

        Each ``(src[e], dst[e])`` pair is one undirected edge; duplicates are
        summed.  For a self-loop ``(i, i)`` of weight ``w`` the stored matrix
        entry is ``2 w``.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
        if ids is None:
            ids = [str(i) for i in range(n)]
        if len(ids) != n:
            raise ValueError(f"id table has {len(ids)} entries for {n} vertices")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("edge weights must be finite and non-negative")
        loops = src == dst
        if loops.any() and not allow_self_loops:
            raise ValueError("self-loops are not allowed in this graph")
        rows = np.concatenate([src, dst[~loops]])
        cols = np.concatenate([dst, src[~loops]])
        data = np.concatenate([np.where(loops, 2.0 * w, w), w[~loops]])
        mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        mat.sum_duplicates()
        mat.sort_indices()
        return cls(mat.indptr, mat.indices, mat.data, ids)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def m(self) -> int:
        """Number of undirected edges (a self-loop counts once)."""
        return (len(self.indices) + self.num_self_loops) // 2

    @property
    def num_self_loops(self) -> int:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return int(np.count_nonzero(rows == self.indices))

    @property
    def total_weight(self) -> float:
        """Sum of weighted degrees, i.e. ``2m`` for unit weights."""
        return float(self.degrees.sum())

    def neighbors(self, i: int):
        """``(neighbour ids, weights)`` of vertex ``i``, ascending by id."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def weight(self, i: int, j: int) -> float:
        nbrs, w = self.neighbors(i)
        k = np.searchsorted(nbrs, j)
        if k < len(nbrs) and nbrs[k] == j:
            return float(w[k])
        return 0.0

    def edges(self):
        """Arrays ``(u, v, w)`` with ``u <= v``, one row per undirected edge.

        Self-loop weights are reported as the loop weight (half the matrix
        entry).
        """
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = rows <= self.indices
        u, v, w = rows[keep], self.indices[keep], self.weights[keep].copy()
        w[u == v] /= 2.0
        return u, v, w

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    def index_of(self, names: Iterable[str]) -> list:
        """Internal ids for original ids; raises ``KeyError`` listing unknown ones."""
        lookup = self.id_lookup
        names = list(names)
        missing = [x for x in names if x not in lookup]
        if missing:
            raise KeyError(missing)
        return [lookup[x] for x in names]

    @property
    def id_lookup(self) -> dict:
        cache = self.__dict__.get("_lookup")
        if cache is None:
            cache = {name: i for i, name in enumerate(self.ids)}
            object.__setattr__(self, "_lookup", cache)
        return cache

    def fingerprint(self) -> int:
        """64-bit BLAKE2b digest of the canonical CSR arrays and id table."""
        h = hashlib.blake2b(digest_size=8)
        h.update(np.int64(self.n).tobytes())
        h.update(self.indptr.astype("<i8").tobytes())
        h.update(self.indices.astype("<i8").tobytes())
        h.update(self.weights.astype("<f8").tobytes())
        h.update("\n".join(self.ids).encode("utf-8"))
        return int.from_bytes(h.digest(), "little")

    def same_as(self, other: "Graph") -> bool:
        return (self.ids == other.ids
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights))

    def subgraph(self, vertices) -> "Graph":
        """Induced subgraph on ``vertices`` (kept in ascending id order)."""
        keep = np.unique(np.asarray(vertices, dtype=np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        u, v, w = self.edges()
        sel = (remap[u] >= 0) & (remap[v] >= 0)
        return Graph.from_edges(len(keep), remap[u[sel]], remap[v[sel]], w[sel],
                                ids=[self.ids[i] for i in keep],
                                allow_self_loops=self.num_self_loops > 0)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class LabelSet:
    """Possibly overlapping ground-truth communities over a graph's vertices."""

    communities: tuple
    dropped_members: int = 0
    excluded: int = 0

    def __len__(self):
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    @property
    def labels(self):
        return [lab for lab, _ in self.communities]

    def members(self, label) -> frozenset:
        for lab, mem in self.communities:
            if lab == label:
                return mem
        raise KeyError(label)

    def memberships(self, n: int) -> list:
        """Per-vertex list of community indices."""
        out = [[] for _ in range(n)]
        for c, (_, mem) in enumerate(self.communities):
            for v in mem:
                out[v].append(c)
        return out


def _tokens(line):
    line = line.strip()
    if not line or line.startswith("#"):
        return None
    return line.split()


def load_edge_list(path, nodes=None) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are comments.  A third token, if present, is a
    positive edge weight.  Duplicate edges are merged with their weights
    summed; self-loop lines are dropped.  Vertex ids are assigned in order of
    first appearance unless a node-table file ``nodes`` fixes the order.
    """
    lookup = {}
    names = []
    if nodes is not None:
        names = read_node_table(nodes)
        lookup = {x: i for i, x in enumerate(names)}
        if len(lookup) != len(names):
            raise FormatError(f"{nodes}: duplicate ids in node table")
    src, dst, wts = [], [], []
    loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = _tokens(line)
            if tok is None:
                continue
            if len(tok) < 2 or len(tok) > 3:
                raise FormatError(f"{path}:{lineno}: expected 2 or 3 tokens, got {len(tok)}")
            w = 1.0
            if len(tok) == 3:
                try:
                    w = float(tok[2])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad weight {tok[2]!r}") from None
                if not (w > 0 and np.isfinite(w)):
                    raise FormatError(f"{path}:{lineno}: weight must be positive, got {tok[2]!r}")
            a, b = tok[0], tok[1]
            if a == b:
                loops += 1
                continue
            for x in (a, b):
                if x not in lookup:
                    if nodes is not None:
                        raise FormatError(f"{path}:{lineno}: id {x!r} missing from node table")
                    lookup[x] = len(names)
                    names.append(x)
            src.append(lookup[a])
            dst.append(lookup[b])
            wts.append(w)
    if loops:
        log.warning("%s: dropped %d self-loop line(s)", path, loops)
    if not src:
        raise FormatError(f"{path}: no edges after cleaning")
    return Graph.from_edges(len(names), src, dst, wts, ids=names)


def write_edge_list(g: Graph, path, node_table: bool = True) -> None:
    """Write ``g`` as an edge list; the weight column is omitted for unit weights.

    With ``node_table`` a ``<path>.nodes`` sidecar is written too, which lets
    :func:`load_edge_list` restore the exact vertex order.
    """
    u, v, w = g.edges()
    unit = np.all(w == 1.0)
    lines = []
    for a, b, x in zip(u.tolist(), v.tolist(), w.tolist()):
        if unit:
            lines.append(f"{g.ids[a]}\t{g.ids[b]}\n")
        else:
            lines.append(f"{g.ids[a]}\t{g.ids[b]}\t{x!r}\n")
    atomic_write(path, "".join(lines))
    if node_table:
        write_node_table(g.ids, os.fspath(path) + ".nodes")


def write_node_table(ids, path) -> None:
    """One original id per line; line number (from 0) is the internal id."""
    atomic_write(path, "".join(f"{x}\n" for x in ids))


def read_node_table(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.rstrip("\n")]


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest connected component.

    Ties on size go to the component holding the smallest internal id
    (first appearance in the source file).  Vertex order is preserved.
    """
    if g.n <= 1:
        return g
    ncomp, comp = connected_components(g.to_scipy(), directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(comp)
    # connected_components numbers components by their smallest vertex,
    # so argmax picks the lowest-numbered one on ties
    best = int(np.argmax(sizes))
    return g.subgraph(np.flatnonzero(comp == best))


def load_label_set(path, g: Graph, min_size: int = 3) -> LabelSet:
    """Read communities (``label member member ...``) restricted to ``g``.

    Unknown member ids are dropped and counted; communities with fewer than
    ``min_size`` resolvable members are excluded.
    """
    lookup = g.id_lookup
    comms = []
    dropped = 0
    excluded = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = _tokens(line)
            if tok is None:
                continue
            label, raw = tok[0], tok[1:]
            members = {lookup[x] for x in raw if x in lookup}
            dropped += sum(1 for x in set(raw) if x not in lookup)
            if not members:
                log.warning("%s:%d: community %r has no vertices in the graph", path, lineno, label)
                excluded += 1
                continue
            if len(members) < min_size:
                excluded += 1
                continue
            comms.append((label, frozenset(members)))
    if dropped:
        log.info("%s: dropped %d member id(s) not present in the graph", path, dropped)
    if excluded:
        log.info("%s: excluded %d communities smaller than %d", path, excluded, min_size)
    return LabelSet(tuple(comms), dropped_members=dropped, excluded=excluded)


def write_label_set(labels: LabelSet, g: Graph, path) -> None:
    lines = []
    for lab, mem in labels:
        lines.append("\t".join([lab] + [g.ids[v] for v in sorted(mem)]) + "\n")
    atomic_write(path, "".join(lines))


def require_connected(g: Graph) -> None:
    if g.n == 0:
        raise PreconditionError("graph is empty")
    if g.n > 1:
        ncomp, _ = connected_components(g.to_scipy(), directed=False)
        if ncomp != 1:
            raise PreconditionError(f"graph has {ncomp} connected components; take the LCC first")
