"""Partitions of a graph, modularity, and random cut-set starting partitions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._io import atomic_write
from .graph import Graph
from .errors import PreconditionError

ORACLE_MAX_N = 2000


def densify(labels) -> np.ndarray:
    """Relabel to ``0..C-1`` ordered by each community's smallest member."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    """Non-overlapping assignment of every vertex of a graph to a community.

    ``sigma_tot[c]`` is the total weighted degree of community ``c`` and
    ``sigma_in[c]`` its total internal edge weight (each edge once; a
    self-loop contributes its loop weight).
    """

    labels: np.ndarray
    sigma_tot: np.ndarray = field(repr=False)
    sigma_in: np.ndarray = field(repr=False)

    @classmethod
    def from_labels(cls, g: Graph, labels) -> "Partition":
        labels = np.asarray(labels)
        if labels.shape != (g.n,):
            raise PreconditionError(f"partition covers {labels.size} vertices, graph has {g.n}")
        labels = densify(labels)
        labels.setflags(write=False)
        tot, win = community_weights(g, labels)
        return cls(labels, tot, win)

    @classmethod
    def singletons(cls, g: Graph) -> "Partition":
        return cls.from_labels(g, np.arange(g.n))

    @classmethod
    def whole(cls, g: Graph) -> "Partition":
        return cls.from_labels(g, np.zeros(g.n, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def community_count(self) -> int:
        return len(self.sigma_tot)

    def members(self) -> list:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(np.bincount(self.labels, minlength=self.community_count))[:-1]
        return np.split(order, bounds)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())


def community_weights(g: Graph, labels):
    """``(sigma_tot, sigma_in)`` per community for dense ``labels``."""
    labels = np.asarray(labels)
    c = int(labels.max()) + 1 if labels.size else 0
    tot = np.bincount(labels, weights=g.degrees, minlength=c)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    same = labels[rows] == labels[g.indices]
    # matrix entries count every internal edge twice (loops store 2w)
    win = np.bincount(labels[rows[same]], weights=g.weights[same], minlength=c) / 2.0
    return tot, win


def _labels_of(g: Graph, part) -> np.ndarray:
    labels = part.labels if isinstance(part, Partition) else np.asarray(part)
    if labels.shape != (g.n,):
        raise PreconditionError(f"partition covers {labels.size} vertices, graph has {g.n}")
    return labels


def modularity(g: Graph, part) -> float:
    """Modularity of ``part`` in the community-summed form.

    ``Q = sum_c W_in(c)/M - (Sigma_tot(c)/2M)^2`` where ``M`` is the total
    edge weight.  Accepts a :class:`Partition` or a raw label array.
    """
    labels = _labels_of(g, part)
    if isinstance(part, Partition):
        tot, win = part.sigma_tot, part.sigma_in
    else:
        tot, win = community_weights(g, densify(labels))
    two_m = g.total_weight
    return float(np.sum(win) / (two_m / 2.0) - np.sum((tot / two_m) ** 2))


def pairwise_modularity_oracle(g: Graph, part) -> float:
    """Modularity by the literal double sum over vertex pairs.

    ``(1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)``.  Quadratic in
    ``n``; intended as a test oracle.
    """
    if g.n > ORACLE_MAX_N:
        raise PreconditionError(f"pairwise oracle limited to n <= {ORACLE_MAX_N}")
    labels = _labels_of(g, part)
    a = g.to_scipy().toarray()
    k = a.sum(axis=1)
    two_m = k.sum()
    total = 0.0
    for i in range(g.n):
        same = labels == labels[i]
        total += np.sum(a[i, same] - k[i] * k[same] / two_m)
    return float(total / two_m)


@dataclass(frozen=True)
class CutSeedConfig:
    p_cut: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_cut <= 1.0:
            raise ValueError(f"p_cut must lie in [0, 1], got {self.p_cut}")


def random_cut_partition(g: Graph, cfg: CutSeedConfig) -> Partition:
    """Components of ``g`` after removing a random cut set.

    Every edge (in canonical ``u <= v`` order) is cut by an independent
    Bernoulli(``p_cut``) draw from a PCG64 stream seeded with ``rng_seed``.
    """
    u, v, _ = g.edges()
    rng = np.random.default_rng(cfg.rng_seed)
    keep = rng.random(len(u)) >= cfg.p_cut
    mat = sp.coo_matrix((np.ones(int(keep.sum())), (u[keep], v[keep])), shape=(g.n, g.n))
    _, comp = connected_components(mat, directed=False)
    return Partition.from_labels(g, comp)


def write_partition(g: Graph, part: Partition, path) -> None:
    atomic_write(path, "".join(f"{g.ids[i]}\t{c}\n" for i, c in enumerate(part.labels.tolist())))


def read_partition(g: Graph, path) -> Partition:
    labels = np.full(g.n, -1, dtype=np.int64)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                name, c = line.split()
                labels[g.id_lookup[name]] = int(c)
    if np.any(labels < 0):
        raise PreconditionError("partition file does not cover every vertex")
    return Partition.from_labels(g, labels)
