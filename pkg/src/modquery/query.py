"""Expansion scores: how often each vertex shares a community with the seeds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ensemble import EnsembleIndex
from .errors import PreconditionError


class QueryError(PreconditionError):
    """Seed set is empty or names unknown vertices."""


def make_query(seeds: Iterable[int], n: int) -> tuple:
    """Validate and deduplicate internal seed ids; returns a sorted tuple."""
    s = sorted({int(x) for x in seeds})
    if not s:
        raise QueryError("seed set is empty")
    bad = [x for x in s if not 0 <= x < n]
    if bad:
        raise QueryError(f"unknown vertex id(s): {bad}")
    return tuple(s)


def resolve_seeds(ids, names: Iterable[str]) -> tuple:
    """Map original vertex ids to internal ids, listing every unresolved one."""
    lookup = {x: i for i, x in enumerate(ids)}
    names = list(names)
    missing = [x for x in names if x not in lookup]
    if missing:
        raise QueryError("unknown seed id(s): " + ", ".join(missing))
    return make_query((lookup[x] for x in names), len(lookup))


@dataclass(frozen=True, eq=False)
class QueryResult:
    """Per-vertex expansion scores for one seed set.

    ``scores[i] == counts[i] / denominators[i]`` where ``counts`` is the
    number of (partition, seed) pairs with the vertex co-clustered.  Seeds
    are scored against the other seeds only.
    """

    scores: np.ndarray
    counts: np.ndarray
    denominators: np.ndarray
    is_seed: np.ndarray
    seeds: tuple
    ids: tuple
    num_partitions: int


def cooccurrence_counts(idx: EnsembleIndex, seeds) -> np.ndarray:
    """Number of (partition, seed) pairs in which each vertex meets a seed.

    Uses a per-community seed tally and one gather over all partitions.
    """
    glob = idx.global_labels
    tally = np.bincount(glob[:, list(seeds)].ravel(), minlength=idx.total_communities)
    return tally[glob].sum(axis=0)


def expansion_scores(idx: EnsembleIndex, seeds) -> QueryResult:
    seeds = make_query(seeds, idx.n)
    P = idx.num_partitions
    s = len(seeds)
    counts = cooccurrence_counts(idx, seeds).astype(np.int64)
    denom = np.full(idx.n, P * s, dtype=np.int64)
    is_seed = np.zeros(idx.n, dtype=bool)
    is_seed[list(seeds)] = True
    if s >= 2:
        # drop each seed's pairing with itself (always co-clustered)
        counts[is_seed] -= P
        denom[is_seed] = P * (s - 1)
    else:
        # a lone seed is scored 1 against itself by convention
        counts[is_seed] = P
        denom[is_seed] = P
    scores = counts / denom
    return QueryResult(scores, counts, denom, is_seed, seeds, idx.ids, P)


def _rank(scores, is_seed, ids, include_seeds, top_k):
    order = np.lexsort((np.arange(len(scores)), -scores))
    if not include_seeds:
        order = order[~is_seed[order]]
    if top_k is not None:
        order = order[:top_k]
    return [(ids[i], float(scores[i])) for i in order]


def rank_query(res: QueryResult, include_seeds: bool = False, top_k: int | None = None) -> list:
    """``(original id, score)`` pairs, best first; ties by internal id."""
    return _rank(res.scores, res.is_seed, res.ids, include_seeds, top_k)


def seed_cohesion(res: QueryResult):
    """Mean leave-one-out score of the seeds, or ``None`` for a single seed."""
    if len(res.seeds) < 2:
        return None
    return float(res.scores[res.is_seed].mean())
