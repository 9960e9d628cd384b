"""LFR-style planted-community benchmark graphs.

Power-law degrees and community sizes, a mixing fraction of each vertex's
edges leaving its communities, and optional overlapping memberships.  The
construction follows the usual LFR recipe (sample degrees, sample sizes,
assign memberships under capacity, wire internal stubs per community and
external stubs globally), with configuration-model pairing repaired by edge
swaps.  It is not byte-compatible with the reference LFR program.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ModqueryError, PreconditionError
from .graph import Graph, LabelSet, largest_connected_component

log = logging.getLogger(__name__)


class LfrError(ModqueryError, RuntimeError):
    """Wiring could not produce a simple graph within the retry budget."""


@dataclass(frozen=True)
class LfrConfig:
    n: int = 1000
    avg_degree: float = 20.0
    max_degree: int = 50
    tau_degree: float = 2.0
    tau_community: float = 1.0
    min_community: int = 10
    max_community: int = 100
    mixing: float = 0.3
    overlap_fraction: float = 0.0
    memberships_per_overlap: int = 4
    rng_seed: int = 0
    take_lcc: bool = True

    def __post_init__(self):
        if not 0.0 <= self.mixing <= 1.0:
            raise PreconditionError(f"mixing must lie in [0, 1], got {self.mixing}")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise PreconditionError(f"overlap_fraction must lie in [0, 1], got {self.overlap_fraction}")
        if self.min_community < 3:
            raise PreconditionError("min_community must be >= 3")
        if self.max_community < self.min_community:
            raise PreconditionError("max_community must be >= min_community")
        if not 2 <= self.memberships_per_overlap <= 4:
            raise PreconditionError("memberships_per_overlap must lie in [2, 4]")
        if self.max_degree >= self.n:
            raise PreconditionError(f"max_degree ({self.max_degree}) must be < n ({self.n})")
        if not 1.0 <= self.avg_degree <= self.max_degree:
            raise PreconditionError("avg_degree must lie in [1, max_degree]")


@dataclass(frozen=True, eq=False)
class SyntheticNetwork:
    graph: Graph
    truth: LabelSet
    realized_mixing: float
    config: LfrConfig
    stats: dict

    def manifest(self) -> dict:
        return {
            "config": asdict(self.config),
            "n": self.graph.n,
            "m": self.graph.m,
            "communities": len(self.truth),
            "realized_mixing": self.realized_mixing,
            **self.stats,
        }


def _powerlaw_sample(rng, size, tau, lo, hi):
    """Continuous power law ``p(x) ~ x^-tau`` truncated to ``[lo, hi]``."""
    u = rng.random(size)
    if abs(tau - 1.0) < 1e-12:
        return lo * (hi / lo) ** u
    a = 1.0 - tau
    return (lo ** a + u * (hi ** a - lo ** a)) ** (1.0 / a)


def _powerlaw_mean(tau, lo, hi):
    if abs(tau - 1.0) < 1e-12:
        return (hi - lo) / np.log(hi / lo)
    if abs(tau - 2.0) < 1e-12:
        return np.log(hi / lo) / (1.0 / lo - 1.0 / hi)
    a = 1.0 - tau
    b = 2.0 - tau
    return (a / b) * (hi ** b - lo ** b) / (hi ** a - lo ** a)


def sample_degrees(rng, cfg: LfrConfig) -> np.ndarray:
    """Integer degrees whose expected mean is ``avg_degree``.

    The lower cutoff of the power law is found by bisection.
    """
    hi = float(cfg.max_degree)
    lo, top = 1.0, hi
    if _powerlaw_mean(cfg.tau_degree, 1.0, hi) > cfg.avg_degree:
        raise PreconditionError("avg_degree too small for this degree exponent and max_degree")
    for _ in range(200):
        mid = 0.5 * (lo + top)
        if _powerlaw_mean(cfg.tau_degree, mid, hi) < cfg.avg_degree:
            lo = mid
        else:
            top = mid
    kmin = 0.5 * (lo + top)
    deg = np.rint(_powerlaw_sample(rng, cfg.n, cfg.tau_degree, kmin, hi)).astype(np.int64)
    return np.clip(deg, 1, cfg.max_degree)


def sample_community_sizes(rng, cfg: LfrConfig, total: int) -> np.ndarray:
    """Integer sizes within bounds summing exactly to ``total`` memberships."""
    if total < cfg.min_community:
        raise PreconditionError("too few memberships for a single community of min_community")
    for _ in range(1000):
        sizes = []
        acc = 0
        while acc < total:
            s = int(np.rint(_powerlaw_sample(rng, 1, cfg.tau_community,
                                             cfg.min_community, cfg.max_community)[0]))
            sizes.append(s)
            acc += s
        sizes = np.array(sizes, dtype=np.int64)
        excess = acc - total
        slack = sizes - cfg.min_community
        if slack.sum() < excess:
            continue
        # shave the excess off the largest communities first
        for i in np.argsort(-sizes, kind="stable"):
            take = min(excess, sizes[i] - cfg.min_community)
            sizes[i] -= take
            excess -= take
            if excess == 0:
                break
        return sizes
    raise PreconditionError("could not draw community sizes matching the membership total")


def _assign(rng, need, memberships, sizes):
    """Place every (vertex, slot) into a community.

    ``need[v]`` is the internal degree vertex ``v`` must fit into each of its
    communities.  Slots are placed in order of decreasing need, each into a
    random community with spare capacity (weighted by that capacity) that
    can host the need and does not already hold the vertex.  Returns the
    per-community member lists.
    """
    n = len(need)
    slots = np.repeat(np.arange(n), memberships)
    slots = slots[rng.permutation(len(slots))]
    slots = slots[np.argsort(-need[slots], kind="stable")]
    cap = sizes.copy()
    member_sets = [set() for _ in sizes]
    where = [set() for _ in range(n)]
    for v in slots.tolist():
        ok = (cap > 0) & (sizes - 1 >= need[v])
        ok &= np.array([c not in where[v] for c in range(len(sizes))])
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            ok = (cap > 0) & np.array([c not in where[v] for c in range(len(sizes))])
            cand = np.flatnonzero(ok)
        if cand.size == 0:
            # spare room only where v already is: swap v with a member u of
            # another community that u can leave for the roomy one
            roomy = int(np.flatnonzero(cap > 0)[0])
            placed = False
            for d in rng.permutation(len(sizes)).tolist():
                if d in where[v] or d == roomy:
                    continue
                movers = [u for u in sorted(member_sets[d]) if roomy not in where[u]]
                if movers:
                    u = movers[int(rng.integers(len(movers)))]
                    member_sets[d].discard(u)
                    where[u].discard(d)
                    member_sets[roomy].add(u)
                    where[u].add(roomy)
                    cap[roomy] -= 1
                    member_sets[d].add(v)
                    where[v].add(d)
                    placed = True
                    break
            if not placed:
                raise LfrError("could not place an overlapping membership")
            continue
        c = int(rng.choice(cand, p=cap[cand] / cap[cand].sum()))
        member_sets[c].add(v)
        where[v].add(c)
        cap[c] -= 1
    return [sorted(s) for s in member_sets], where


class _Wiring:
    """Edge set under construction, with stub pairing and swap repair."""

    def __init__(self, n, rng, max_tries):
        self.n = n
        self.rng = rng
        self.max_tries = max_tries
        self.edges = set()
        self.dropped = 0
        self.repaired = 0

    @staticmethod
    def key(u, v):
        return (u, v) if u < v else (v, u)

    def pair(self, stubs, allowed):
        """Pair stubs at random; bad pairs are repaired by swapping with
        edges created in this call, or dropped."""
        stubs = np.asarray(stubs, dtype=np.int64)
        if len(stubs) % 2:
            raise ValueError("odd number of stubs")
        stubs = stubs[self.rng.permutation(len(stubs))]
        local = []
        bad = []
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            k = self.key(a, b)
            if a != b and k not in self.edges and allowed(a, b):
                self.edges.add(k)
                local.append(k)
            else:
                bad.append((a, b))
        for a, b in bad:
            if not self._repair(a, b, local, allowed):
                self.dropped += 2
        return local

    def _repair(self, a, b, local, allowed):
        for _ in range(self.max_tries):
            if not local:
                return False
            pos = int(self.rng.integers(len(local)))
            x, y = local[pos]
            if self.rng.random() < 0.5:
                x, y = y, x
            k1, k2 = self.key(a, x), self.key(b, y)
            if (a != x and b != y and k1 != k2 and k1 not in self.edges and k2 not in self.edges
                    and allowed(a, x) and allowed(b, y)):
                self.edges.discard(local[pos])
                self.edges.add(k1)
                self.edges.add(k2)
                local[pos] = k1
                local.append(k2)
                self.repaired += 1
                return True
        return False


def generate(cfg: LfrConfig) -> SyntheticNetwork:
    rng = np.random.default_rng(cfg.rng_seed)
    n = cfg.n
    deg = sample_degrees(rng, cfg)

    memberships = np.ones(n, dtype=np.int64)
    n_over = int(round(cfg.overlap_fraction * n))
    over = rng.choice(n, size=n_over, replace=False) if n_over else np.array([], dtype=np.int64)
    if n_over:
        memberships[over] = rng.integers(2, cfg.memberships_per_overlap + 1, size=n_over)
    total = int(memberships.sum())
    sizes = sample_community_sizes(rng, cfg, total)
    if len(sizes) < memberships.max():
        raise PreconditionError("fewer communities than memberships per overlapping vertex")

    internal = np.rint((1.0 - cfg.mixing) * deg).astype(np.int64)
    need = -(-internal // memberships)
    comms, where = _assign(rng, need, memberships, sizes)

    # split each vertex's internal quota equally over its communities, the
    # remainder going to the largest one; clip to what the community can host
    share = {}
    external = deg - internal
    clipped = 0
    for v in range(n):
        cs = sorted(where[v], key=lambda c: (-len(comms[c]), c))
        base, rem = divmod(int(internal[v]), len(cs))
        for j, c in enumerate(cs):
            want = base + (rem if j == 0 else 0)
            got = min(want, len(comms[c]) - 1)
            clipped += want - got
            external[v] += want - got
            share[v, c] = got

    wiring = _Wiring(n, rng, max_tries=200)
    parity_moves = 0
    for c, members in enumerate(comms):
        quota = np.array([share[v, c] for v in members], dtype=np.int64)
        if quota.sum() % 2:
            j = int(np.argmax(quota))
            quota[j] -= 1
            external[members[j]] += 1
            parity_moves += 1
        stubs = np.repeat(np.array(members, dtype=np.int64), quota)
        wiring.pair(stubs, lambda a, b: True)

    discarded = 0
    if cfg.mixing == 0.0:
        # parity and clipping surplus would otherwise create cross edges
        discarded = int(external.sum())
        external[:] = 0
    if external.sum() % 2:
        candidates = np.flatnonzero(external > 0)
        external[candidates[int(rng.integers(len(candidates)))]] -= 1
    shared = [frozenset(w) for w in where]
    stubs = np.repeat(np.arange(n, dtype=np.int64), external)
    wiring.pair(stubs, lambda a, b: shared[a].isdisjoint(shared[b]))

    total_stubs = int(deg.sum())
    if wiring.dropped > 0.02 * total_stubs:
        raise LfrError(f"wiring dropped {wiring.dropped} of {total_stubs} stubs; "
                       "configuration is too tight (try lower max_degree or larger communities)")

    edges = np.array(sorted(wiring.edges), dtype=np.int64).reshape(-1, 2)
    g = Graph.from_edges(n, edges[:, 0], edges[:, 1])
    if cfg.take_lcc:
        g = largest_connected_component(g)
    lookup = g.id_lookup
    truth = []
    for c, members in enumerate(comms):
        kept = frozenset(lookup[str(v)] for v in members if str(v) in lookup)
        if kept:
            truth.append((f"c{c}", kept))
    net_truth = LabelSet(tuple(truth))
    stats = {
        "dropped_stubs": wiring.dropped,
        "discarded_surplus_stubs": discarded,
        "repaired_pairs": wiring.repaired,
        "clipped_internal_stubs": int(clipped),
        "mean_degree": float(g.degrees.mean()),
        "max_degree_realized": int(g.degrees.max()),
        "overlapping_vertices": n_over,
        "vertices_outside_lcc": n - g.n,
    }
    realized = measure_mixing_of(g, net_truth)
    return SyntheticNetwork(g, net_truth, realized, cfg, stats)


def measure_mixing_of(g: Graph, truth: LabelSet) -> float:
    """Fraction of edge endpoints whose neighbour shares none of their communities."""
    memb = [frozenset(x) for x in truth.memberships(g.n)]
    u, v, _ = g.edges()
    if len(u) == 0:
        return 0.0
    across = sum(1 for a, b in zip(u.tolist(), v.tolist()) if memb[a].isdisjoint(memb[b]))
    return across / len(u)


def measure_mixing(net: SyntheticNetwork) -> float:
    return measure_mixing_of(net.graph, net.truth)
