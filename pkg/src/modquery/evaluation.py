"""Cross-validation of seed-set expansion against ground-truth communities.

For every community and seed size ``s``, up to ``max_subsets`` seed subsets
are drawn from the community.  Each subset is scored by every method; the
positives are the other members of *all* communities containing the whole
subset, the negatives are every remaining non-seed vertex.  Per-trial ROC
curves are vertically averaged on a fixed FPR grid and per-trial AUCs are
summarised by their mean and standard deviation.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ._seeding import seed_from_key
from .ensemble import EnsembleIndex
from .errors import FingerprintError, PreconditionError
from .graph import Graph, LabelSet
from .query import expansion_scores
from .rwr import RwrConfig, rwr_scores_batch, transition_matrix

log = logging.getLogger(__name__)

METHODS = ("expansion", "rwr")


@dataclass(frozen=True)
class EvalConfig:
    seed_sizes: tuple = (3, 7, 15)
    max_subsets: int = 120
    rng_seed: int = 0
    roc_grid_points: int = 1001
    methods: tuple = METHODS
    rwr: RwrConfig = field(default_factory=RwrConfig)
    workers: int = 1

    def __post_init__(self):
        if any(s < 1 for s in self.seed_sizes):
            raise ValueError("seed sizes must be >= 1")
        if self.max_subsets < 1:
            raise ValueError("max_subsets must be >= 1")
        if self.roc_grid_points < 2:
            raise ValueError("roc_grid_points must be >= 2")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown method(s): {sorted(bad)}")


@dataclass(frozen=True, eq=False)
class QueryTrial:
    community: str
    seeds: tuple
    positives: np.ndarray
    negatives: np.ndarray


@dataclass(frozen=True, eq=False)
class RocSummary:
    method: str
    seed_size: int
    fpr: np.ndarray
    mean_tpr: np.ndarray
    mean_auc: float
    std_auc: float
    n_trials: int
    # label -> (mean AUC, number of trials)
    per_community: dict

    @property
    def curve_auc(self) -> float:
        """Trapezoidal area under the stored mean curve."""
        return float(np.sum(np.diff(self.fpr) * (self.mean_tpr[1:] + self.mean_tpr[:-1])) / 2)


@dataclass(frozen=True)
class TrialRecord:
    method: str
    seed_size: int
    community: str
    trial: int
    seeds: tuple
    auc: float


@dataclass(eq=False)
class EvalReport:
    summaries: dict            # (method, seed_size) -> RocSummary
    trials: list               # TrialRecord, deterministic order
    skipped: list              # (community, seed_size, reason)
    config: EvalConfig

    def summary(self, method, seed_size) -> RocSummary:
        return self.summaries[method, seed_size]


def sample_subsets(community, s: int, max_subsets: int = 120, rng_seed: int = 0) -> list:
    """Seed subsets of size ``s`` drawn from ``community``.

    All ``C(|community|, s)`` subsets in lexicographic order when there are at
    most ``max_subsets`` of them; otherwise ``max_subsets`` distinct subsets
    drawn uniformly without replacement.
    """
    members = sorted(community)
    if len(members) <= s:
        raise PreconditionError(f"community of size {len(members)} cannot be seeded with {s} vertices")
    if math.comb(len(members), s) <= max_subsets:
        return [tuple(c) for c in itertools.combinations(members, s)]
    rng = np.random.default_rng(rng_seed)
    arr = np.array(members)
    seen = set()
    out = []
    while len(out) < max_subsets:
        sub = tuple(sorted(arr[rng.choice(len(arr), size=s, replace=False)].tolist()))
        if sub not in seen:
            seen.add(sub)
            out.append(sub)
    return out


class _Membership:
    def __init__(self, labels: LabelSet, n: int):
        self.labels = labels
        self.n = n
        self.of = [set(x) for x in labels.memberships(n)]

    def superset_members(self, seeds) -> np.ndarray:
        common = set.intersection(*(self.of[v] for v in seeds))
        mask = np.zeros(self.n, dtype=bool)
        for c in common:
            mask[list(self.labels.communities[c][1])] = True
        return mask


def build_trial(labels: LabelSet, community: str, seeds, n: int, _memb=None) -> QueryTrial:
    """Positives: members of every community containing all of ``seeds``."""
    memb = _memb or _Membership(labels, n)
    seeds = tuple(sorted(seeds))
    pos = memb.superset_members(seeds)
    is_seed = np.zeros(n, dtype=bool)
    is_seed[list(seeds)] = True
    pos &= ~is_seed
    neg = ~pos & ~is_seed
    return QueryTrial(community, seeds, np.flatnonzero(pos), np.flatnonzero(neg))


def roc_curve(scores, is_positive):
    """ROC vertices from a descending threshold sweep.

    Equal scores form one step.  Returns ``(fpr, tpr, tp, fp)`` with the
    cumulative integer counts at every vertex, starting at ``(0, 0)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(is_positive, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    yy = y[order]
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.r_[0, np.cumsum(yy)[last]]
    fp = np.r_[0, np.cumsum(~yy)[last]]
    n_pos, n_neg = int(tp[-1]), int(fp[-1])
    if n_pos == 0 or n_neg == 0:
        raise PreconditionError("ROC needs at least one positive and one negative")
    return fp / n_neg, tp / n_pos, tp, fp


def roc_auc(scores, is_positive):
    """``(fpr, tpr, auc)`` with the area from exact integer trapezoids.

    Ties contribute half credit, which makes the area equal to the
    Mann-Whitney statistic ``U / (n+ n-)``.
    """
    fpr, tpr, tp, fp = roc_curve(scores, is_positive)
    dfp = np.diff(fp)
    twice_area = int(np.sum(dfp * (tp[:-1] + tp[1:])))
    return fpr, tpr, twice_area / (2 * int(tp[-1]) * int(fp[-1]))


def mann_whitney_auc(scores, is_positive) -> float:
    """AUC from midranks: ``(R+ - n+(n+ + 1)/2) / (n+ n-)``."""
    y = np.asarray(is_positive, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise PreconditionError("AUC needs at least one positive and one negative")
    ranks = rankdata(np.asarray(scores, dtype=np.float64), method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def interpolate_roc(fpr, tpr, grid) -> np.ndarray:
    """TPR of one ROC curve at each grid FPR (vertical averaging).

    Where the curve rises vertically the upper value is used, except at
    ``fpr = 0`` where every curve starts from ``(0, 0)``.
    """
    keep = np.r_[fpr[1:] != fpr[:-1], True]
    out = np.interp(grid, fpr[keep], tpr[keep])
    out[grid <= 0.0] = 0.0
    return out


def _score_block(method, g, idx, trials, cfg, M):
    if method == "expansion":
        return [expansion_scores(idx, t.seeds).scores for t in trials]
    P = rwr_scores_batch(g, [t.seeds for t in trials], cfg.rwr, M)
    return [P[:, k] for k in range(P.shape[1])]


def _evaluate_community(c, label, members, s, g, idx, cfg, memb, M, grid):
    seed = seed_from_key(cfg.rng_seed, label, s)
    subsets = sample_subsets(members, s, cfg.max_subsets, seed)
    trials = [build_trial(memb.labels, label, sub, g.n, memb) for sub in subsets]
    out = {}
    skipped = []
    for method in cfg.methods:
        rows = []
        curves = []
        for k, (t, sc) in enumerate(zip(trials, _score_block(method, g, idx, trials, cfg, M))):
            if t.positives.size == 0 or t.negatives.size == 0:
                skipped.append((label, s, f"trial {k}: no positives or no negatives"))
                continue
            test = np.concatenate([t.positives, t.negatives])
            y = np.zeros(test.size, dtype=bool)
            y[: t.positives.size] = True
            fpr, tpr, auc = roc_auc(sc[test], y)
            rows.append(TrialRecord(method, s, label, k, t.seeds, auc))
            curves.append(interpolate_roc(fpr, tpr, grid))
        out[method] = (rows, curves)
    return out, skipped


def evaluate_network(g: Graph, idx: EnsembleIndex | None, labels: LabelSet,
                     cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Run the cross-validation protocol for every method and seed size."""
    if "expansion" in cfg.methods:
        if idx is None:
            raise PreconditionError("expansion method needs an index")
        if idx.n != g.n or idx.fingerprint != g.fingerprint():
            raise FingerprintError("index was built on a different graph")
    if len(labels) == 0:
        raise PreconditionError("no eligible communities to evaluate")
    memb = _Membership(labels, g.n)
    M = transition_matrix(g, cfg.rwr.orientation) if "rwr" in cfg.methods else None
    grid = np.linspace(0.0, 1.0, cfg.roc_grid_points)

    tasks = []
    skipped = []
    for s in cfg.seed_sizes:
        for c, (label, members) in enumerate(labels):
            if len(members) <= s:
                skipped.append((label, s, f"community size {len(members)} <= seed size"))
            else:
                tasks.append((c, label, members, s))

    def run(task):
        c, label, members, s = task
        return _evaluate_community(c, label, members, s, g, idx, cfg, memb, M, grid)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    summaries = {}
    records = []
    for s in cfg.seed_sizes:
        for method in cfg.methods:
            rows, curves = [], []
            for task, (res, _) in zip(tasks, results):
                if task[3] == s:
                    rows.extend(res[method][0])
                    curves.extend(res[method][1])
            records.extend(rows)
            if not rows:
                continue
            aucs = np.array([r.auc for r in rows])
            per = {}
            for r in rows:
                per.setdefault(r.community, []).append(r.auc)
            summaries[method, s] = RocSummary(
                method, s, grid, np.mean(curves, axis=0),
                float(aucs.mean()), float(aucs.std(ddof=1)) if len(aucs) > 1 else 0.0,
                len(rows), {k: (float(np.mean(v)), len(v)) for k, v in per.items()})
    for _, sk in results:
        skipped.extend(sk)
    if not summaries:
        raise PreconditionError("no eligible communities for any seed size")
    return EvalReport(summaries, records, skipped, cfg)


def results_csv(report: EvalReport, network: str) -> str:
    lines = ["network,method,seed_size,community,trial,auc"]
    for r in report.trials:
        lines.append(f"{network},{r.method},{r.seed_size},{r.community},{r.trial},{r.auc!r}")
    return "\n".join(lines) + "\n"


def summary_csv(report: EvalReport, network: str) -> str:
    lines = ["network,method,seed_size,mean_auc,std_auc,n_trials"]
    for (method, s), sm in sorted(report.summaries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        lines.append(f"{network},{method},{s},{sm.mean_auc!r},{sm.std_auc!r},{sm.n_trials}")
    return "\n".join(lines) + "\n"


def roc_csv(report: EvalReport) -> str:
    lines = ["method,seed_size,fpr,mean_tpr"]
    for (method, s), sm in sorted(report.summaries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        for f, t in zip(sm.fpr.tolist(), sm.mean_tpr.tolist()):
            lines.append(f"{method},{s},{f!r},{t!r}")
    return "\n".join(lines) + "\n"
