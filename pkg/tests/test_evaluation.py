import itertools

import numpy as np
import pytest

from modquery.ensemble import IndexBuildConfig, build_index
from modquery.errors import FingerprintError, PreconditionError
from modquery.evaluation import (EvalConfig, build_trial, evaluate_network, interpolate_roc,
                                 mann_whitney_auc, results_csv, roc_auc, roc_csv, roc_curve,
                                 sample_subsets, summary_csv)
from modquery.graph import Graph, LabelSet
from modquery.lfr import LfrConfig, generate


def labelset(**comms):
    return LabelSet(tuple((k, frozenset(v)) for k, v in comms.items()))


def test_exhaustive_boundary():
    subs = sample_subsets(range(10), 3, 120)
    assert len(subs) == 120 == len(set(subs))
    assert subs == [tuple(c) for c in itertools.combinations(range(10), 3)]


def test_small_community():
    assert sample_subsets({7, 3, 9, 1}, 3) == [(1, 3, 7), (1, 3, 9), (1, 7, 9), (3, 7, 9)]


def test_sampled_subsets_are_distinct():
    subs = sample_subsets(range(100, 150), 3, 120, rng_seed=4)
    assert len(subs) == 120 == len({frozenset(x) for x in subs})
    assert all(len(x) == 3 and set(x) <= set(range(100, 150)) for x in subs)
    assert subs == sample_subsets(range(100, 150), 3, 120, rng_seed=4)


def test_too_small_community():
    with pytest.raises(PreconditionError):
        sample_subsets(range(3), 3)


def superset_oracle(labels, seeds, n):
    pos = set()
    for _, mem in labels:
        if set(seeds) <= mem:
            pos |= mem
    pos -= set(seeds)
    return sorted(pos), sorted(set(range(n)) - pos - set(seeds))


def test_trial_single_community():
    ls = labelset(a=range(10), b=range(10, 20))
    t = build_trial(ls, "a", (0, 1, 2), 20)
    assert t.positives.tolist() == list(range(3, 10))
    assert t.negatives.tolist() == list(range(10, 20))


def test_trial_overlapping_and_nested():
    ls = labelset(a=range(10), b=range(5, 15), big=range(0, 18))
    t = build_trial(ls, "a", (5, 6, 7), 20)
    assert t.positives.tolist() == list(range(18))[:5] + list(range(8, 18))
    t2 = build_trial(ls, "a", (0, 1, 2), 20)
    assert t2.positives.tolist() == [x for x in range(18) if x not in (0, 1, 2)]


def test_trial_rule_against_oracle():
    rng = np.random.default_rng(0)
    n = 40
    for _ in range(100):
        comms = {f"c{k}": set(rng.choice(n, int(rng.integers(4, 15)), replace=False).tolist())
                 for k in range(6)}
        ls = labelset(**comms)
        label = f"c{int(rng.integers(6))}"
        seeds = tuple(sorted(rng.choice(sorted(comms[label]), 3, replace=False).tolist()))
        t = build_trial(ls, label, seeds, n)
        pos, neg = superset_oracle(ls, seeds, n)
        assert t.positives.tolist() == pos and t.negatives.tolist() == neg
        assert not set(seeds) & (set(pos) | set(neg))


def test_auc_sweep_matches_mann_whitney_with_ties():
    rng = np.random.default_rng(1)
    for _ in range(200):
        k = int(rng.integers(2, 300))
        scores = rng.integers(0, int(rng.integers(1, 10)), k) / 7.0
        y = rng.random(k) < rng.uniform(0.1, 0.9)
        y[0], y[1] = True, False
        _, _, auc = roc_auc(scores, y)
        assert abs(auc - mann_whitney_auc(scores, y)) <= 1e-12


def test_auc_endpoints():
    assert roc_auc([3, 2, 1, 0], [1, 1, 0, 0])[2] == 1.0
    assert roc_auc([0, 1, 2, 3], [1, 1, 0, 0])[2] == 0.0
    assert roc_auc([1, 1, 1, 1], [1, 0, 1, 0])[2] == 0.5
    fpr, tpr, _, _ = roc_curve([1, 1, 1, 1], [1, 0, 1, 0])
    assert fpr.tolist() == [0, 1] and tpr.tolist() == [0, 1]
    with pytest.raises(PreconditionError):
        roc_auc([1, 2], [1, 1])


def test_random_scores_have_half_auc():
    rng = np.random.default_rng(2)
    y = np.r_[np.ones(200, bool), np.zeros(800, bool)]
    aucs = [roc_auc(rng.random(1000), y)[2] for _ in range(100)]
    assert abs(np.mean(aucs) - 0.5) <= 0.05
    assert all(abs(a - 0.5) <= 0.1 for a in aucs)


def test_interpolation_preserves_endpoints():
    grid = np.linspace(0, 1, 1001)
    rng = np.random.default_rng(3)
    for _ in range(20):
        fpr, tpr, _ = roc_auc(rng.integers(0, 4, 50), rng.random(50) < 0.5)
        out = interpolate_roc(fpr, tpr, grid)
        assert out[0] == 0.0 and out[-1] == 1.0
        assert np.all(np.diff(out) >= 0)
    # vertical jump at fpr 0 uses the upper value just after it
    fpr, tpr, _ = roc_auc([3, 2, 1, 0], [1, 1, 0, 0])
    assert interpolate_roc(fpr, tpr, np.array([0.0, 0.001, 0.5]))[1:].tolist() == [1.0, 1.0]


@pytest.fixture(scope="module")
def planted():
    net = generate(LfrConfig(n=100, avg_degree=10, max_degree=20, min_community=50,
                             max_community=50, mixing=0.05, rng_seed=6))
    idx = build_index(net.graph, IndexBuildConfig(num_partitions=40, master_seed=1))
    return net, idx


def test_planted_two_communities_near_perfect(planted):
    net, idx = planted
    assert len(net.truth) == 2
    rep = evaluate_network(net.graph, idx, net.truth, EvalConfig(seed_sizes=(3,)))
    for method in ("expansion", "rwr"):
        sm = rep.summary(method, 3)
        assert sm.mean_auc >= 0.99
        assert sm.n_trials == 240
        assert sm.fpr[0] == 0 and sm.mean_tpr[0] == 0 and sm.mean_tpr[-1] == 1
        assert np.all(np.diff(sm.mean_tpr) >= 0)
        assert 0 <= sm.curve_auc <= 1


def test_random_labels_are_chance(planted):
    net, idx = planted
    rng = np.random.default_rng(9)
    labels = LabelSet(tuple((f"r{k}", frozenset(rng.choice(net.graph.n, 20, replace=False).tolist()))
                            for k in range(8)))
    rep = evaluate_network(net.graph, idx, labels, EvalConfig(seed_sizes=(3,)))
    for method in ("expansion", "rwr"):
        assert abs(rep.summary(method, 3).mean_auc - 0.5) <= 0.05


def test_deterministic_and_order_independent(planted):
    net, idx = planted
    cfg = EvalConfig(seed_sizes=(3, 7), max_subsets=30)
    a = evaluate_network(net.graph, idx, net.truth, cfg)
    b = evaluate_network(net.graph, idx, net.truth, EvalConfig(seed_sizes=(3, 7), max_subsets=30, workers=4))
    rev = LabelSet(tuple(reversed(net.truth.communities)))
    c = evaluate_network(net.graph, idx, rev, cfg)
    assert results_csv(a, "x") == results_csv(b, "x")
    assert summary_csv(a, "x") == summary_csv(b, "x") and roc_csv(a) == roc_csv(b)
    key = lambda r: (r.method, r.seed_size, r.community, r.trial)
    assert sorted((key(r), r.auc) for r in a.trials) == sorted((key(r), r.auc) for r in c.trials)


def test_skips_are_recorded(planted):
    net, idx = planted
    labels = LabelSet(net.truth.communities + (("tiny", frozenset({0, 1, 2})),))
    rep = evaluate_network(net.graph, idx, labels, EvalConfig(seed_sizes=(3,), methods=("expansion",)))
    assert ("tiny", 3, "community size 3 <= seed size") in rep.skipped


def test_csv_shapes(planted):
    net, idx = planted
    rep = evaluate_network(net.graph, idx, net.truth, EvalConfig(seed_sizes=(15,), max_subsets=5))
    lines = results_csv(rep, "net").splitlines()
    assert lines[0] == "network,method,seed_size,community,trial,auc"
    assert len(lines) == 1 + 2 * 2 * 5
    assert summary_csv(rep, "net").splitlines()[0] == "network,method,seed_size,mean_auc,std_auc,n_trials"
    assert len(roc_csv(rep).splitlines()) == 1 + 2 * 1001


def test_fingerprint_checked(planted):
    net, idx = planted
    other = Graph.from_edges(3, [0, 1], [1, 2])
    with pytest.raises(FingerprintError):
        evaluate_network(other, idx, labelset(a=[0, 1, 2]))


def test_no_eligible_communities(planted):
    net, idx = planted
    with pytest.raises(PreconditionError):
        evaluate_network(net.graph, idx, LabelSet(()))
    with pytest.raises(PreconditionError):
        evaluate_network(net.graph, idx, labelset(a=[0, 1]), EvalConfig(seed_sizes=(3,)))
