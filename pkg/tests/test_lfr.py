import numpy as np
import pytest

from modquery.errors import PreconditionError
from modquery.graph import Graph, LabelSet
from modquery.lfr import LfrConfig, generate, measure_mixing, measure_mixing_of


@pytest.fixture(scope="module")
def net03():
    return generate(LfrConfig(n=1000, mixing=0.3, rng_seed=1))


def test_two_blocks_without_mixing():
    net = generate(LfrConfig(n=40, avg_degree=5, max_degree=10, min_community=20,
                             max_community=20, mixing=0.0, rng_seed=2, take_lcc=False))
    assert len(net.truth) == 2
    assert net.realized_mixing == 0.0
    a, b = (net.truth.members(x) for x in net.truth.labels)
    u, v, _ = net.graph.edges()
    cross = [(x, y) for x, y in zip(u.tolist(), v.tolist()) if (x in a) != (y in a)]
    assert cross == [] and a.isdisjoint(b)


def test_requested_mixing_is_realised(net03):
    assert 0.25 <= net03.realized_mixing <= 0.35
    assert measure_mixing(net03) == net03.realized_mixing


@pytest.mark.parametrize("mixing", [0.1, 0.6, 0.9])
def test_mixing_tracks_request(mixing):
    net = generate(LfrConfig(n=1000, mixing=mixing, rng_seed=5))
    assert abs(net.realized_mixing - mixing) <= 0.05


def test_full_overlap_gives_multiple_memberships():
    net = generate(LfrConfig(n=1000, mixing=0.3, overlap_fraction=1.0, rng_seed=3))
    counts = [len(x) for x in net.truth.memberships(net.graph.n)]
    assert min(counts) >= 2 and max(counts) <= 4
    assert abs(net.realized_mixing - 0.3) <= 0.05


def test_every_vertex_has_a_membership(net03):
    assert all(len(x) >= 1 for x in net03.truth.memberships(net03.graph.n))


def test_degree_fidelity(net03):
    g = net03.graph
    assert abs(g.degrees.mean() - 20.0) <= 2.0
    assert g.degrees.max() <= 50


def test_community_sizes_within_bounds():
    net = generate(LfrConfig(n=1000, mixing=0.4, rng_seed=8, take_lcc=False))
    sizes = [len(net.truth.members(x)) for x in net.truth.labels]
    assert min(sizes) >= 10 and max(sizes) <= 100
    assert sum(sizes) == 1000


def test_graph_is_simple_and_connected(net03):
    g = net03.graph
    assert g.num_self_loops == 0
    assert np.all(g.weights == 1.0)
    from scipy.sparse.csgraph import connected_components
    assert connected_components(g.to_scipy(), directed=False)[0] == 1


def test_deterministic():
    cfg = LfrConfig(n=500, mixing=0.5, overlap_fraction=0.2, rng_seed=11)
    a, b = generate(cfg), generate(cfg)
    assert a.graph.same_as(b.graph)
    assert a.truth == b.truth
    c = generate(LfrConfig(n=500, mixing=0.5, overlap_fraction=0.2, rng_seed=12))
    assert not a.graph.same_as(c.graph)


def test_manifest_records_config(net03):
    man = net03.manifest()
    assert man["config"]["avg_degree"] == 20.0 and man["config"]["mixing"] == 0.3
    assert man["realized_mixing"] == net03.realized_mixing
    assert man["n"] == net03.graph.n


def test_measure_mixing_extremes():
    g = Graph.from_edges(4, [0, 1, 2], [1, 2, 3])
    one = LabelSet((("all", frozenset(range(4))),))
    assert measure_mixing_of(g, one) == 0.0
    bip = Graph.from_edges(4, [0, 0, 1, 1], [2, 3, 2, 3])
    two = LabelSet((("l", frozenset({0, 1})), ("r", frozenset({2, 3}))))
    assert measure_mixing_of(bip, two) == 1.0


@pytest.mark.parametrize("kw", [
    dict(mixing=1.5), dict(overlap_fraction=-0.1), dict(min_community=2),
    dict(memberships_per_overlap=5), dict(max_degree=1000), dict(avg_degree=60),
])
def test_infeasible_configs(kw):
    with pytest.raises(PreconditionError):
        LfrConfig(**kw)


def test_too_few_communities_for_overlap():
    with pytest.raises(PreconditionError):
        generate(LfrConfig(n=30, avg_degree=4, max_degree=8, min_community=30,
                           max_community=30, overlap_fraction=0.5, rng_seed=0))
