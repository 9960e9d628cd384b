import numpy as np
import pytest

from modquery.errors import ConvergenceError
from modquery.graph import Graph
from modquery.rwr import (RwrConfig, restart_vector, rwr_rank, rwr_scores, rwr_scores_batch,
                          transition_matrix)


def single_edge():
    return Graph.from_edges(2, [0], [1], ids=["a", "b"])


def random_connected(rng, n, p):
    a = np.triu(rng.random((n, n)) < p, 1)
    # a spanning path keeps it connected
    a[np.arange(n - 1), np.arange(1, n)] = True
    u, v = np.nonzero(a)
    return Graph.from_edges(n, u, v, rng.integers(1, 4, len(u)).astype(float))


def dense_oracle(g, seeds, alpha, orientation="mass_conserving"):
    M = transition_matrix(g, orientation).toarray()
    p0 = restart_vector(g.n, seeds)
    return alpha * np.linalg.solve(np.eye(g.n) - (1 - alpha) * M, p0)


def test_two_vertex_fixed_point():
    res = rwr_scores(single_edge(), [0])
    assert abs(res.p[0] - 4 / 7) <= 1e-9 and abs(res.p[1] - 3 / 7) <= 1e-9
    assert res.residual < 1e-10


def test_two_vertex_residual_is_exactly_geometric():
    # the difference of consecutive iterates is 2 (1 - alpha)^t on this graph
    g = single_edge()
    for t in (5, 20, 60):
        with pytest.raises(ConvergenceError) as err:
            rwr_scores(g, [0], RwrConfig(l1_tolerance=1e-300, max_iters=t))
        assert err.value.residual == pytest.approx(2 * 0.75 ** t, rel=1e-9)
    # hence the first t below 1e-10 is 83
    assert rwr_scores(g, [0]).iterations == 83


def test_regular_graph_all_seeds_uniform():
    n = 12
    g = Graph.from_edges(n, np.arange(n), (np.arange(n) + 1) % n)
    res = rwr_scores(g, range(n))
    assert np.allclose(res.p, 1 / n, atol=1e-12)
    assert res.iterations == 1


def test_matches_dense_solve():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(3, 201))
        g = random_connected(rng, n, 3 / n)
        seeds = rng.choice(n, int(rng.integers(1, min(n, 10) + 1)), replace=False)
        res = rwr_scores(g, seeds)
        assert np.abs(res.p - dense_oracle(g, seeds, 0.25)).max() <= 1e-8
        assert res.p.min() >= 0
        assert abs(res.p.sum() - 1) <= 1e-9


def test_fixed_point_check_at_return():
    rng = np.random.default_rng(1)
    g = random_connected(rng, 80, 0.05)
    cfg = RwrConfig()
    res = rwr_scores(g, [3, 9])
    M = transition_matrix(g)
    step = (1 - cfg.alpha) * (M @ res.p) + cfg.alpha * restart_vector(g.n, res.seeds)
    assert np.abs(res.p - step).sum() < 10 * cfg.l1_tolerance


def test_column_stochastic_conserves_every_step():
    rng = np.random.default_rng(2)
    g = random_connected(rng, 50, 0.1)
    M = transition_matrix(g)
    assert np.allclose(np.asarray(M.sum(axis=0)).ravel(), 1.0, atol=1e-15)
    p0 = restart_vector(g.n, [0, 5])
    p = p0
    for _ in range(100):
        p = 0.75 * (M @ p) + 0.25 * p0
        assert abs(p.sum() - 1) <= 1e-12


def test_literal_orientation_matches_its_own_oracle():
    rng = np.random.default_rng(3)
    g = random_connected(rng, 40, 0.1)
    cfg = RwrConfig(orientation="literal")
    res = rwr_scores(g, [1, 2], cfg)
    assert np.abs(res.p - dense_oracle(g, [1, 2], 0.25, "literal")).max() <= 1e-8
    # row-stochastic: rows sum to one but columns do not
    W = transition_matrix(g, "literal")
    assert np.allclose(np.asarray(W.sum(axis=1)).ravel(), 1.0)


def test_batch_equals_single():
    rng = np.random.default_rng(4)
    g = random_connected(rng, 60, 0.08)
    sets = [[0], [1, 2, 3], [10, 50], list(range(20))]
    P = rwr_scores_batch(g, sets)
    for k, s in enumerate(sets):
        assert np.array_equal(P[:, k], rwr_scores(g, s).p)


def test_rank_mirrors_query_rules():
    g = Graph.from_edges(4, [0, 1, 2], [1, 2, 3], ids=list("wxyz"))
    res = rwr_scores(g, [0])
    ranked = rwr_rank(res)
    assert [x for x, _ in ranked] == ["x", "y", "z"]
    assert rwr_rank(res, include_seeds=True)[0][0] == "w"
    assert len(rwr_rank(res, top_k=1)) == 1
    # equal scores fall back to internal id order
    sym = Graph.from_edges(3, [0, 0], [1, 2], ids=["h", "q", "b"])
    assert [x for x, _ in rwr_rank(rwr_scores(sym, [0]))] == ["q", "b"]


def test_validation():
    with pytest.raises(ValueError):
        RwrConfig(alpha=0.0)
    with pytest.raises(ValueError):
        RwrConfig(l1_tolerance=0)
    with pytest.raises(ValueError):
        RwrConfig(orientation="sideways")
