"""Random walk with restart baseline.

``p_{t+1} = (1 - alpha) M p_t + alpha p_0`` with ``p_0`` uniform on the
seeds, iterated until ``||p_{t+1} - p_t||_1 < l1_tolerance``.

``M`` is the transition operator.  By default it is column-stochastic
(``M = A D^-1``, the transpose of the row-normalised adjacency ``W``), which
moves probability mass along edges and conserves it.  ``orientation="literal"``
applies ``W = D^-1 A`` itself; that operator is row-stochastic and does not
conserve mass on graphs with unequal degrees.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, PreconditionError
from .graph import Graph
from .query import _rank, make_query

ORIENTATIONS = ("mass_conserving", "literal")


@dataclass(frozen=True)
class RwrConfig:
    alpha: float = 0.25
    l1_tolerance: float = 1e-10
    max_iters: int = 1000
    orientation: str = "mass_conserving"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.l1_tolerance > 0:
            raise ValueError("l1_tolerance must be positive")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")


@dataclass(frozen=True, eq=False)
class RwrResult:
    p: np.ndarray
    iterations: int
    residual: float
    seeds: tuple
    ids: tuple


def transition_matrix(g: Graph, orientation: str = "mass_conserving") -> sp.csr_matrix:
    if np.any(g.degrees <= 0):
        raise PreconditionError("random walk needs every vertex to have positive degree")
    a = g.to_scipy()
    inv = sp.diags(1.0 / g.degrees)
    if orientation == "mass_conserving":
        return (a @ inv).tocsr()
    if orientation == "literal":
        return (inv @ a).tocsr()
    raise ValueError(f"unknown orientation {orientation!r}")


def restart_vector(n: int, seeds) -> np.ndarray:
    p0 = np.zeros(n)
    p0[list(seeds)] = 1.0 / len(seeds)
    return p0


def _iterate(M, P0, cfg: RwrConfig):
    """Iterate every column of ``P0`` independently to its own convergence."""
    P = P0.copy()
    iters = np.zeros(P.shape[1], dtype=np.int64)
    resid = np.full(P.shape[1], np.inf)
    active = np.arange(P.shape[1])
    beta = 1.0 - cfg.alpha
    for t in range(1, cfg.max_iters + 1):
        cur = P[:, active]
        nxt = beta * (M @ cur) + cfg.alpha * P0[:, active]
        r = np.abs(nxt - cur).sum(axis=0)
        P[:, active] = nxt
        iters[active] = t
        resid[active] = r
        active = active[r >= cfg.l1_tolerance]
        if active.size == 0:
            return P, iters, resid
    raise ConvergenceError(
        f"random walk did not converge in {cfg.max_iters} iterations "
        f"(residual {resid.max():.3g})", residual=float(resid.max()), iterations=cfg.max_iters)


def rwr_scores(g: Graph, seeds, cfg: RwrConfig = RwrConfig()) -> RwrResult:
    seeds = make_query(seeds, g.n)
    M = transition_matrix(g, cfg.orientation)
    P, iters, resid = _iterate(M, restart_vector(g.n, seeds)[:, None], cfg)
    p = P[:, 0]
    if cfg.orientation == "mass_conserving":
        assert abs(p.sum() - 1.0) <= 1e-9, "probability mass not conserved"
    return RwrResult(p, int(iters[0]), float(resid[0]), seeds, g.ids)


def rwr_scores_batch(g: Graph, seed_sets, cfg: RwrConfig = RwrConfig(), M=None) -> np.ndarray:
    """Stationary vectors for many seed sets at once, one column per set."""
    seed_sets = [make_query(s, g.n) for s in seed_sets]
    if M is None:
        M = transition_matrix(g, cfg.orientation)
    P0 = np.zeros((g.n, len(seed_sets)))
    for k, s in enumerate(seed_sets):
        P0[list(s), k] = 1.0 / len(s)
    P, _, _ = _iterate(M, P0, cfg)
    return P


def rwr_rank(res: RwrResult, include_seeds: bool = False, top_k: int | None = None) -> list:
    is_seed = np.zeros(len(res.p), dtype=bool)
    is_seed[list(res.seeds)] = True
    return _rank(res.p, is_seed, res.ids, include_seeds, top_k)
