import logging
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.sparse.csgraph import shortest_path

from app.core.config import settings
from app.core.exceptions import ConfigError, ConvergenceError, DisconnectedGraphError
from app.models.models import (
    BetweennessSemantics,
    CentralityMeasure,
    CentralityScores,
    Grouping,
    Network,
)
from app.services.network_service import network_service

logger = logging.getLogger(__name__)


def _brandes_block(adjacency, sources: np.ndarray) -> np.ndarray:
    """
    Dependency accumulation for a block of sources at once. Every column is an
    independent single-source pass; levels advance by one sparse product each.
    """
    n = adjacency.shape[0]
    width = sources.size
    cols = np.arange(width)

    sigma = np.zeros((n, width))
    seen = np.zeros((n, width), dtype=bool)
    sigma[sources, cols] = 1.0
    seen[sources, cols] = True

    frontier = seen.copy()
    levels = [frontier]
    while frontier.any():
        paths = adjacency @ np.where(frontier, sigma, 0.0)
        fresh = (paths > 0) & ~seen
        sigma[fresh] = paths[fresh]
        seen |= fresh
        frontier = fresh
        levels.append(frontier)

    delta = np.zeros((n, width))
    safe_sigma = np.where(sigma > 0, sigma, 1.0)
    for depth in range(len(levels) - 1, 0, -1):
        child = levels[depth]
        if not child.any():
            continue
        coefficient = np.where(child, (1.0 + delta) / safe_sigma, 0.0)
        parent = levels[depth - 1]
        delta += np.where(parent, sigma * (adjacency @ coefficient), 0.0)

    delta[sources, cols] = 0.0
    return delta.sum(axis=1)


class CentralityService:
    def degree_centrality(self, network: Network) -> CentralityScores:
        return CentralityScores(
            measure=CentralityMeasure.DEGREE,
            values=network.degrees.astype(float),
        )

    def _distances(self, network: Network, sources: Optional[np.ndarray] = None) -> np.ndarray:
        return shortest_path(network.adjacency, directed=False, unweighted=True, indices=sources)

    def closeness_centrality(self, network: Network) -> CentralityScores:
        """C_i = N / sum_j d_ij, with d_ii = 0 inside the sum."""
        if not network_service.is_connected(network):
            raise DisconnectedGraphError(
                "closeness centrality needs a connected network; restrict to the giant component first"
            )
        n = network.node_count
        if n == 1:
            return CentralityScores(measure=CentralityMeasure.CLOSENESS, values=[0.0])

        totals = np.empty(n)
        block = max(1, settings.BETWEENNESS_BLOCK)
        for start in range(0, n, block):
            sources = np.arange(start, min(n, start + block))
            totals[sources] = self._distances(network, sources).sum(axis=1)
        return CentralityScores(measure=CentralityMeasure.CLOSENESS, values=n / totals)

    def betweenness_centrality(
        self,
        network: Network,
        semantics: BetweennessSemantics = BetweennessSemantics.FRACTIONAL,
        n_jobs: Optional[int] = None,
    ) -> CentralityScores:
        """
        Unordered pairs {p, q}, endpoints excluded. `fractional` credits each
        geodesic share sigma_pq(i) / sigma_pq; `indicator` counts the pairs with
        at least one geodesic through i.
        """
        semantics = BetweennessSemantics(semantics)
        if semantics == BetweennessSemantics.INDICATOR:
            values = self._indicator_betweenness(network)
        else:
            n = network.node_count
            block = max(1, settings.BETWEENNESS_BLOCK)
            blocks = [np.arange(s, min(n, s + block)) for s in range(0, n, block)]
            partial = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
                delayed(_brandes_block)(network.adjacency, sources) for sources in blocks
            )
            # Each unordered pair was counted from both endpoints
            values = np.sum(partial, axis=0) / 2.0

        return CentralityScores(
            measure=CentralityMeasure.BETWEENNESS,
            values=np.maximum(values, 0.0),
            params={"semantics": semantics.value},
        )

    def _indicator_betweenness(self, network: Network) -> np.ndarray:
        n = network.node_count
        if n > 2000:
            logger.warning(f"Indicator betweenness is O(N^3); N={n} will be slow")
        dist = self._distances(network)
        finite = np.isfinite(dist)
        off_diagonal = ~np.eye(n, dtype=bool)

        counts = np.zeros(n)
        for i in range(n):
            through = (dist[:, i][:, None] + dist[i, :][None, :] == dist) & finite & off_diagonal
            through[i, :] = False
            through[:, i] = False
            counts[i] = through.sum() / 2.0
        return counts

    def pagerank_centrality(
        self,
        network: Network,
        eta: Optional[float] = None,
        delta: Optional[float] = None,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
    ) -> CentralityScores:
        """Fixed point of P_i = eta * sum_j A_ij P_j / k_j + delta, by repeated substitution."""
        eta = settings.PAGERANK_ETA if eta is None else eta
        delta = settings.PAGERANK_DELTA if delta is None else delta
        tol = settings.PAGERANK_TOL if tol is None else tol
        max_iter = settings.PAGERANK_MAX_ITER if max_iter is None else max_iter

        if not 0 <= eta < 1:
            raise ConfigError(f"pagerank eta must lie in [0, 1), got {eta}")
        if delta <= 0 or tol <= 0 or max_iter < 1:
            raise ConfigError("pagerank needs delta > 0, tol > 0 and max_iter >= 1")

        degrees = network.degrees.astype(float)
        if eta > 0 and np.any(degrees == 0):
            raise ConfigError("pagerank is undefined for isolated nodes when eta > 0")

        inverse_degree = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0)
        scores = np.full(network.node_count, delta)
        residual = np.inf
        for iteration in range(1, max_iter + 1):
            updated = eta * (network.adjacency @ (scores * inverse_degree)) + delta
            residual = float(np.max(np.abs(updated - scores)))
            scores = updated
            if residual <= tol:
                logger.debug(f"Pagerank converged after {iteration} iterations")
                break
        else:
            raise ConvergenceError(f"pagerank did not converge within {max_iter} iterations", residual)

        return CentralityScores(
            measure=CentralityMeasure.PAGERANK,
            values=scores,
            params={"eta": eta, "delta": delta, "tol": tol},
        )

    def compute(
        self,
        network: Network,
        measure: CentralityMeasure,
        semantics: BetweennessSemantics = BetweennessSemantics.FRACTIONAL,
        eta: Optional[float] = None,
        delta: Optional[float] = None,
        n_jobs: Optional[int] = None,
    ) -> CentralityScores:
        measure = CentralityMeasure(measure)
        if measure == CentralityMeasure.DEGREE:
            return self.degree_centrality(network)
        if measure == CentralityMeasure.CLOSENESS:
            return self.closeness_centrality(network)
        if measure == CentralityMeasure.BETWEENNESS:
            return self.betweenness_centrality(network, semantics, n_jobs=n_jobs)
        return self.pagerank_centrality(network, eta=eta, delta=delta)

    def group_by_centrality(self, scores: CentralityScores, M: int, rng_seed: int = 0) -> Grouping:
        """
        Ascending score order, lowest scores in group 0 and the top nodes in group
        M-1. The first N mod M groups take one extra node. Ties are broken by a
        seeded random permutation.
        """
        n = scores.node_count
        if M < 1 or M > n:
            raise ConfigError(f"number of groups must lie in 1..{n}, got {M}")

        rng = np.random.default_rng(rng_seed)
        shuffled = rng.permutation(n)
        order = shuffled[np.argsort(scores.values[shuffled], kind="stable")]

        base, extra = divmod(n, M)
        sizes = np.full(M, base)
        sizes[:extra] += 1

        group_of = np.empty(n, dtype=np.int64)
        group_of[order] = np.repeat(np.arange(M), sizes)
        return Grouping(group_of=group_of, M=M)


# Global instance
centrality_service = CentralityService()
