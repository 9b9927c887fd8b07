import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from app.core.exceptions import ConfigError
from app.models.models import (
    ControlSchedule,
    CostModel,
    Grouping,
    HeuristicKind,
    HeuristicParams,
    HeuristicResult,
    Network,
    QuadraticCost,
    TimeGrid,
)
from app.services.dynamics_service import check_seed, dynamics_service

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
PRESCAN_POINTS = 8


class HeuristicService:
    """Baseline strategies: one level shared by every group, constant or two-stage."""

    def _profile(self, kind: HeuristicKind) -> Callable[[TimeGrid, int, float], ControlSchedule]:
        if kind == HeuristicKind.STATIC:
            return dynamics_service.uniform_control
        return dynamics_service.two_stage_control

    def _golden_search(
        self, objective: Callable[[float], float], upper: float, params: HeuristicParams
    ) -> Tuple[float, int]:
        """
        Maximize a scalar function on [0, upper]. A coarse scan picks the bracket
        around its best point, then golden-section shrinks that bracket below tol.
        Returns the best point seen and the number of evaluations.
        """
        cache: Dict[float, float] = {}

        def evaluate(x: float) -> float:
            if x not in cache:
                cache[x] = objective(x)
            return cache[x]

        grid = np.linspace(0.0, upper, PRESCAN_POINTS)
        values = [evaluate(float(x)) for x in grid]
        best = int(np.argmax(values))
        low = float(grid[max(best - 1, 0)])
        high = float(grid[min(best + 1, PRESCAN_POINTS - 1)])

        c = high - INV_PHI * (high - low)
        d = low + INV_PHI * (high - low)
        fc, fd = evaluate(c), evaluate(d)
        while high - low > params.tol and len(cache) < params.max_evaluations:
            if fc >= fd:
                high, d, fd = d, c, fc
                c = high - INV_PHI * (high - low)
                fc = evaluate(c)
            else:
                low, c, fc = c, d, fd
                d = low + INV_PHI * (high - low)
                fd = evaluate(d)

        if high - low > params.tol:
            logger.warning(
                f"Golden-section stopped after {len(cache)} evaluations with bracket width {high - low:.3e}"
            )
        argmax = max(cache, key=cache.get)
        return argmax, len(cache)

    def _best_level(
        self,
        kind: HeuristicKind,
        network: Network,
        grouping: Grouping,
        seed,
        beta: float,
        cost: CostModel,
        grid: Optional[TimeGrid],
        params: Optional[HeuristicParams],
        spontaneous_rate: float,
    ) -> HeuristicResult:
        params = params or HeuristicParams()
        grid = grid or TimeGrid()
        seed = check_seed(seed, network.node_count)
        profile = self._profile(kind)
        profile(grid, grouping.M, 0.0)  # rejects odd step counts up front
        outcomes: Dict[float, Tuple[float, float, float]] = {}

        def objective(level: float) -> float:
            outcomes[level] = dynamics_service.evaluate(
                network, grouping, profile(grid, grouping.M, level), seed, beta, cost, spontaneous_rate
            )
            return outcomes[level][0]

        level, evaluations = self._golden_search(objective, params.u_max, params)
        if params.u_max - level <= params.tol:
            logger.warning(
                f"Best {kind.value} level {level:.6g} sits at the search bound u_max={params.u_max}; "
                f"consider enlarging u_max"
            )
        J, reach, spend = outcomes[level]
        logger.info(f"Best {kind.value} control: level={level:.6g}, J={J:.6f} after {evaluations} evaluations")
        return HeuristicResult(
            kind=kind, level=level, J=J, reach=reach, spend=spend, evaluations=evaluations
        )

    def best_static(
        self,
        network: Network,
        grouping: Grouping,
        seed,
        beta: float,
        cost: CostModel,
        grid: Optional[TimeGrid] = None,
        params: Optional[HeuristicParams] = None,
        spontaneous_rate: float = 0.0,
    ) -> HeuristicResult:
        return self._best_level(
            HeuristicKind.STATIC, network, grouping, seed, beta, cost, grid, params, spontaneous_rate
        )

    def best_two_stage(
        self,
        network: Network,
        grouping: Grouping,
        seed,
        beta: float,
        cost: CostModel,
        grid: Optional[TimeGrid] = None,
        params: Optional[HeuristicParams] = None,
        spontaneous_rate: float = 0.0,
    ) -> HeuristicResult:
        """Level c on [0, T/2] and zero afterwards; the grid needs an even step count."""
        return self._best_level(
            HeuristicKind.TWO_STAGE, network, grouping, seed, beta, cost, grid, params, spontaneous_rate
        )

    def level_for_budget(self, kind: HeuristicKind, budget: float, cost: CostModel, grid: TimeGrid) -> float:
        """Level whose profile spends exactly `budget` under the grid quadrature."""
        if budget < 0:
            raise ConfigError(f"budget must be nonnegative, got {budget}")
        if budget == 0.0:
            return 0.0
        profile = self._profile(kind)
        unit = dynamics_service.spend_of(profile(grid, cost.M, 1.0), cost)
        if isinstance(cost, QuadraticCost):
            return math.sqrt(budget / unit)

        def excess(level: float) -> float:
            return dynamics_service.spend_of(profile(grid, cost.M, level), cost) - budget

        high = 1.0
        while excess(high) < 0:
            high *= 2.0
        return float(brentq(excess, 0.0, high, xtol=1e-14, rtol=4 * np.finfo(float).eps))

    def _for_budget(
        self,
        kind: HeuristicKind,
        budget: float,
        cost: CostModel,
        grid: Optional[TimeGrid],
        network: Optional[Network],
        grouping: Optional[Grouping],
        seed,
        beta: Optional[float],
        spontaneous_rate: float,
    ) -> HeuristicResult:
        grid = grid or TimeGrid()
        level = self.level_for_budget(kind, budget, cost, grid)
        control = self._profile(kind)(grid, cost.M, level)
        spend = dynamics_service.spend_of(control, cost)
        reach = float("nan")
        if network is not None:
            if grouping is None or seed is None or beta is None:
                raise ConfigError("evaluating a budgeted heuristic needs grouping, seed and beta")
            state = dynamics_service.forward_si(network, grouping, control, seed, beta, spontaneous_rate)
            reach = float(np.mean(state.final))
        return HeuristicResult(
            kind=kind, level=level, J=reach, reach=reach, spend=spend, evaluations=0, budget=budget
        )

    def static_for_budget(
        self,
        budget: float,
        cost: CostModel,
        grid: Optional[TimeGrid] = None,
        *,
        network: Optional[Network] = None,
        grouping: Optional[Grouping] = None,
        seed=None,
        beta: Optional[float] = None,
        spontaneous_rate: float = 0.0,
    ) -> HeuristicResult:
        """
        Constant level spending the budget. Under a budget the objective is the
        reach alone, so J is the reach; both are NaN unless a network is given.
        """
        return self._for_budget(
            HeuristicKind.STATIC, budget, cost, grid, network, grouping, seed, beta, spontaneous_rate
        )

    def two_stage_for_budget(
        self,
        budget: float,
        cost: CostModel,
        grid: Optional[TimeGrid] = None,
        *,
        network: Optional[Network] = None,
        grouping: Optional[Grouping] = None,
        seed=None,
        beta: Optional[float] = None,
        spontaneous_rate: float = 0.0,
    ) -> HeuristicResult:
        return self._for_budget(
            HeuristicKind.TWO_STAGE, budget, cost, grid, network, grouping, seed, beta, spontaneous_rate
        )


# Global instance
heuristic_service = HeuristicService()
