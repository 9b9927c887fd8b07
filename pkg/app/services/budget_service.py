import logging
import math
from typing import Optional, Tuple

from app.core.exceptions import BracketError
from app.models.models import (
    BudgetParams,
    BudgetReport,
    ControlSchedule,
    CostModel,
    Grouping,
    Network,
    SolveReport,
    TimeGrid,
)
from app.services.dynamics_service import check_seed, dynamics_service
from app.services.sweep_service import sweep_service

logger = logging.getLogger(__name__)


class BudgetService:
    """Fixed-budget campaigns: bisection on the multiplier of the spend constraint."""

    def spend_of(self, control: ControlSchedule, cost: CostModel) -> float:
        return dynamics_service.spend_of(control, cost)

    def solve_budget(
        self,
        network: Network,
        grouping: Grouping,
        seed,
        beta: float,
        cost: CostModel,
        grid: Optional[TimeGrid],
        params: BudgetParams,
        spontaneous_rate: float = 0.0,
    ) -> Tuple[ControlSchedule, BudgetReport]:
        """
        Controls maximizing the reach subject to total spend B. For a multiplier
        mu the inner sweep maximizes reach - mu * spend; spend decreases in mu, so
        mu is bisected until the spend matches B within spend_rtol or the bracket
        is narrower than mu_th.

        A zero budget needs no search: the control is identically zero and mu is
        reported as inf, since every multiplier above some threshold gives it.
        """
        grid = grid or TimeGrid()
        seed = check_seed(seed, network.node_count)
        budget = params.B

        if budget == 0.0:
            control = ControlSchedule.zeros(grid, grouping.M)
            state = dynamics_service.forward_si(network, grouping, control, seed, beta, spontaneous_rate)
            _, reach, _ = dynamics_service.reward(state, control, cost)
            return control, self._report(
                SolveReport(
                    J=reach, reach=reach, spend=0.0,
                    per_group_spend=[0.0] * grouping.M, iterations=0, converged=True,
                    final_control_delta=0.0, max_stationarity_residual=0.0,
                ),
                budget=0.0, mu=math.inf, bisection=0, widening=0, q_bound=0, spend_error=0.0,
            )

        warm = {"control": None}

        def solve(mu: float):
            control, _, _, report = sweep_service.fbs_solve(
                network, grouping, seed, beta, cost, params.sweep, grid,
                initial_control=warm["control"], multiplier=mu, spontaneous_rate=spontaneous_rate,
            )
            warm["control"] = control
            return control, report

        mu_low, mu_high = params.mu_low, params.mu_high
        widening = 0
        low = solve(mu_low)
        while low[1].spend < budget:
            if widening >= params.max_widening:
                raise BracketError(f"spend {low[1].spend:.6g} stays below budget {budget} down to mu={mu_low:.3e}")
            mu_low /= 2.0
            widening += 1
            low = solve(mu_low)
        high = solve(mu_high)
        while high[1].spend > budget:
            if widening >= params.max_widening:
                raise BracketError(f"spend {high[1].spend:.6g} stays above budget {budget} up to mu={mu_high:.3e}")
            mu_high *= 2.0
            widening += 1
            high = solve(mu_high)

        q_bound = max(0, math.ceil(math.log2((mu_high - mu_low) / params.mu_th)))
        logger.info(
            f"Multiplier bracket [{mu_low:.4g}, {mu_high:.4g}] after {widening} widening step(s), "
            f"at most {q_bound} bisection steps"
        )

        # Best of the endpoints in case the loop below never runs
        best_mu, best = min(
            ((mu_low, low), (mu_high, high)), key=lambda item: abs(item[1][1].spend - budget)
        )
        steps = 0
        while mu_high - mu_low > params.mu_th and abs(best[1].spend - budget) > params.spend_rtol * budget:
            mu = 0.5 * (mu_low + mu_high)
            current = solve(mu)
            steps += 1
            if current[1].spend > budget:
                mu_low = mu
            else:
                mu_high = mu
            if abs(current[1].spend - budget) <= abs(best[1].spend - budget):
                best_mu, best = mu, current
            logger.debug(f"Bisection step {steps}: mu={mu:.6g}, spend={current[1].spend:.6g}")

        control, inner = best
        spend_error = abs(inner.spend - budget) / budget
        if spend_error > params.spend_rtol:
            logger.warning(
                f"Budget spend {inner.spend:.6g} misses B={budget} by {spend_error:.2e} (relative)"
            )
        logger.info(f"Budget solve finished: mu*={best_mu:.6g}, reach={inner.reach:.6f}, spend={inner.spend:.6g}")

        return control, self._report(
            inner, budget=budget, mu=best_mu, bisection=steps, widening=widening,
            q_bound=q_bound, spend_error=spend_error,
        )

    def _report(
        self, inner: SolveReport, *, budget: float, mu: float, bisection: int,
        widening: int, q_bound: int, spend_error: float,
    ) -> BudgetReport:
        data = inner.model_dump()
        return BudgetReport(
            **data,
            budget=budget,
            mu=mu,
            bisection_steps=bisection,
            widening_steps=widening,
            q_bound=q_bound,
            spend_error=spend_error,
        )


# Global instance
budget_service = BudgetService()
