import logging
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import ConfigError
from app.models.models import (
    ControlSchedule,
    CostModel,
    Grouping,
    Network,
    SolveReport,
    SweepParams,
    TimeGrid,
    Trajectory,
)
from app.services.adjoint_service import adjoint_service
from app.services.dynamics_service import check_seed, dynamics_service

logger = logging.getLogger(__name__)

# Costates stay nonnegative; values below this floor are reported
ADJOINT_FLOOR = -1e-9


class SweepService:
    """Forward-backward sweep for the fixed-seed optimal control problem."""

    def _candidate(
        self, state: Trajectory, adjoint: Trajectory, grouping: Grouping, cost: CostModel
    ) -> np.ndarray:
        # Hamiltonian maximizer u_m = g'_m^{-1}(sum_{l in N_m} lambda_l s_l)
        sensitivity = adjoint_service.group_sensitivity(state, adjoint, grouping)
        return cost.g_prime_inv(np.maximum(sensitivity, 0.0))

    def fbs_solve(
        self,
        network: Network,
        grouping: Grouping,
        seed,
        beta: float,
        cost: CostModel,
        params: Optional[SweepParams] = None,
        grid: Optional[TimeGrid] = None,
        *,
        initial_control: Optional[ControlSchedule] = None,
        multiplier: float = 1.0,
        spontaneous_rate: float = 0.0,
    ) -> Tuple[ControlSchedule, Trajectory, Trajectory, SolveReport]:
        """
        Alternate forward state and backward costate passes with a damped
        Hamiltonian-maximizing control update until the sup-norm change of the
        controls drops below u_th or max_iter passes have run. `multiplier`
        divides the maximizer's argument (the relaxed budget problem).
        """
        params = params or SweepParams()
        grid = grid or (initial_control.grid if initial_control is not None else TimeGrid())
        seed = check_seed(seed, network.node_count)
        if cost.M != grouping.M:
            raise ConfigError(f"cost model has {cost.M} groups, grouping has {grouping.M}")
        if multiplier <= 0:
            raise ConfigError(f"multiplier must be positive, got {multiplier}")
        if initial_control is not None and not initial_control.grid.same_as(grid):
            raise ConfigError("initial control must live on the solver grid")

        update_cost = cost if multiplier == 1.0 else cost.scaled(multiplier)
        omega = params.damping
        u = (
            np.array(initial_control.u, dtype=float)
            if initial_control is not None
            else np.zeros((grouping.M, grid.K + 1))
        )

        adjoint = None
        delta = np.inf
        converged = False
        iteration = 0
        for iteration in range(1, params.max_iter + 1):
            state = dynamics_service.forward_si(
                network, grouping, ControlSchedule(grid=grid, u=u), seed, beta, spontaneous_rate
            )
            # Refresh the controls against the new states before the backward pass
            if adjoint is not None:
                u_forward = (1.0 - omega) * u + omega * self._candidate(state, adjoint, grouping, update_cost)
            else:
                u_forward = u

            adjoint = adjoint_service.backward_adjoint(
                network, grouping, ControlSchedule(grid=grid, u=u_forward), state, beta, spontaneous_rate
            )
            lowest = float(adjoint.x.min())
            if lowest < ADJOINT_FLOOR:
                logger.warning(f"Negative costate {lowest:.3e} at sweep iteration {iteration}")

            u_next = (1.0 - omega) * u_forward + omega * self._candidate(state, adjoint, grouping, update_cost)
            delta = float(np.max(np.abs(u_next - u)))
            u = u_next
            logger.debug(f"Sweep iteration {iteration}: control change {delta:.3e}")
            if delta < params.u_th:
                converged = True
                break

        control = ControlSchedule(grid=grid, u=u)
        state = dynamics_service.forward_si(network, grouping, control, seed, beta, spontaneous_rate)
        adjoint = adjoint_service.backward_adjoint(network, grouping, control, state, beta, spontaneous_rate)
        gradient = adjoint_service.control_gradient(state, adjoint, control, grouping, update_cost)
        residual = float(np.max(np.abs(gradient)))

        if converged:
            logger.info(f"Sweep converged after {iteration} iterations (change {delta:.3e})")
            if residual > params.stationarity_tol:
                logger.warning(
                    f"Stationarity residual {residual:.3e} exceeds tolerance {params.stationarity_tol:.1e}"
                )
        else:
            logger.warning(
                f"Sweep stopped after {params.max_iter} iterations without converging (change {delta:.3e})"
            )
        if float(u.max(initial=0.0)) > params.sanity_bound:
            logger.warning(f"Control reaches {u.max():.3e}, above the sanity bound {params.sanity_bound:.1e}")

        J, reach, spend = dynamics_service.reward(state, control, cost)
        report = SolveReport(
            J=J,
            reach=reach,
            spend=spend,
            per_group_spend=dynamics_service.per_group_spend(control, cost).tolist(),
            iterations=iteration,
            converged=converged,
            final_control_delta=delta,
            max_stationarity_residual=residual,
        )
        return control, state, adjoint, report


# Global instance
sweep_service = SweepService()
