import logging
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from app.core.config import settings
from app.core.exceptions import ConfigError, IntegrationError
from app.models.models import (
    ControlSchedule,
    CostModel,
    Grouping,
    Network,
    TimeGrid,
    Trajectory,
    TrajectoryKind,
)

logger = logging.getLogger(__name__)


def check_dimensions(network: Network, grouping: Grouping, control: ControlSchedule) -> None:
    if grouping.node_count != network.node_count:
        raise ConfigError(
            f"grouping covers {grouping.node_count} nodes, network has {network.node_count}"
        )
    if control.M != grouping.M:
        raise ConfigError(f"control has {control.M} groups, grouping has {grouping.M}")


def check_seed(seed, node_count: int) -> np.ndarray:
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (node_count,):
        raise ConfigError(f"seed must have {node_count} entries, got shape {seed.shape}")
    if np.any(seed < 0) or np.any(seed > 1) or not np.all(np.isfinite(seed)):
        raise ConfigError("seed probabilities must lie in [0, 1]")
    return seed


class DynamicsService:
    """Controlled SI mean-field dynamics and the reward functionals."""

    def forward_si(
        self,
        network: Network,
        grouping: Grouping,
        control: ControlSchedule,
        seed,
        beta: float,
        spontaneous_rate: float = 0.0,
    ) -> Trajectory:
        """
        Classic RK4 on di_j/dt = (beta * sum_k A_jk i_k + u_g(j)(t) + nu) * s_j.
        Controls are linearly interpolated at half steps; each step is clamped to
        [i(t_k), 1].
        """
        check_dimensions(network, grouping, control)
        seed = check_seed(seed, network.node_count)
        if beta < 0:
            raise ConfigError(f"spreading rate must be nonnegative, got {beta}")
        if spontaneous_rate < 0:
            raise ConfigError(f"spontaneous rate must be nonnegative, got {spontaneous_rate}")

        grid = control.grid
        h = grid.dt
        adjacency = network.adjacency
        node_u = control.u[grouping.group_of]

        def rhs(i, u):
            return (beta * (adjacency @ i) + u + spontaneous_rate) * (1.0 - i)

        rows = np.empty((grid.K + 1, network.node_count))
        rows[0] = seed
        worst_clamp = 0.0
        for k in range(grid.K):
            i = rows[k]
            u0 = node_u[:, k]
            u1 = node_u[:, k + 1]
            um = 0.5 * (u0 + u1)
            k1 = rhs(i, u0)
            k2 = rhs(i + 0.5 * h * k1, um)
            k3 = rhs(i + 0.5 * h * k2, um)
            k4 = rhs(i + h * k3, u1)
            step = i + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(step)):
                raise IntegrationError("non-finite state during forward integration", k + 1)
            clamped = np.clip(step, i, 1.0)
            worst_clamp = max(worst_clamp, float(np.max(np.abs(clamped - step))))
            rows[k + 1] = clamped

        if worst_clamp > settings.CLAMP_WARN:
            logger.warning(f"Forward integration clamped the state by up to {worst_clamp:.3e}")

        return Trajectory(grid=grid, x=rows.T, kind=TrajectoryKind.STATE)

    def per_group_spend(self, control: ControlSchedule, cost: CostModel) -> np.ndarray:
        """int_0^T g_m(u_m) dt for every group, by the composite trapezoid rule."""
        if cost.M != control.M:
            raise ConfigError(f"cost model has {cost.M} groups, control has {control.M}")
        return trapezoid(cost.g(control.u), dx=control.grid.dt, axis=1)

    def spend_of(self, control: ControlSchedule, cost: CostModel) -> float:
        return float(np.sum(self.per_group_spend(control, cost)))

    def reward(
        self, state: Trajectory, control: ControlSchedule, cost: CostModel
    ) -> Tuple[float, float, float]:
        """Returns (J, reach, spend) with J = reach - spend."""
        if not state.grid.same_as(control.grid):
            raise ConfigError("trajectory and control must share a time grid")
        reach = float(np.mean(state.final))
        spend = self.spend_of(control, cost)
        return reach - spend, reach, spend

    def evaluate(
        self,
        network: Network,
        grouping: Grouping,
        control: ControlSchedule,
        seed,
        beta: float,
        cost: CostModel,
        spontaneous_rate: float = 0.0,
    ) -> Tuple[float, float, float]:
        state = self.forward_si(network, grouping, control, seed, beta, spontaneous_rate)
        return self.reward(state, control, cost)

    def per_capita_resource(self, control: ControlSchedule, cost: CostModel, m: int) -> float:
        """(1/p_m) int g_m(u_m) dt, i.e. b * int u_m^2 dt for quadratic costs."""
        if not 0 <= m < control.M:
            raise ConfigError(f"group index {m} outside 0..{control.M - 1}")
        return float(self.per_group_spend(control, cost)[m] / cost.p[m])

    def uncontrolled_reach(
        self,
        network: Network,
        seed,
        beta: float,
        grid: TimeGrid,
        spontaneous_rate: float = 0.0,
    ) -> float:
        single = Grouping(group_of=np.zeros(network.node_count, dtype=np.int64), M=1)
        state = self.forward_si(
            network, single, ControlSchedule.zeros(grid, 1), seed, beta, spontaneous_rate
        )
        return float(np.mean(state.final))

    def calibrate_beta(
        self,
        network: Network,
        seed,
        target_reach: float,
        grid: TimeGrid,
        beta_max: Optional[float] = None,
    ) -> float:
        """Spreading rate whose uncontrolled reach equals `target_reach`."""
        beta_max = beta_max or 10.0
        floor = self.uncontrolled_reach(network, seed, 0.0, grid)
        if target_reach <= floor:
            raise ConfigError(
                f"target reach {target_reach} is not above the seeded fraction {floor:.6f}"
            )

        # Widen until the target is bracketed
        for _ in range(20):
            if self.uncontrolled_reach(network, seed, beta_max, grid) >= target_reach:
                break
            beta_max *= 2.0
        else:
            raise ConfigError(f"target reach {target_reach} not attainable for beta <= {beta_max}")

        beta = brentq(
            lambda b: self.uncontrolled_reach(network, seed, b, grid) - target_reach,
            0.0,
            beta_max,
            xtol=1e-12,
        )
        logger.info(f"Calibrated beta = {beta:.6g} for uncontrolled reach {target_reach}")
        return float(beta)

    def uniform_control(self, grid: TimeGrid, M: int, level: float) -> ControlSchedule:
        return ControlSchedule(grid=grid, u=np.full((M, grid.K + 1), float(level)))

    def two_stage_control(self, grid: TimeGrid, M: int, level: float) -> ControlSchedule:
        """`level` on grid points with t_k <= T/2, zero afterwards."""
        if grid.K % 2:
            raise ConfigError(f"two-stage control needs an even number of steps, got {grid.K}")
        u = np.zeros((M, grid.K + 1))
        u[:, : grid.K // 2 + 1] = level
        return ControlSchedule(grid=grid, u=u)


# Global instance
dynamics_service = DynamicsService()
