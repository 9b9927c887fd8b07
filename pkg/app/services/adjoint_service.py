import logging

import numpy as np

from app.core.exceptions import ConfigError, IntegrationError
from app.models.models import (
    ControlSchedule,
    CostModel,
    Grouping,
    Network,
    Trajectory,
    TrajectoryKind,
)
from app.services.dynamics_service import check_dimensions

logger = logging.getLogger(__name__)


class AdjointService:
    """Costate integration and the Hamiltonian quantities built on it."""

    def backward_adjoint(
        self,
        network: Network,
        grouping: Grouping,
        control: ControlSchedule,
        state: Trajectory,
        beta: float,
        spontaneous_rate: float = 0.0,
    ) -> Trajectory:
        """
        RK4 in reversed time on
            dlambda_j/dt = -beta sum_l lambda_l s_l A_lj + lambda_j (beta sum_k A_jk i_k + u_g(j) + nu)
        from lambda_j(T) = 1/N, with stored states interpolated linearly at half steps.
        """
        check_dimensions(network, grouping, control)
        if state.kind != TrajectoryKind.STATE:
            raise ConfigError("backward_adjoint needs a state trajectory")
        if not state.grid.same_as(control.grid):
            raise ConfigError("state and control must share a time grid")
        if state.node_count != network.node_count:
            raise ConfigError("state trajectory does not match the network size")

        grid = control.grid
        h = grid.dt
        n = network.node_count
        adjacency = network.adjacency
        node_u = control.u[grouping.group_of]
        infected = state.x
        # Infection pressure beta * A i at every grid point; linear in i, so the
        # half-step value is the average of its neighbours
        pressure = beta * (adjacency @ infected)

        def rhs(lam, i, push, u):
            return -beta * (adjacency @ (lam * (1.0 - i))) + lam * (push + u + spontaneous_rate)

        rows = np.empty((grid.K + 1, n))
        rows[grid.K] = 1.0 / n
        for k in range(grid.K - 1, -1, -1):
            lam = rows[k + 1]
            i0, i1 = infected[:, k], infected[:, k + 1]
            p0, p1 = pressure[:, k], pressure[:, k + 1]
            u0, u1 = node_u[:, k], node_u[:, k + 1]
            im, pm, um = 0.5 * (i0 + i1), 0.5 * (p0 + p1), 0.5 * (u0 + u1)

            k1 = rhs(lam, i1, p1, u1)
            k2 = rhs(lam - 0.5 * h * k1, im, pm, um)
            k3 = rhs(lam - 0.5 * h * k2, im, pm, um)
            k4 = rhs(lam - h * k3, i0, p0, u0)
            step = lam - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(step)):
                raise IntegrationError("non-finite adjoint during backward integration", k)
            rows[k] = step

        return Trajectory(grid=grid, x=rows.T, kind=TrajectoryKind.ADJOINT)

    def group_sensitivity(self, state: Trajectory, adjoint: Trajectory, grouping: Grouping) -> np.ndarray:
        """sum_{l in N_m} lambda_l(t_k) s_l(t_k) as an M x (K+1) array."""
        return np.asarray(grouping.membership @ (adjoint.x * (1.0 - state.x)))

    def hamiltonian(
        self,
        state_k: np.ndarray,
        adjoint_k: np.ndarray,
        control_k: np.ndarray,
        network: Network,
        grouping: Grouping,
        cost: CostModel,
        beta: float,
        spontaneous_rate: float = 0.0,
    ) -> float:
        """H = -sum_m g_m(u_m) + sum_l lambda_l (beta s_l sum_k A_lk i_k + u_g(l) s_l + nu s_l)"""
        i = np.asarray(state_k, dtype=float)
        lam = np.asarray(adjoint_k, dtype=float)
        u = np.asarray(control_k, dtype=float).reshape(-1)
        s = 1.0 - i
        running_cost = float(np.sum(cost.g(u[:, None])))
        drift = (beta * (network.adjacency @ i) + u[grouping.group_of] + spontaneous_rate) * s
        return -running_cost + float(np.dot(lam, drift))

    def hamiltonian_path(
        self,
        state: Trajectory,
        adjoint: Trajectory,
        control: ControlSchedule,
        network: Network,
        grouping: Grouping,
        cost: CostModel,
        beta: float,
        spontaneous_rate: float = 0.0,
    ) -> np.ndarray:
        return np.array([
            self.hamiltonian(
                state.x[:, k], adjoint.x[:, k], control.u[:, k],
                network, grouping, cost, beta, spontaneous_rate,
            )
            for k in range(control.grid.K + 1)
        ])

    def control_gradient(
        self,
        state: Trajectory,
        adjoint: Trajectory,
        control: ControlSchedule,
        grouping: Grouping,
        cost: CostModel,
    ) -> np.ndarray:
        """dH/du_m at every grid point: -g'_m(u_m) + sum_{l in N_m} lambda_l s_l."""
        if not (state.grid.same_as(control.grid) and adjoint.grid.same_as(control.grid)):
            raise ConfigError("state, adjoint and control must share a time grid")
        return -cost.g_prime(control.u) + self.group_sensitivity(state, adjoint, grouping)


# Global instance
adjoint_service = AdjointService()
