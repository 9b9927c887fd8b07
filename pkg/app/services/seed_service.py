import logging
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq

from app.core.exceptions import ConfigError
from app.models.models import (
    ControlSchedule,
    CostModel,
    Grouping,
    JointReport,
    Network,
    SeedOptParams,
    SeedVector,
    SweepParams,
    TimeGrid,
)
from app.services.sweep_service import sweep_service

logger = logging.getLogger(__name__)


class SeedService:
    """Seed allocation across groups under the seed budget sum_m p_m i0_m = budget."""

    def expand_seed(self, seed: SeedVector, grouping: Grouping) -> np.ndarray:
        if seed.i0.shape[0] != grouping.M:
            raise ConfigError(f"seed vector has {seed.i0.shape[0]} groups, grouping has {grouping.M}")
        return np.asarray(seed.i0[grouping.group_of], dtype=float)

    def uniform(self, p: np.ndarray, budget: float) -> SeedVector:
        return SeedVector(i0=np.full(len(p), budget), p=p, budget=budget)

    def project_seed(self, raw, p, budget: float) -> SeedVector:
        """
        Euclidean projection onto {0 <= x <= 1, sum_m p_m x_m = budget}. The KKT
        point is x = clip(raw - tau * p, 0, 1) for the shift tau that meets the
        budget; the seed mass is monotone in tau so a bracketing root finder
        locates it.
        """
        raw = np.asarray(raw, dtype=float)
        p = np.asarray(p, dtype=float)
        if not 0 <= budget <= 1:
            raise ConfigError(f"seed budget must lie in [0, 1], got {budget}")
        if raw.shape != p.shape:
            raise ConfigError("raw seed vector and group fractions differ in length")

        def excess(tau: float) -> float:
            return float(np.dot(p, np.clip(raw - tau * p, 0.0, 1.0))) - budget

        # At tau_low every entry clips to 1, at tau_high every entry clips to 0
        tau_low = float(np.min((raw - 1.0) / p)) - 1.0
        tau_high = float(np.max(raw / p)) + 1.0
        if budget == 0.0:
            x = np.zeros_like(raw)
        elif budget == 1.0:
            x = np.ones_like(raw)
        else:
            tau = brentq(excess, tau_low, tau_high, xtol=1e-15, rtol=1e-15, maxiter=500)
            x = np.clip(raw - tau * p, 0.0, 1.0)
            x = self._rebalance(x, p, budget)
        return SeedVector(i0=x, p=p, budget=budget)

    def _rebalance(self, x: np.ndarray, p: np.ndarray, budget: float) -> np.ndarray:
        # Spread the rounding residue over the free coordinates
        residue = budget - float(np.dot(p, x))
        free = (x > 0) & (x < 1)
        if free.any() and residue != 0.0:
            x = x.copy()
            x[free] += residue / float(p[free].sum())
            x = np.clip(x, 0.0, 1.0)
        return x

    def joint_optimize(
        self,
        network: Network,
        grouping: Grouping,
        budget: float,
        beta: float,
        cost: CostModel,
        sweep_params: Optional[SweepParams] = None,
        grid: Optional[TimeGrid] = None,
        opt: Optional[SeedOptParams] = None,
        spontaneous_rate: float = 0.0,
    ) -> Tuple[SeedVector, ControlSchedule, JointReport]:
        """
        Projected gradient ascent on J(i0). Each iteration spends M+1 sweep solves
        on a forward-difference gradient, then backtracks from the initial step,
        halving until the projected point improves J.
        """
        sweep_params = sweep_params or SweepParams()
        grid = grid or TimeGrid()
        opt = opt or SeedOptParams()
        if not 0 <= budget <= 1:
            raise ConfigError(f"seed budget must lie in [0, 1], got {budget}")

        p = np.asarray(grouping.p, dtype=float)
        solves = 0

        def objective(i0: np.ndarray, warm: Optional[ControlSchedule] = None):
            return sweep_service.fbs_solve(
                network, grouping, i0[grouping.group_of], beta, cost, sweep_params, grid,
                initial_control=warm, spontaneous_rate=spontaneous_rate,
            )

        current = self.project_seed(np.full(grouping.M, budget), p, budget)
        control, _, _, report = objective(current.i0)
        solves += 1
        uniform_J = report.J
        best = (current, control, report)
        logger.info(f"Joint optimization start: uniform seed J = {uniform_J:.6f}")

        outer = 0
        for outer in range(1, opt.outer_iterations + 1):
            gradient, evaluations = self._gradient(
                current, best[2].J, objective, best[1], opt
            )
            solves += evaluations
            if not np.any(gradient):
                logger.info("Joint optimization stopped: zero gradient")
                break

            step = opt.initial_step
            improved = None
            for _ in range(opt.max_halvings + 1):
                candidate = self.project_seed(current.i0 + step * gradient, p, budget)
                if np.max(np.abs(candidate.i0 - current.i0)) == 0.0:
                    break
                cand_control, _, _, cand_report = objective(candidate.i0, best[1])
                solves += 1
                if cand_report.J > best[2].J:
                    improved = (candidate, cand_control, cand_report)
                    break
                step *= 0.5

            if improved is None:
                logger.info(f"Joint optimization stopped at iteration {outer}: no ascent step found")
                break

            gain = improved[2].J - best[2].J
            current, best = improved[0], improved
            logger.info(f"Joint iteration {outer}: J = {best[2].J:.6f} (step {step:.3g})")
            if gain < opt.rel_tol * max(abs(best[2].J), 1e-12):
                break

        seed, control, inner = best
        report = JointReport(
            **inner.model_dump(),
            seed_fractions=seed.i0.tolist(),
            seed_budget=budget,
            outer_iterations=outer,
            inner_solves=solves,
            J_uniform=uniform_J,
        )
        return seed, control, report

    def _gradient(self, current: SeedVector, base_J: float, objective, warm, opt: SeedOptParams):
        """Forward differences, stepping backward in coordinates at the upper bound."""
        h = opt.fd_step
        steps: List[float] = []
        points = []
        for m in range(current.i0.shape[0]):
            step = -h if current.i0[m] + h > 1.0 else h
            point = np.array(current.i0, dtype=float)
            point[m] += step
            steps.append(step)
            points.append(point)

        reports = Parallel(n_jobs=opt.n_jobs)(
            delayed(objective)(point, warm) for point in points
        )
        gradient = np.array([
            (result[3].J - base_J) / step for result, step in zip(reports, steps)
        ])
        return gradient, len(points)


# Global instance
seed_service = SeedService()
