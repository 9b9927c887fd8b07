import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigError, EpictrlError, validation_error_message
from app.models.models import (
    CentralityScores,
    ControlSchedule,
    ExperimentConfig,
    Grouping,
    HeuristicKind,
    Network,
    QuadraticCost,
    RunRecord,
    SeedMode,
    SeedVector,
    SolverKind,
    SweepAxis,
    SweepRow,
)
from app.services.adjoint_service import adjoint_service
from app.services.budget_service import budget_service
from app.services.centrality_service import centrality_service
from app.services.dynamics_service import dynamics_service
from app.services.export_service import export_service
from app.services.heuristic_service import heuristic_service
from app.services.mc_service import mc_service
from app.services.network_service import network_service
from app.services.seed_service import seed_service
from app.services.sweep_service import sweep_service

logger = logging.getLogger(__name__)

# Below this |J_static| the improvement is reported as an absolute difference
PCT_GUARD = 1e-6


@dataclass(frozen=True)
class Problem:
    """Everything a solver needs, resolved from one ExperimentConfig."""

    network: Network
    labels: np.ndarray
    scores: CentralityScores
    grouping: Grouping
    cost: QuadraticCost
    beta: float
    seed: np.ndarray
    seed_vector: SeedVector


@dataclass(frozen=True)
class RunOutcome:
    record: RunRecord
    converged: bool = True


def pct_improvement(J: float, J_static: float) -> float:
    if abs(J_static) < PCT_GUARD:
        return J - J_static
    return 100.0 * (J - J_static) / abs(J_static)


class ExperimentService:
    """Turns validated experiment configs into solver runs and output files."""

    # Problem assembly

    def load_network(self, cfg: ExperimentConfig) -> Tuple[Network, np.ndarray]:
        network, labels = network_service.load_file(cfg.graph)
        if cfg.giant:
            giant, mapping = network_service.giant_component(network)
            kept = np.array(sorted(mapping, key=mapping.get), dtype=np.int64)
            network, labels = giant, labels[kept]
        logger.info(f"Loaded {cfg.graph}: {network.node_count} nodes, {network.edge_count} edges")
        return network, labels

    def centrality(self, cfg: ExperimentConfig, network: Network) -> CentralityScores:
        return centrality_service.compute(
            network,
            cfg.measure,
            semantics=cfg.betweenness,
            eta=cfg.pagerank_eta,
            delta=cfg.pagerank_delta,
            n_jobs=cfg.n_jobs,
        )

    def seed_vector(self, cfg: ExperimentConfig, grouping: Grouping) -> SeedVector:
        p = grouping.p
        if cfg.seed_mode == SeedMode.VECTOR:
            i0 = np.asarray(cfg.seed_vector, dtype=float)
            return SeedVector(i0=i0, p=p, budget=float(np.dot(p, i0)))
        return seed_service.uniform(p, cfg.seed_frac)

    def resolve_beta(self, cfg: ExperimentConfig, network: Network, seed: np.ndarray) -> float:
        if cfg.beta is not None:
            return cfg.beta
        if cfg.target_reach is not None:
            return dynamics_service.calibrate_beta(network, seed, cfg.target_reach, cfg.grid)
        return settings.BETA

    def prepare(
        self,
        cfg: ExperimentConfig,
        network: Optional[Network] = None,
        labels: Optional[np.ndarray] = None,
        scores: Optional[CentralityScores] = None,
    ) -> Problem:
        if network is None:
            network, labels = self.load_network(cfg)
        if labels is None:
            labels = np.arange(network.node_count)
        if cfg.groups > network.node_count:
            raise ConfigError(f"groups={cfg.groups} exceeds the node count {network.node_count}")
        if scores is None:
            scores = self.centrality(cfg, network)
        grouping = centrality_service.group_by_centrality(scores, cfg.groups, cfg.rng_seed)
        seed_vector = self.seed_vector(cfg, grouping)
        seed = seed_service.expand_seed(seed_vector, grouping)
        beta = self.resolve_beta(cfg, network, seed)
        return Problem(
            network=network,
            labels=labels,
            scores=scores,
            grouping=grouping,
            cost=QuadraticCost(b=cfg.b, p=grouping.p),
            beta=beta,
            seed=seed,
            seed_vector=seed_vector,
        )

    # Single runs

    def run_centrality(self, cfg: ExperimentConfig) -> CentralityScores:
        network, _ = self.load_network(cfg)
        return self.centrality(cfg, network)

    def prepare_graph(
        self,
        graph: Path,
        out: Path,
        giant: bool = True,
        bfs_start: Optional[int] = None,
        bfs_size: Optional[int] = None,
    ) -> Network:
        """Giant component and/or BFS sample, written with the map back to original ids."""
        network, labels = network_service.load_file(graph)
        if giant:
            network, mapping = network_service.giant_component(network)
            labels = labels[np.array(sorted(mapping, key=mapping.get), dtype=np.int64)]
        if bfs_size is not None:
            nodes = network_service.bfs_nodes(network, bfs_start or 0, bfs_size)
            network, _ = network_service.induced_subgraph(network, nodes)
            labels = labels[nodes]

        out.mkdir(parents=True, exist_ok=True)
        with open(out / "graph.txt", "w", encoding="utf-8") as handle:
            network_service.save_edge_list(network, handle)
        with open(out / "relabel_map.csv", "w", encoding="utf-8") as handle:
            network_service.write_relabel_map(labels, handle)
        logger.info(f"Prepared graph with {network.node_count} nodes in {out}")
        return network

    def _write_solution(
        self, cfg: ExperimentConfig, problem: Problem, control: ControlSchedule, with_adjoint: bool = True
    ) -> None:
        if cfg.out is None:
            return
        state = dynamics_service.forward_si(
            problem.network, problem.grouping, control, problem.seed, problem.beta, cfg.spontaneous_rate
        )
        adjoint = None
        if with_adjoint:
            adjoint = adjoint_service.backward_adjoint(
                problem.network, problem.grouping, control, state, problem.beta, cfg.spontaneous_rate
            )
        export_service.write_controls(control, cfg.out)
        export_service.write_trajectory(state, adjoint, cfg.out)
        export_service.write_per_group_resource(control, problem.cost, cfg.out)
        with open(cfg.out / "relabel_map.csv", "w", encoding="utf-8") as handle:
            network_service.write_relabel_map(problem.labels, handle)

    def _extras(self, problem: Problem) -> dict:
        return {"beta": problem.beta, "node_count": problem.network.node_count, "groups": problem.grouping.M}

    def run_solve(self, cfg: ExperimentConfig) -> RunOutcome:
        if cfg.seed_mode == SeedMode.JOINT:
            return self.run_solve_joint(cfg)
        problem = self.prepare(cfg)
        control, _, _, report = sweep_service.fbs_solve(
            problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
            cfg.sweep_params(), cfg.grid, spontaneous_rate=cfg.spontaneous_rate,
        )
        self._write_solution(cfg, problem, control)
        record = export_service.run_record("solve", cfg, report, **self._extras(problem))
        export_service.write_report(record, cfg.out)
        return RunOutcome(record=record, converged=report.converged)

    def run_solve_joint(self, cfg: ExperimentConfig) -> RunOutcome:
        problem = self.prepare(cfg)
        seed, control, report = seed_service.joint_optimize(
            problem.network, problem.grouping, cfg.seed_frac, problem.beta, problem.cost,
            cfg.sweep_params(), cfg.grid, cfg.seed_opt_params(), cfg.spontaneous_rate,
        )
        problem = replace(problem, seed_vector=seed, seed=seed_service.expand_seed(seed, problem.grouping))
        self._write_solution(cfg, problem, control)
        if cfg.out is not None:
            export_service.write_seed_alloc(seed, cfg.out)
        record = export_service.run_record("solve-joint", cfg, report, **self._extras(problem))
        export_service.write_report(record, cfg.out)
        return RunOutcome(record=record, converged=report.converged)

    def run_solve_budget(self, cfg: ExperimentConfig) -> RunOutcome:
        if cfg.budget is None:
            raise ConfigError("solve-budget requires budget")
        problem = self.prepare(cfg)
        control, report = budget_service.solve_budget(
            problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
            cfg.grid, cfg.budget_params(), cfg.spontaneous_rate,
        )
        self._write_solution(cfg, problem, control)
        record = export_service.run_record("solve-budget", cfg, report, **self._extras(problem))
        export_service.write_report(record, cfg.out)
        return RunOutcome(record=record, converged=report.converged)

    def _heuristic_kind(self, cfg: ExperimentConfig) -> HeuristicKind:
        if cfg.solver == SolverKind.STATIC:
            return HeuristicKind.STATIC
        if cfg.solver == SolverKind.TWO_STAGE:
            return HeuristicKind.TWO_STAGE
        raise ConfigError(f"solver {cfg.solver.value} is not a heuristic")

    def run_heuristic(self, cfg: ExperimentConfig) -> RunOutcome:
        kind = self._heuristic_kind(cfg)
        problem = self.prepare(cfg)
        if cfg.budget is not None:
            method = (
                heuristic_service.static_for_budget
                if kind == HeuristicKind.STATIC
                else heuristic_service.two_stage_for_budget
            )
            result = method(
                cfg.budget, problem.cost, cfg.grid,
                network=problem.network, grouping=problem.grouping, seed=problem.seed,
                beta=problem.beta, spontaneous_rate=cfg.spontaneous_rate,
            )
        else:
            method = (
                heuristic_service.best_static
                if kind == HeuristicKind.STATIC
                else heuristic_service.best_two_stage
            )
            result = method(
                problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
                cfg.grid, cfg.heuristic_params(), cfg.spontaneous_rate,
            )
        profile = (
            dynamics_service.uniform_control if kind == HeuristicKind.STATIC else dynamics_service.two_stage_control
        )
        self._write_solution(cfg, problem, profile(cfg.grid, problem.grouping.M, result.level), with_adjoint=False)
        record = export_service.run_record("heuristic", cfg, result, **self._extras(problem))
        export_service.write_report(record, cfg.out)
        return RunOutcome(record=record)

    def control_for(self, cfg: ExperimentConfig, problem: Problem) -> Tuple[ControlSchedule, np.ndarray]:
        """Control (and node seed) produced by cfg.solver; `mc` means no control."""
        solver = cfg.solver
        if solver == SolverKind.FBS:
            control, _, _, _ = sweep_service.fbs_solve(
                problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
                cfg.sweep_params(), cfg.grid, spontaneous_rate=cfg.spontaneous_rate,
            )
            return control, problem.seed
        if solver == SolverKind.JOINT:
            seed, control, _ = seed_service.joint_optimize(
                problem.network, problem.grouping, cfg.seed_frac, problem.beta, problem.cost,
                cfg.sweep_params(), cfg.grid, cfg.seed_opt_params(), cfg.spontaneous_rate,
            )
            return control, seed_service.expand_seed(seed, problem.grouping)
        if solver == SolverKind.BUDGET:
            control, _ = budget_service.solve_budget(
                problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
                cfg.grid, cfg.budget_params(), cfg.spontaneous_rate,
            )
            return control, problem.seed
        if solver in (SolverKind.STATIC, SolverKind.TWO_STAGE):
            kind = self._heuristic_kind(cfg)
            profile = (
                dynamics_service.uniform_control if kind == HeuristicKind.STATIC
                else dynamics_service.two_stage_control
            )
            if cfg.budget is not None:
                level = heuristic_service.level_for_budget(kind, cfg.budget, problem.cost, cfg.grid)
            else:
                best = (heuristic_service.best_static if kind == HeuristicKind.STATIC
                        else heuristic_service.best_two_stage)
                level = best(
                    problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
                    cfg.grid, cfg.heuristic_params(), cfg.spontaneous_rate,
                ).level
            return profile(cfg.grid, problem.grouping.M, level), problem.seed
        return ControlSchedule.zeros(cfg.grid, problem.grouping.M), problem.seed

    def run_mc(self, cfg: ExperimentConfig) -> RunOutcome:
        problem = self.prepare(cfg)
        control, seed = self.control_for(cfg, problem)
        state = dynamics_service.forward_si(
            problem.network, problem.grouping, control, seed, problem.beta, cfg.spontaneous_rate
        )
        ode_reach = float(np.mean(state.final))
        result = mc_service.simulate(
            problem.network, problem.grouping, control, seed, problem.beta,
            runs=cfg.runs, rng_seed=cfg.rng_seed, substeps=cfg.substeps,
            spontaneous_rate=cfg.spontaneous_rate, n_jobs=cfg.n_jobs,
        )
        gap, gap_stderr = mc_service.mean_field_gap(result, ode_reach)
        logger.info(f"Mean-field reach {ode_reach:.6f}, gap {gap:.3e} ({gap_stderr:.2f} standard errors)")
        record = export_service.run_record(
            "mc-validate", cfg, result,
            ode_reach=ode_reach, mean_field_gap=gap, gap_in_stderr=gap_stderr, **self._extras(problem),
        )
        export_service.write_report(record, cfg.out)
        return RunOutcome(record=record)

    # Parameter sweeps

    def _point_config(self, cfg: ExperimentConfig, axis: SweepAxis, value: float) -> ExperimentConfig:
        field = {SweepAxis.B_COST: "b", SweepAxis.BETA: "beta", SweepAxis.GROUPS: "groups",
                 SweepAxis.BUDGET: "budget"}[axis]
        if axis == SweepAxis.GROUPS:
            if float(value) != int(value):
                raise ConfigError(f"group count must be an integer, got {value}")
            value = int(value)
        return ExperimentConfig.model_validate({**cfg.model_dump(), field: value})

    def _rows(self, axis_value: float, outcomes: Sequence[Tuple[str, tuple, str]]) -> List[SweepRow]:
        J_static = next(
            (result[0] for name, result, error in outcomes if name == "static" and not error), float("nan")
        )
        rows = []
        for name, result, error in outcomes:
            if error:
                rows.append(SweepRow(axis_value=axis_value, strategy=name, error=error))
                continue
            J, reach, spend = result
            rows.append(
                SweepRow(
                    axis_value=axis_value, strategy=name, J=J, reach=reach, spend=spend,
                    pct_improvement_vs_static=pct_improvement(J, J_static),
                )
            )
        return rows

    @staticmethod
    def _failure(e: Exception) -> str:
        return validation_error_message(e) if isinstance(e, ValidationError) else str(e)

    def sweep_point(
        self,
        cfg: ExperimentConfig,
        axis: SweepAxis,
        value: float,
        network: Network,
        labels: np.ndarray,
        scores: CentralityScores,
    ) -> List[SweepRow]:
        """
        All strategies at one axis value. A strategy that fails fills only its own
        row's error column; a point that cannot be set up fails every row.
        """
        strategies = ["optimal", "static", "two_stage"] if axis == SweepAxis.BUDGET \
            else ["optimal", "joint", "static", "two_stage"]
        try:
            point = self._point_config(cfg, axis, value)
            problem = self.prepare(point, network, labels, scores)
        except (EpictrlError, ValidationError) as e:
            message = self._failure(e)
            logger.warning(f"Sweep point {axis.value}={value} failed: {message}")
            return [SweepRow(axis_value=float(value), strategy=name, error=message) for name in strategies]

        runners = self._budget_strategies(point, problem) if axis == SweepAxis.BUDGET \
            else self._free_strategies(point, problem)
        outcomes = []
        for name, run in runners:
            try:
                outcomes.append((name, run(), ""))
            except (EpictrlError, ValidationError) as e:
                message = self._failure(e)
                logger.warning(f"Sweep point {axis.value}={value}, strategy {name} failed: {message}")
                outcomes.append((name, None, message))
        return self._rows(float(value), outcomes)

    def _free_strategies(self, cfg: ExperimentConfig, problem: Problem):
        args = (problem.network, problem.grouping, problem.seed, problem.beta, problem.cost)

        def optimal():
            _, _, _, report = sweep_service.fbs_solve(
                *args, cfg.sweep_params(), cfg.grid, spontaneous_rate=cfg.spontaneous_rate
            )
            return report.J, report.reach, report.spend

        def joint():
            _, _, report = seed_service.joint_optimize(
                problem.network, problem.grouping, cfg.seed_frac, problem.beta, problem.cost,
                cfg.sweep_params(), cfg.grid, cfg.seed_opt_params(), cfg.spontaneous_rate,
            )
            return report.J, report.reach, report.spend

        def static():
            result = heuristic_service.best_static(*args, cfg.grid, cfg.heuristic_params(), cfg.spontaneous_rate)
            return result.J, result.reach, result.spend

        def two_stage():
            result = heuristic_service.best_two_stage(*args, cfg.grid, cfg.heuristic_params(), cfg.spontaneous_rate)
            return result.J, result.reach, result.spend

        return [("optimal", optimal), ("joint", joint), ("static", static), ("two_stage", two_stage)]

    def _budget_strategies(self, cfg: ExperimentConfig, problem: Problem):
        # Under a budget every strategy is scored by its reach
        def optimal():
            _, report = budget_service.solve_budget(
                problem.network, problem.grouping, problem.seed, problem.beta, problem.cost,
                cfg.grid, cfg.budget_params(), cfg.spontaneous_rate,
            )
            return report.reach, report.reach, report.spend

        evaluation = dict(
            network=problem.network, grouping=problem.grouping, seed=problem.seed,
            beta=problem.beta, spontaneous_rate=cfg.spontaneous_rate,
        )

        def static():
            result = heuristic_service.static_for_budget(cfg.budget, problem.cost, cfg.grid, **evaluation)
            return result.J, result.reach, result.spend

        def two_stage():
            result = heuristic_service.two_stage_for_budget(cfg.budget, problem.cost, cfg.grid, **evaluation)
            return result.J, result.reach, result.spend

        return [("optimal", optimal), ("static", static), ("two_stage", two_stage)]

    def run_sweep(self, cfg: ExperimentConfig, axis: SweepAxis, values: Sequence[float]) -> List[SweepRow]:
        if not values:
            raise ConfigError("sweep needs at least one axis value")
        axis = SweepAxis(axis)
        network, labels = self.load_network(cfg)
        scores = self.centrality(cfg, network)
        if axis != SweepAxis.BETA and cfg.beta is None:
            # Spreading rate is shared by every point unless it is the axis
            grouping = centrality_service.group_by_centrality(
                scores, min(cfg.groups, network.node_count), cfg.rng_seed
            )
            seed = seed_service.expand_seed(self.seed_vector(cfg, grouping), grouping) \
                if cfg.seed_mode == SeedMode.VECTOR else np.full(network.node_count, cfg.seed_frac)
            cfg = cfg.model_copy(update={"beta": self.resolve_beta(cfg, network, seed)})

        logger.info(f"Sweeping {axis.value} over {len(values)} value(s) with n_jobs={cfg.n_jobs}")
        batches = Parallel(n_jobs=cfg.n_jobs)(
            delayed(self.sweep_point)(cfg, axis, value, network, labels, scores) for value in values
        )
        rows = [row for batch in batches for row in batch]
        if cfg.out is not None:
            export_service.write_sweep(rows, cfg.out)
        return rows


# Global instance
experiment_service = ExperimentService()
