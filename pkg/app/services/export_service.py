import csv
import logging
from pathlib import Path
from typing import Iterable, Optional, TextIO

from pydantic import BaseModel

from app import __version__
from app.core.exceptions import ConfigError
from app.models.models import (
    CentralityScores,
    ControlSchedule,
    CostModel,
    ExperimentConfig,
    RunRecord,
    SeedVector,
    SweepRow,
    Trajectory,
)
from app.services.dynamics_service import dynamics_service

logger = logging.getLogger(__name__)


def fmt(value: float) -> str:
    """Full precision, '.' decimal, no grouping."""
    return format(float(value), ".17g")


class ExportService:
    """Plot-ready CSV files and the JSON run record."""

    def _open(self, directory: Path, name: str) -> TextIO:
        try:
            directory.mkdir(parents=True, exist_ok=True)
            return open(directory / name, "w", newline="", encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot write {directory / name}: {e}") from e

    def write_centrality(self, scores: CentralityScores, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        for node, value in enumerate(scores.values):
            writer.writerow([node, fmt(value)])

    def write_controls(self, control: ControlSchedule, directory: Path) -> Path:
        with self._open(directory, "controls.csv") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["t", "index", "value"])
            times = control.grid.times
            for m in range(control.M):
                for k, t in enumerate(times):
                    writer.writerow([fmt(t), m, fmt(control.u[m, k])])
        return directory / "controls.csv"

    def write_trajectory(
        self, state: Trajectory, adjoint: Optional[Trajectory], directory: Path
    ) -> Path:
        with self._open(directory, "trajectory.csv") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["kind", "t", "index", "value"])
            times = state.grid.times
            for trajectory in (state, adjoint):
                if trajectory is None:
                    continue
                for j in range(trajectory.node_count):
                    row = trajectory.x[j]
                    for k, t in enumerate(times):
                        writer.writerow([trajectory.kind.value, fmt(t), j, fmt(row[k])])
        return directory / "trajectory.csv"

    def write_per_group_resource(self, control: ControlSchedule, cost: CostModel, directory: Path) -> Path:
        spend = dynamics_service.per_group_spend(control, cost)
        with self._open(directory, "per_group_resource.csv") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["group", "p", "per_capita_resource", "spend"])
            for m in range(control.M):
                writer.writerow([m, fmt(cost.p[m]), fmt(spend[m] / cost.p[m]), fmt(spend[m])])
        return directory / "per_group_resource.csv"

    def write_seed_alloc(self, seed: SeedVector, directory: Path) -> Path:
        mass = seed.mass
        with self._open(directory, "seed_alloc.csv") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["group", "p", "seed_fraction", "seed_mass"])
            for m in range(seed.i0.shape[0]):
                writer.writerow([m, fmt(seed.p[m]), fmt(seed.i0[m]), fmt(mass[m])])
        return directory / "seed_alloc.csv"

    def write_sweep_rows(self, rows: Iterable[SweepRow], stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["axis_value", "strategy", "J", "reach", "spend", "pct_improvement_vs_static", "error"])
        for row in rows:
            writer.writerow([
                fmt(row.axis_value), row.strategy, fmt(row.J), fmt(row.reach),
                fmt(row.spend), fmt(row.pct_improvement_vs_static), row.error,
            ])

    def write_sweep(self, rows: Iterable[SweepRow], directory: Path) -> Path:
        with self._open(directory, "sweep.csv") as handle:
            self.write_sweep_rows(rows, handle)
        return directory / "sweep.csv"

    def run_record(
        self, command: str, cfg: ExperimentConfig, result: BaseModel, **extras
    ) -> RunRecord:
        return RunRecord(
            version=__version__,
            command=command,
            config=cfg.model_dump(mode="json"),
            result=result.model_dump(mode="json"),
            extras={key: value for key, value in extras.items() if value is not None},
        )

    def write_report(self, record: RunRecord, directory: Optional[Path]) -> None:
        """report.json under `directory`; nothing without one."""
        if directory is None:
            return
        payload = record.model_dump_json(indent=2)
        with self._open(directory, "report.json") as handle:
            handle.write(payload + "\n")
        logger.info(f"Wrote {directory / 'report.json'}")


# Global instance
export_service = ExportService()
