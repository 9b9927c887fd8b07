import logging
import math
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.models.models import ControlSchedule, Grouping, McResult, Network
from app.services.dynamics_service import check_dimensions, check_seed

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 20

# Runs per random stream; a stream's draws depend only on (rng_seed, stream index)
STREAM_RUNS = 200


def stream_generator(rng_seed: int, stream: int) -> np.random.Generator:
    """Philox stream owned by one fixed block of runs."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([rng_seed, stream])))


def _simulate_stream(
    adjacency,
    node_u: np.ndarray,
    dt: float,
    seed_prob: np.ndarray,
    beta: float,
    spontaneous_rate: float,
    substeps: int,
    runs: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Final infected fraction of `runs` independent jump-process realisations."""
    n = seed_prob.shape[0]
    infected = rng.random((n, runs)) < seed_prob[:, None]
    delta = dt / substeps
    for k in range(node_u.shape[1] - 1):
        u0, u1 = node_u[:, k], node_u[:, k + 1]
        for j in range(substeps):
            # Hazard frozen at the start of the sub-interval
            u = u0 + (j / substeps) * (u1 - u0)
            hazard = beta * (adjacency @ infected.astype(float)) + (u + spontaneous_rate)[:, None]
            flip = rng.random((n, runs)) < -np.expm1(-hazard * delta)
            infected |= flip
    return infected.mean(axis=0)


def _simulate_batch(adjacency, node_u, dt, seed_prob, beta, spontaneous_rate, substeps, rng_seed, streams):
    """One joblib job: several consecutive streams, given as (stream index, runs) pairs."""
    return np.concatenate([
        _simulate_stream(
            adjacency, node_u, dt, seed_prob, beta, spontaneous_rate, substeps, size,
            stream_generator(rng_seed, stream),
        )
        for stream, size in streams
    ])


class McService:
    """Stochastic SI simulation used to check the mean-field dynamics."""

    def simulate(
        self,
        network: Network,
        grouping: Grouping,
        control: ControlSchedule,
        seed_prob,
        beta: float,
        runs: Optional[int] = None,
        rng_seed: int = 0,
        substeps: Optional[int] = None,
        spontaneous_rate: float = 0.0,
        n_jobs: Optional[int] = None,
        batch_size: Optional[int] = None,
    ) -> McResult:
        """
        Runs are split into blocks of STREAM_RUNS, each with its own generator keyed
        by (rng_seed, block index), so the result depends on rng_seed and runs only.
        batch_size sets how many runs one joblib job takes and is rounded to whole blocks.
        """
        runs = settings.MC_RUNS if runs is None else runs
        substeps = settings.MC_SUBSTEPS if substeps is None else substeps
        n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
        batch_size = batch_size or settings.MC_BATCH_SIZE
        if runs < 1:
            raise ConfigError(f"runs must be at least 1, got {runs}")
        if substeps < 1:
            raise ConfigError(f"substeps must be at least 1, got {substeps}")
        if rng_seed < 0:
            raise ConfigError(f"rng seed must be nonnegative, got {rng_seed}")
        if beta < 0 or spontaneous_rate < 0:
            raise ConfigError("rates must be nonnegative")
        check_dimensions(network, grouping, control)
        seed_prob = check_seed(seed_prob, network.node_count)

        sizes = [min(STREAM_RUNS, runs - start) for start in range(0, runs, STREAM_RUNS)]
        per_job = max(1, round(batch_size / STREAM_RUNS))
        streams = list(enumerate(sizes))
        jobs = [streams[i:i + per_job] for i in range(0, len(streams), per_job)]
        node_u = np.asarray(control.u[grouping.group_of])
        logger.info(f"Simulating {runs} runs in {len(jobs)} batch(es), {substeps} substeps per interval")

        reaches = Parallel(n_jobs=n_jobs)(
            delayed(_simulate_batch)(
                network.adjacency, node_u, control.grid.dt, seed_prob, beta,
                spontaneous_rate, substeps, rng_seed, job,
            )
            for job in jobs
        )
        reach = np.concatenate(reaches)

        stderr = float(np.std(reach, ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
        histogram, _ = np.histogram(reach, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
        mean_reach = float(min(max(reach.mean(), 0.0), 1.0))
        logger.info(f"Monte-Carlo reach {mean_reach:.6f} +/- {stderr:.2e}")
        return McResult(
            runs=runs,
            mean_reach=mean_reach,
            stderr=stderr,
            reach_histogram=histogram.tolist(),
            rng_seed=rng_seed,
        )

    def mean_field_gap(self, result: McResult, ode_reach: float) -> Tuple[float, float]:
        """(ode_reach - mean_reach, the same gap in standard errors)."""
        gap = ode_reach - result.mean_reach
        if result.stderr == 0.0:
            return gap, (0.0 if gap == 0.0 else math.copysign(math.inf, gap))
        return gap, gap / result.stderr


# Global instance
mc_service = McService()
