from abc import ABC, abstractmethod
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings

# Models carrying numpy / scipy payloads
ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def readonly_array(value, dtype=float) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


# Enums

class CentralityMeasure(str, Enum):
    DEGREE = "degree"
    CLOSENESS = "closeness"
    BETWEENNESS = "betweenness"
    PAGERANK = "pagerank"


class BetweennessSemantics(str, Enum):
    FRACTIONAL = "fractional"
    INDICATOR = "indicator"


class TrajectoryKind(str, Enum):
    STATE = "state"
    ADJOINT = "adjoint"


class HeuristicKind(str, Enum):
    STATIC = "static"
    TWO_STAGE = "two_stage"


class SeedMode(str, Enum):
    UNIFORM = "uniform"
    VECTOR = "vector"
    JOINT = "joint"


class SolverKind(str, Enum):
    FBS = "fbs"
    JOINT = "joint"
    BUDGET = "budget"
    STATIC = "static"
    TWO_STAGE = "two_stage"
    MONTE_CARLO = "mc"


class SweepAxis(str, Enum):
    B_COST = "b"
    BETA = "beta"
    GROUPS = "M"
    BUDGET = "B"


# Network Models

class Network(BaseModel):
    """Undirected, unweighted graph stored as a canonical CSR adjacency matrix."""

    model_config = ARRAY_CONFIG

    node_count: int = Field(..., ge=1)
    adjacency: sp.csr_matrix

    @model_validator(mode="after")
    def validate_adjacency(self):
        a = self.adjacency
        n = self.node_count
        if a.shape != (n, n):
            raise ValueError(f"adjacency shape {a.shape} does not match node_count {n}")
        if not a.has_canonical_format:
            raise ValueError("adjacency must have sorted, duplicate-free neighbour lists")
        if a.nnz and not np.all(a.data == 1):
            raise ValueError("adjacency must be 0/1")
        if a.diagonal().any():
            raise ValueError("adjacency must have a zero diagonal")
        if (a != a.T).nnz:
            raise ValueError("adjacency must be symmetric")
        return self

    @property
    def edge_count(self) -> int:
        return self.adjacency.nnz // 2

    @cached_property
    def degrees(self) -> np.ndarray:
        return readonly_array(np.diff(self.adjacency.indptr), dtype=np.int64)

    def neighbors(self, node: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]

    def edges(self) -> np.ndarray:
        """Edges as an (E, 2) array with u < v, ascending."""
        upper = sp.triu(self.adjacency, k=1, format="coo")
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)


# Centrality Models

class CentralityScores(BaseModel):
    model_config = ARRAY_CONFIG

    measure: CentralityMeasure
    values: np.ndarray
    params: Dict[str, Union[float, int, str]] = {}

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v):
        v = readonly_array(v)
        if v.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("scores must be finite and nonnegative")
        return v

    @property
    def node_count(self) -> int:
        return int(self.values.shape[0])


class Grouping(BaseModel):
    """Partition of the nodes into M control groups."""

    model_config = ARRAY_CONFIG

    group_of: np.ndarray
    M: int = Field(..., ge=1)

    @field_validator("group_of", mode="before")
    @classmethod
    def validate_group_of(cls, v):
        v = readonly_array(v, dtype=np.int64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("group_of must be a nonempty one-dimensional array")
        return v

    @model_validator(mode="after")
    def validate_partition(self):
        if self.group_of.min() < 0 or self.group_of.max() >= self.M:
            raise ValueError(f"group indices must lie in 0..{self.M - 1}")
        if np.any(np.bincount(self.group_of, minlength=self.M) == 0):
            raise ValueError("every group must be nonempty")
        return self

    @property
    def node_count(self) -> int:
        return int(self.group_of.shape[0])

    @cached_property
    def sizes(self) -> np.ndarray:
        return readonly_array(np.bincount(self.group_of, minlength=self.M), dtype=np.int64)

    @cached_property
    def p(self) -> np.ndarray:
        return readonly_array(self.sizes / self.node_count)

    @cached_property
    def membership(self) -> sp.csr_matrix:
        """M x N indicator matrix, row m selects the nodes of group m."""
        n = self.node_count
        return sp.csr_matrix(
            (np.ones(n), (self.group_of, np.arange(n))), shape=(self.M, n)
        )

    def members(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == m)


# Time grid, controls and trajectories

class TimeGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: float = Field(default_factory=lambda: settings.HORIZON, gt=0)
    K: int = Field(default_factory=lambda: settings.STEPS, ge=1)

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.K + 1)

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.K + 1, self.dt)
        w[0] = w[-1] = self.dt / 2
        return w

    def same_as(self, other: "TimeGrid") -> bool:
        return self.T == other.T and self.K == other.K


class ControlSchedule(BaseModel):
    model_config = ARRAY_CONFIG

    grid: TimeGrid
    u: np.ndarray

    @field_validator("u", mode="before")
    @classmethod
    def validate_u(cls, v):
        v = readonly_array(np.atleast_2d(np.asarray(v, dtype=float)))
        if not np.all(np.isfinite(v)):
            raise ValueError("controls must be finite")
        if np.any(v < 0):
            raise ValueError("controls must be nonnegative")
        return v

    @model_validator(mode="after")
    def validate_shape(self):
        if self.u.shape[1] != self.grid.K + 1:
            raise ValueError(f"control has {self.u.shape[1]} samples, grid needs {self.grid.K + 1}")
        return self

    @property
    def M(self) -> int:
        return int(self.u.shape[0])

    @classmethod
    def zeros(cls, grid: TimeGrid, M: int) -> "ControlSchedule":
        return cls(grid=grid, u=np.zeros((M, grid.K + 1)))


class Trajectory(BaseModel):
    model_config = ARRAY_CONFIG

    grid: TimeGrid
    x: np.ndarray
    kind: TrajectoryKind

    @field_validator("x", mode="before")
    @classmethod
    def validate_x(cls, v):
        v = readonly_array(v)
        if v.ndim != 2:
            raise ValueError("trajectory must be N x (K+1)")
        return v

    @model_validator(mode="after")
    def validate_kind(self):
        if self.x.shape[1] != self.grid.K + 1:
            raise ValueError(f"trajectory has {self.x.shape[1]} samples, grid needs {self.grid.K + 1}")
        if self.kind == TrajectoryKind.STATE:
            if np.any(self.x < 0) or np.any(self.x > 1):
                raise ValueError("state probabilities must lie in [0, 1]")
            if np.any(np.diff(self.x, axis=1) < 0):
                raise ValueError("state probabilities must be nondecreasing in time")
        return self

    @property
    def node_count(self) -> int:
        return int(self.x.shape[0])

    @property
    def final(self) -> np.ndarray:
        return self.x[:, -1]


# Cost Models

class CostModel(BaseModel, ABC):
    """
    Per-group instantaneous cost g_m(u). Subclasses supply g, its derivative and
    the inverse of the derivative; every method broadcasts over an M x K array.
    """

    model_config = ARRAY_CONFIG

    p: np.ndarray

    @field_validator("p", mode="before")
    @classmethod
    def validate_p(cls, v):
        v = readonly_array(np.atleast_1d(np.asarray(v, dtype=float)))
        if np.any(v <= 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("group fractions must be positive and sum to 1")
        return v

    @property
    def M(self) -> int:
        return int(self.p.shape[0])

    def _column(self) -> np.ndarray:
        return self.p[:, None]

    @abstractmethod
    def g(self, u: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def g_prime(self, u: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def g_prime_inv(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def scaled(self, multiplier: float) -> "CostModel":
        """Cost multiplied by a constant factor."""
        ...


class QuadraticCost(CostModel):
    """g_m(u) = b p_m u^2"""

    b: float = Field(default_factory=lambda: settings.B, gt=0)

    def g(self, u: np.ndarray) -> np.ndarray:
        return self.b * self._column() * np.square(u)

    def g_prime(self, u: np.ndarray) -> np.ndarray:
        return 2.0 * self.b * self._column() * u

    def g_prime_inv(self, y: np.ndarray) -> np.ndarray:
        return y / (2.0 * self.b * self._column())

    def scaled(self, multiplier: float) -> "QuadraticCost":
        return QuadraticCost(b=self.b * multiplier, p=self.p)


# Solver parameter models

class SweepParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_th: float = Field(default_factory=lambda: settings.U_TH, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.MAX_ITER, ge=1)
    damping: float = Field(default_factory=lambda: settings.DAMPING, gt=0, le=1)
    stationarity_tol: float = Field(default_factory=lambda: settings.STATIONARITY_TOL, gt=0)
    sanity_bound: float = Field(default_factory=lambda: settings.CONTROL_SANITY_BOUND, gt=0)


class SeedOptParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    outer_iterations: int = Field(default_factory=lambda: settings.OUTER_ITER, ge=1)
    fd_step: float = Field(default_factory=lambda: settings.FD_STEP, gt=0, lt=1)
    initial_step: float = Field(default=1.0, gt=0)
    max_halvings: int = Field(default=20, ge=0)
    rel_tol: float = Field(default=1e-6, gt=0)
    n_jobs: int = Field(default_factory=lambda: settings.N_JOBS)


class BudgetParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    B: float = Field(..., ge=0)
    mu_low: float = Field(default_factory=lambda: settings.MU_LOW, gt=0)
    mu_high: float = Field(default_factory=lambda: settings.MU_HIGH, gt=0)
    mu_th: float = Field(default_factory=lambda: settings.MU_TH, gt=0)
    spend_rtol: float = Field(default_factory=lambda: settings.SPEND_RTOL, gt=0)
    max_widening: int = Field(default_factory=lambda: settings.MAX_WIDENING, ge=0)
    sweep: SweepParams = Field(default_factory=SweepParams)

    @model_validator(mode="after")
    def validate_bracket(self):
        if self.mu_low >= self.mu_high:
            raise ValueError(f"mu_low ({self.mu_low}) must be below mu_high ({self.mu_high})")
        return self


class HeuristicParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_max: float = Field(default_factory=lambda: settings.U_MAX, gt=0)
    tol: float = Field(default_factory=lambda: settings.GOLDEN_TOL, gt=0)
    max_evaluations: int = Field(default_factory=lambda: settings.MAX_EVALUATIONS, ge=1)


# Seed Models

class SeedVector(BaseModel):
    """Per-group seed fractions meeting the seed budget."""

    model_config = ARRAY_CONFIG

    i0: np.ndarray
    p: np.ndarray
    budget: float = Field(..., ge=0, le=1)

    @field_validator("i0", "p", mode="before")
    @classmethod
    def validate_arrays(cls, v):
        return readonly_array(np.atleast_1d(np.asarray(v, dtype=float)))

    @model_validator(mode="after")
    def validate_budget(self):
        if self.i0.shape != self.p.shape:
            raise ValueError("seed vector and group fractions differ in length")
        if np.any(self.i0 < 0) or np.any(self.i0 > 1):
            raise ValueError("seed fractions must lie in [0, 1]")
        total = float(np.dot(self.p, self.i0))
        if abs(total - self.budget) > 1e-9:
            raise ValueError(f"seed mass {total:.12g} does not match budget {self.budget:.12g}")
        return self

    @property
    def mass(self) -> np.ndarray:
        return self.p * self.i0


# Report Models

class SolveReport(BaseModel):
    J: float
    reach: float
    spend: float
    per_group_spend: List[float]
    iterations: int = Field(..., ge=0)
    converged: bool
    final_control_delta: float
    max_stationarity_residual: float

    @model_validator(mode="after")
    def validate_decomposition(self):
        if abs(self.J - (self.reach - self.spend)) > 1e-12:
            raise ValueError("J must equal reach - spend")
        return self


class JointReport(SolveReport):
    seed_fractions: List[float]
    seed_budget: float
    outer_iterations: int
    inner_solves: int
    J_uniform: float


class BudgetReport(SolveReport):
    budget: float
    mu: float = Field(..., gt=0)
    bisection_steps: int
    widening_steps: int
    q_bound: int
    spend_error: float


class HeuristicResult(BaseModel):
    kind: HeuristicKind
    level: float = Field(..., ge=0)
    J: float
    reach: float
    spend: float
    evaluations: int = Field(..., ge=0)
    budget: Optional[float] = None


class McResult(BaseModel):
    runs: int = Field(..., ge=1)
    mean_reach: float = Field(..., ge=0, le=1)
    stderr: float = Field(..., ge=0)
    reach_histogram: Optional[List[int]] = None
    rng_seed: int


class SweepRow(BaseModel):
    axis_value: float
    strategy: str
    J: float = float("nan")
    reach: float = float("nan")
    spend: float = float("nan")
    pct_improvement_vs_static: float = float("nan")
    error: str = ""


# Experiment configuration

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    graph: Path
    giant: bool = False
    measure: CentralityMeasure = CentralityMeasure.DEGREE
    betweenness: BetweennessSemantics = BetweennessSemantics.FRACTIONAL
    pagerank_eta: float = Field(default_factory=lambda: settings.PAGERANK_ETA, ge=0, lt=1)
    pagerank_delta: float = Field(default_factory=lambda: settings.PAGERANK_DELTA, gt=0)
    groups: int = Field(default_factory=lambda: settings.GROUPS, ge=1)

    beta: Optional[float] = Field(default=None, ge=0)
    target_reach: Optional[float] = Field(default=None, gt=0, lt=1)
    spontaneous_rate: float = Field(default=0.0, ge=0)
    b: float = Field(default_factory=lambda: settings.B, gt=0)
    horizon: float = Field(default_factory=lambda: settings.HORIZON, gt=0)
    steps: int = Field(default_factory=lambda: settings.STEPS, ge=1)

    seed_mode: SeedMode = SeedMode.UNIFORM
    seed_frac: float = Field(default_factory=lambda: settings.SEED_FRAC, ge=0, le=1)
    seed_vector: Optional[List[float]] = None

    solver: SolverKind = SolverKind.FBS
    u_th: float = Field(default_factory=lambda: settings.U_TH, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.MAX_ITER, ge=1)
    damping: float = Field(default_factory=lambda: settings.DAMPING, gt=0, le=1)
    stationarity_tol: float = Field(default_factory=lambda: settings.STATIONARITY_TOL, gt=0)

    outer_iterations: int = Field(default_factory=lambda: settings.OUTER_ITER, ge=1)
    fd_step: float = Field(default_factory=lambda: settings.FD_STEP, gt=0, lt=1)

    budget: Optional[float] = Field(default=None, ge=0)
    mu_lo: float = Field(default_factory=lambda: settings.MU_LOW, gt=0)
    mu_hi: float = Field(default_factory=lambda: settings.MU_HIGH, gt=0)
    mu_th: float = Field(default_factory=lambda: settings.MU_TH, gt=0)
    spend_rtol: float = Field(default_factory=lambda: settings.SPEND_RTOL, gt=0)

    u_max: float = Field(default_factory=lambda: settings.U_MAX, gt=0)
    golden_tol: float = Field(default_factory=lambda: settings.GOLDEN_TOL, gt=0)
    max_evaluations: int = Field(default_factory=lambda: settings.MAX_EVALUATIONS, ge=1)

    runs: int = Field(default_factory=lambda: settings.MC_RUNS, ge=1)
    substeps: int = Field(default_factory=lambda: settings.MC_SUBSTEPS, ge=1)

    out: Optional[Path] = None
    rng_seed: int = Field(default=0, ge=0)
    n_jobs: int = Field(default_factory=lambda: settings.N_JOBS)
    log_level: str = Field(default_factory=lambda: settings.LOG_LEVEL)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {v}")
        return level

    @field_validator("seed_vector", mode="before")
    @classmethod
    def parse_seed_vector(cls, v):
        # Config files hand the vector over as "0.1,0.2,..."
        if isinstance(v, str):
            return [float(item) for item in v.split(",") if item.strip()]
        return v

    @model_validator(mode="after")
    def validate_cross_fields(self):
        if self.seed_mode == SeedMode.VECTOR:
            if not self.seed_vector:
                raise ValueError("seed_mode=vector requires seed_vector")
            if len(self.seed_vector) != self.groups:
                raise ValueError(f"seed_vector has {len(self.seed_vector)} entries, expected groups={self.groups}")
            if any(x < 0 or x > 1 for x in self.seed_vector):
                raise ValueError("seed_vector entries must lie in [0, 1]")
        if self.solver == SolverKind.BUDGET and self.budget is None:
            raise ValueError("solver=budget requires budget")
        if self.solver == SolverKind.TWO_STAGE and self.steps % 2:
            raise ValueError(f"two-stage control needs an even number of steps, got {self.steps}")
        if self.mu_lo >= self.mu_hi:
            raise ValueError("mu_lo must be below mu_hi")
        return self

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(T=self.horizon, K=self.steps)

    def sweep_params(self) -> SweepParams:
        return SweepParams(
            u_th=self.u_th,
            max_iter=self.max_iter,
            damping=self.damping,
            stationarity_tol=self.stationarity_tol,
        )

    def seed_opt_params(self) -> SeedOptParams:
        return SeedOptParams(
            outer_iterations=self.outer_iterations,
            fd_step=self.fd_step,
            n_jobs=self.n_jobs,
        )

    def budget_params(self, budget: Optional[float] = None) -> BudgetParams:
        return BudgetParams(
            B=self.budget if budget is None else budget,
            mu_low=self.mu_lo,
            mu_high=self.mu_hi,
            mu_th=self.mu_th,
            spend_rtol=self.spend_rtol,
            sweep=self.sweep_params(),
        )

    def heuristic_params(self) -> HeuristicParams:
        return HeuristicParams(
            u_max=self.u_max,
            tol=self.golden_tol,
            max_evaluations=self.max_evaluations,
        )


class RunRecord(BaseModel):
    """Contents of report.json: tool version, config echo and the solver report."""

    tool: str = "epictrl"
    version: str
    command: str
    config: Dict[str, object]
    result: Dict[str, object]
    extras: Dict[str, object] = Field(default_factory=dict)
