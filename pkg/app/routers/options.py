from pathlib import Path
from typing import Annotated, Optional

import typer

from app.models.models import BetweennessSemantics, CentralityMeasure, SeedMode

# Every option defaults to None so that unset flags fall through to the config
# file and then to the settings defaults.

ConfigFile = Annotated[Optional[Path], typer.Option("--config", help="key=value file with experiment settings")]
Graph = Annotated[Optional[Path], typer.Option("--graph", help="Edge-list file")]
Giant = Annotated[Optional[bool], typer.Option("--giant/--no-giant", help="Restrict to the giant component")]
Measure = Annotated[Optional[CentralityMeasure], typer.Option("--measure", help="Centrality used for grouping")]
Betweenness = Annotated[
    Optional[BetweennessSemantics], typer.Option("--betweenness", help="Betweenness pair counting")
]
PagerankEta = Annotated[Optional[float], typer.Option("--pagerank-eta")]
PagerankDelta = Annotated[Optional[float], typer.Option("--pagerank-delta")]
Groups = Annotated[Optional[int], typer.Option("--groups", "-M", help="Number of centrality groups")]

Beta = Annotated[Optional[float], typer.Option("--beta", help="Spreading rate")]
TargetReach = Annotated[
    Optional[float], typer.Option("--target-reach", help="Calibrate beta to this uncontrolled reach")
]
SpontaneousRate = Annotated[Optional[float], typer.Option("--spontaneous-rate")]
CostScale = Annotated[Optional[float], typer.Option("--b", help="Quadratic cost scale")]
Horizon = Annotated[Optional[float], typer.Option("--horizon", "-T")]
Steps = Annotated[Optional[int], typer.Option("--steps", "-K")]

SeedModeOpt = Annotated[Optional[SeedMode], typer.Option("--seed-mode")]
SeedFrac = Annotated[Optional[float], typer.Option("--seed-frac", help="Seed budget i0")]
SeedVectorOpt = Annotated[Optional[str], typer.Option("--seed-vector", help="Per-group seeds, comma separated")]

UTh = Annotated[Optional[float], typer.Option("--u-th", "--uth", help="Control change threshold")]
MaxIter = Annotated[Optional[int], typer.Option("--max-iter", "--maxiter", help="Sweep iteration cap")]
Damping = Annotated[Optional[float], typer.Option("--damping")]
StationarityTol = Annotated[Optional[float], typer.Option("--stationarity-tol")]

OuterIterations = Annotated[Optional[int], typer.Option("--outer-iterations")]
FdStep = Annotated[Optional[float], typer.Option("--fd-step")]

Budget = Annotated[Optional[float], typer.Option("--budget", help="Total spend B")]
MuLo = Annotated[Optional[float], typer.Option("--mu-lo")]
MuHi = Annotated[Optional[float], typer.Option("--mu-hi")]
MuTh = Annotated[Optional[float], typer.Option("--mu-th")]
SpendRtol = Annotated[Optional[float], typer.Option("--spend-rtol")]

UMax = Annotated[Optional[float], typer.Option("--u-max")]
GoldenTol = Annotated[Optional[float], typer.Option("--golden-tol")]
MaxEvaluations = Annotated[Optional[int], typer.Option("--max-evaluations")]

Runs = Annotated[Optional[int], typer.Option("--runs")]
Substeps = Annotated[Optional[int], typer.Option("--substeps")]

Out = Annotated[Optional[Path], typer.Option("--out", help="Output directory")]
RngSeed = Annotated[Optional[int], typer.Option("--rng-seed")]
NJobs = Annotated[Optional[int], typer.Option("--n-jobs")]
