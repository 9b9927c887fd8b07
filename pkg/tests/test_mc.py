import math

import numpy as np
import pytest

from app.core.exceptions import ConfigError
from app.models.models import ControlSchedule, Grouping, McResult, TimeGrid
from app.services.dynamics_service import dynamics_service
from app.services.mc_service import mc_service
from conftest import build, random_graph, single_group

GRID = TimeGrid(T=1.0, K=50)


def test_everyone_seeded_is_exactly_one(k4):
    result = mc_service.simulate(k4, single_group(4), ControlSchedule.zeros(GRID, 1), np.ones(4), 1.0, runs=50)
    assert result.mean_reach == 1.0
    assert result.stderr == 0.0
    assert result.reach_histogram[-1] == 50


def test_nothing_happens_without_a_source(k4):
    result = mc_service.simulate(k4, single_group(4), ControlSchedule.zeros(GRID, 1), np.zeros(4), 3.0, runs=50)
    assert result.mean_reach == 0.0


@pytest.mark.slow
def test_single_node_constant_control(single_node):
    control = dynamics_service.uniform_control(GRID, 1, 1.0)
    result = mc_service.simulate(single_node, single_group(1), control, [0.0], 0.0, runs=100_000, rng_seed=3)
    assert abs(result.mean_reach - (1.0 - math.exp(-1.0))) <= 3 * result.stderr


@pytest.mark.slow
def test_edgeless_graph_matches_ode():
    network = build(6, [])
    grouping = Grouping(group_of=[0, 0, 0, 1, 1, 1], M=2)
    control = ControlSchedule(grid=GRID, u=np.vstack([np.full(51, 0.5), np.full(51, 2.0)]))
    seed = np.full(6, 0.1)
    result = mc_service.simulate(network, grouping, control, seed, 1.0, runs=100_000, rng_seed=5, substeps=2)
    state = dynamics_service.forward_si(network, grouping, control, seed, 1.0)
    ode_reach = float(np.mean(state.final))
    _, in_stderr = mc_service.mean_field_gap(result, ode_reach)
    assert abs(in_stderr) <= 3


def test_mean_field_does_not_undercount():
    network = random_graph(10, 0.3, seed=2)
    seed = np.full(10, 0.05)
    result = mc_service.simulate(
        network, single_group(10), ControlSchedule.zeros(GRID, 1), seed, 1.0, runs=5000, rng_seed=9
    )
    ode_reach = dynamics_service.uncontrolled_reach(network, seed, 1.0, GRID)
    assert ode_reach >= result.mean_reach - 3 * result.stderr


def test_same_seed_same_result(path3):
    control = dynamics_service.uniform_control(GRID, 1, 0.3)
    args = (path3, single_group(3), control, [0.2, 0.0, 0.0], 1.0)

    def run(**kwargs):
        return mc_service.simulate(*args, runs=600, **kwargs)

    first = run(rng_seed=42, batch_size=200)
    assert first == run(rng_seed=42, batch_size=200)
    assert first == run(rng_seed=42, batch_size=1000)
    assert first == run(rng_seed=42, batch_size=200, n_jobs=2)
    other = run(rng_seed=43)
    assert other.mean_reach != first.mean_reach


def test_finer_substeps_agree(path3):
    control = dynamics_service.uniform_control(GRID, 1, 0.3)
    coarse, fine = (
        mc_service.simulate(
            path3, single_group(3), control, [0.2, 0.0, 0.0], 1.0, runs=10_000, rng_seed=11, substeps=substeps
        )
        for substeps in (2, 4)
    )
    spread = math.hypot(coarse.stderr, fine.stderr)
    assert abs(coarse.mean_reach - fine.mean_reach) <= 3 * spread


def test_histogram_counts_every_run(path3):
    result = mc_service.simulate(
        path3, single_group(3), dynamics_service.uniform_control(GRID, 1, 0.5), [0.3] * 3, 1.0, runs=300
    )
    assert len(result.reach_histogram) == 20
    assert sum(result.reach_histogram) == 300


def test_invalid_arguments(path3):
    control = ControlSchedule.zeros(GRID, 1)
    with pytest.raises(ConfigError):
        mc_service.simulate(path3, single_group(3), control, [0.1] * 3, 1.0, runs=0)
    with pytest.raises(ConfigError):
        mc_service.simulate(path3, single_group(3), control, [0.1] * 3, 1.0, substeps=0)
    with pytest.raises(ConfigError):
        mc_service.simulate(path3, single_group(3), control, [0.1] * 2, 1.0)


def test_mean_field_gap():
    result = McResult(runs=100, mean_reach=0.4, stderr=0.05, rng_seed=0)
    gap, scaled = mc_service.mean_field_gap(result, 0.5)
    assert gap == pytest.approx(0.1)
    assert scaled == pytest.approx(2.0)

    exact = McResult(runs=1, mean_reach=1.0, stderr=0.0, rng_seed=0)
    assert mc_service.mean_field_gap(exact, 1.0) == (0.0, 0.0)
    assert mc_service.mean_field_gap(exact, 0.9)[1] == -math.inf
