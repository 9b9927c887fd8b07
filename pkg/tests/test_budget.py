import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import BracketError
from app.models.models import BudgetParams, ControlSchedule, Grouping, QuadraticCost, SweepParams, TimeGrid
from app.services.budget_service import budget_service
from app.services.dynamics_service import dynamics_service
from conftest import random_graph, single_group

PRECISE = SweepParams(u_th=1e-10, max_iter=2000, damping=0.5)


def test_spend_examples(grid1000):
    cost = QuadraticCost(b=3.0, p=[0.5, 0.5])
    assert budget_service.spend_of(ControlSchedule.zeros(grid1000, 2), cost) == 0.0
    flat = dynamics_service.uniform_control(grid1000, 2, 0.4)
    assert budget_service.spend_of(flat, cost) == pytest.approx(3.0 * 0.16, abs=1e-12)
    ramp = ControlSchedule(grid=grid1000, u=np.vstack([grid1000.times, np.zeros(1001)]))
    assert budget_service.spend_of(ramp, cost) == pytest.approx(0.5, abs=1e-5)


def test_zero_budget_is_uncontrolled(k2, grid200):
    control, report = budget_service.solve_budget(
        k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=1.0, p=[1.0]), grid200, BudgetParams(B=0.0)
    )
    assert not control.u.any()
    uncontrolled = dynamics_service.uncontrolled_reach(k2, [0.1, 0.1], 1.0, grid200)
    assert report.reach == pytest.approx(uncontrolled, abs=1e-15)
    assert report.J == report.reach
    assert report.spend == 0.0
    assert report.mu == math.inf


@pytest.mark.parametrize("budget", [0.25, 1.0, 4.0])
def test_single_node_matches_constant_control(single_node, grid1000, budget):
    params = BudgetParams(B=budget, spend_rtol=1e-5, sweep=PRECISE)
    control, report = budget_service.solve_budget(
        single_node, single_group(1), [0.0], 0.0, QuadraticCost(b=1.0, p=[1.0]), grid1000, params
    )
    assert report.reach == pytest.approx(1.0 - math.exp(-math.sqrt(budget)), abs=1e-4)
    np.testing.assert_allclose(control.u, math.sqrt(budget), rtol=1e-3)
    assert report.mu > 0


def test_spend_and_iteration_bound():
    network = random_graph(20, 0.15, seed=21)
    grouping = Grouping(group_of=np.arange(20) % 2, M=2)
    cost = QuadraticCost(b=25.0, p=grouping.p)
    grid = TimeGrid(T=1.0, K=200)
    _, report = budget_service.solve_budget(
        network, grouping, np.full(20, 0.05), 1.0, cost, grid, BudgetParams(B=1.0, sweep=PRECISE)
    )
    assert abs(report.spend - 1.0) <= 1e-3
    assert report.spend_error <= 1e-3
    assert report.bisection_steps <= report.q_bound
    assert report.q_bound == math.ceil(math.log2((100.0 - 0.01) / 1e-8)) or report.widening_steps > 0


def test_reach_grows_and_multiplier_falls_with_budget():
    network = random_graph(30, 0.1, seed=30)
    grouping = Grouping(group_of=np.arange(30) % 3, M=3)
    cost = QuadraticCost(b=25.0, p=grouping.p)
    grid = TimeGrid(T=1.0, K=200)
    seed = np.full(30, 0.02)
    reaches, mus = [], []
    for budget in (0.5, 1.0, 2.0, 4.0):
        _, report = budget_service.solve_budget(
            network, grouping, seed, 1.0, cost, grid, BudgetParams(B=budget, sweep=PRECISE)
        )
        reaches.append(report.reach)
        mus.append(report.mu)
    assert all(later >= earlier - 1e-9 for earlier, later in zip(reaches, reaches[1:]))
    assert all(later <= earlier * (1 + 1e-3) for earlier, later in zip(mus, mus[1:]))


def test_widening_extends_a_narrow_bracket(single_node, grid200):
    params = BudgetParams(B=1.0, mu_low=1.0, mu_high=2.0, sweep=PRECISE)
    _, report = budget_service.solve_budget(
        single_node, single_group(1), [0.0], 0.0, QuadraticCost(b=1.0, p=[1.0]), grid200, params
    )
    assert report.widening_steps > 0
    assert abs(report.spend - 1.0) <= 1e-3


def test_bracket_error_when_widening_is_exhausted(single_node, grid200):
    params = BudgetParams(B=1.0, mu_low=1.0, mu_high=2.0, max_widening=0, sweep=PRECISE)
    with pytest.raises(BracketError):
        budget_service.solve_budget(
            single_node, single_group(1), [0.0], 0.0, QuadraticCost(b=1.0, p=[1.0]), grid200, params
        )


def test_bracket_must_be_ordered():
    with pytest.raises(ValidationError):
        BudgetParams(B=1.0, mu_low=2.0, mu_high=1.0)
