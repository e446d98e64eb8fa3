"""
Tests for the comparison planners
"""

import math

import numpy as np
import pytest

from baselines import (BaselineConfig, FMTStarPlanner, RRTStarPlanner, fmtstar_plan, informed_rrtstar_plan,
                       rrt_connect_plan, rrt_plan, rrtstar_plan)
from bitstar import StopCondition
from conftest import C_MIN
from oracle import rgg_shortest_path
from space import Box, ContractViolation, World, path_cost, validate_path


def iterations(n: int, seed: int = 1, **kwargs) -> BaselineConfig:
    return BaselineConfig(seed=seed, stop=StopCondition(max_iterations=n), **kwargs)


def test_edge_length_defaults():
    assert BaselineConfig().edge_length(2) == 0.2
    assert BaselineConfig().edge_length(8) == 1.25
    assert BaselineConfig(max_edge_length=0.5).edge_length(2) == 0.5


@pytest.mark.parametrize('kwargs', [{'goal_bias': 1.0}, {'max_edge_length': 0.0}, {'rewire_eta': 0.5},
                                    {'fmt_sample_count': 0}])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ContractViolation):
        BaselineConfig(**kwargs)


@pytest.mark.parametrize('plan', [rrt_plan, rrt_connect_plan])
def test_single_shot_planners_solve_empty_world(empty_world, plan):
    result = plan(empty_world, iterations(5000, seed=3))
    assert result.solved
    assert len(result.events) == 1
    assert result.path.cost >= C_MIN
    assert result.path.cost == pytest.approx(path_cost(result.path.waypoints), abs=1e-9)
    assert validate_path(empty_world, result.path)


@pytest.mark.parametrize('plan', [rrt_plan, rrt_connect_plan, rrtstar_plan, informed_rrtstar_plan])
def test_sealed_goal(sealed_world, plan):
    result = plan(sealed_world, iterations(1500, seed=2))
    assert not result.solved
    assert result.events == []


@pytest.mark.parametrize('plan', [rrt_plan, rrt_connect_plan, rrtstar_plan, informed_rrtstar_plan])
def test_seeded_reruns_match(wall_world, plan):
    first = plan(wall_world, iterations(1500, seed=12))
    second = plan(wall_world, iterations(1500, seed=12))
    assert [e.cost for e in first.events] == [e.cost for e in second.events]
    assert first.counters == second.counters
    if first.solved:
        assert first.path.as_lists() == second.path.as_lists()


@pytest.mark.parametrize('plan', [rrt_plan, rrt_connect_plan, rrtstar_plan, fmtstar_plan])
def test_zero_budget(empty_world, plan):
    config = BaselineConfig(stop=StopCondition(time_budget=0.0))
    result = plan(empty_world, config)
    assert result.events == [] and result.path is None


def test_coincident_start_and_goal():
    world = World(2, Box([-1, -1], [1, 1]), [], [0.3, 0.3], [0.3, 0.3])
    with pytest.raises(ContractViolation):
        rrt_plan(world, iterations(10))


def test_rrtstar_costs_decrease(wall_world):
    result = rrtstar_plan(wall_world, iterations(3000, seed=5))
    assert result.solved
    costs = [e.cost for e in result.events]
    assert all(b < a for a, b in zip(costs[:-1], costs[1:]))
    assert result.path.cost == pytest.approx(costs[-1], abs=1e-12)
    assert validate_path(wall_world, result.path)
    assert result.counters.rewirings > 0


def test_informed_matches_rrtstar_before_first_solution(wall_world):
    plain = rrtstar_plan(wall_world, iterations(3000, seed=9))
    informed = informed_rrtstar_plan(wall_world, iterations(3000, seed=9))
    assert plain.events and informed.events
    assert plain.events[0].cost == informed.events[0].cost

    short_plain = rrtstar_plan(wall_world, iterations(5, seed=9))
    short_informed = informed_rrtstar_plan(wall_world, iterations(5, seed=9))
    assert [(a.tolist(), b.tolist()) for a, b in short_plain.tree_edges] == \
        [(a.tolist(), b.tolist()) for a, b in short_informed.tree_edges]


def test_informed_planner_name():
    world = World(2, Box([-1, -1], [1, 1]), [], [0, 0], [0.9, 0.9])
    assert RRTStarPlanner(world, informed=True).name == 'informedrrtstar'


@pytest.mark.slow
def test_rrtstar_converges_on_empty_world(empty_world):
    finals = [rrtstar_plan(empty_world, iterations(10 ** 4, seed=s)).best_cost for s in range(20)]
    assert float(np.median(finals)) <= 1.03 * C_MIN


def test_fmtstar_empty_world(empty_world):
    result = fmtstar_plan(empty_world, BaselineConfig(fmt_sample_count=500, seed=4))
    assert result.solved
    assert len(result.events) == 1
    assert result.path.cost <= 1.1 * C_MIN
    assert validate_path(empty_world, result.path)


def test_fmtstar_sealed_goal(sealed_world):
    result = fmtstar_plan(sealed_world, BaselineConfig(fmt_sample_count=300, seed=4))
    assert not result.solved
    assert result.events == []


@pytest.mark.parametrize('seed', range(5))
def test_fmtstar_never_beats_the_oracle(wall_world, seed):
    planner = FMTStarPlanner(wall_world, BaselineConfig(fmt_sample_count=500, seed=seed))
    result = planner.plan()
    expected, _ = rgg_shortest_path(planner.states, planner.radius, wall_world,
                                    planner.start_index, planner.goal_index)
    if result.solved:
        assert result.path.cost >= expected - 1e-9
    else:
        assert len(planner.states) == 502


@pytest.mark.benchmark
def test_informed_reaches_target_no_later_than_rrtstar(empty_world):
    """Iterations until the cost is within 1% of optimal, median over 20 seeds"""
    target = 1.01 * C_MIN

    def iterations_to_target(informed: bool, seed: int) -> float:
        planner = RRTStarPlanner(empty_world, iterations(20000, seed=seed), informed=informed)
        hits = []
        planner.on_solution = lambda event: hits.append((planner.counters.samples, event.cost))
        planner.plan()
        return next((float(n) for n, cost in hits if cost <= target), math.inf)

    informed = np.median([iterations_to_target(True, s) for s in range(20)])
    plain = np.median([iterations_to_target(False, s) for s in range(20)])
    assert informed <= plain
