"""
Comparison planners - RRT, RRT-Connect, RRT*, Informed RRT* and FMT*
All of them share the collision, sampling and nearest-neighbour code of the main planner
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from bitstar import CostEvent, PlannerCounters, PlannerResult, SearchTree, StopCondition, radius
from nn import PointIndex
from sampling import ProlateHyperspheroid, RngStream, sample_informed, sample_uniform
from space import (ContractViolation, Path, StateVec, World, euclidean_distance, is_motion_free,
                   is_state_free, path_cost, world_measure)

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass
class BaselineConfig:
    goal_bias: float = 0.05
    max_edge_length: Optional[float] = None  # None picks 0.2 in the plane, 1.25 above
    rewire_eta: float = 1.1
    fmt_sample_count: int = 1000
    collision_step: Optional[float] = None
    stop: StopCondition = field(default_factory=lambda: StopCondition(time_budget=1.0))
    seed: int = 1

    def __post_init__(self):
        if not 0.0 <= self.goal_bias < 1.0:
            raise ContractViolation("goal_bias must lie in [0, 1)")
        if self.max_edge_length is not None and not self.max_edge_length > 0:
            raise ContractViolation("max_edge_length must be positive")
        if self.rewire_eta < 1.0:
            raise ContractViolation("rewire_eta must be >= 1")
        if self.fmt_sample_count < 1:
            raise ContractViolation("fmt_sample_count must be a positive integer")

    def edge_length(self, dimension: int) -> float:
        if self.max_edge_length is not None:
            return self.max_edge_length
        return 0.2 if dimension <= 2 else 1.25


class BaselinePlanner:
    """Shared plumbing: rng, counters, clock, steering and the event stream"""

    name = 'baseline'

    def __init__(self, world: World, config: Optional[BaselineConfig] = None, on_solution=None):
        self.world = world
        self.config = config or BaselineConfig()
        self.on_solution = on_solution
        self.step = self.config.collision_step or world.step
        self.edge_length = self.config.edge_length(world.dimension)
        self.rng = RngStream(self.config.seed)
        self.counters = PlannerCounters()
        self.events: List[CostEvent] = []
        self.c_best = INF
        self._start_ns = 0
        if euclidean_distance(world.x_start, world.x_goal) == 0.0:
            raise ContractViolation("start and goal coincide")

    def _elapsed_us(self) -> int:
        return (time.monotonic_ns() - self._start_ns) // 1000

    def _iteration_cap(self) -> Optional[int]:
        # Each sample counts as a batch of one
        caps = [c for c in (self.config.stop.max_iterations, self.config.stop.max_batches) if c is not None]
        return min(caps) if caps else None

    def _stopped(self, iterations: int) -> bool:
        cap = self._iteration_cap()
        if cap is not None and iterations >= cap:
            return True
        return self.config.stop.out_of_time(self._elapsed_us())

    def _motion_free(self, a: StateVec, b: StateVec) -> bool:
        self.counters.collision_checks += 1
        return is_motion_free(self.world, a, b, self.step)

    def steer(self, source: StateVec, target: StateVec) -> StateVec:
        """Move from source toward target by at most max_edge_length"""
        d = euclidean_distance(source, target)
        if d <= self.edge_length:
            return np.array(target, dtype=np.float64)
        return source + (target - source) * (self.edge_length / d)

    def _emit(self, cost: float):
        if not cost < self.c_best:
            return
        self.c_best = cost
        event = CostEvent(self._elapsed_us(), cost)
        self.events.append(event)
        logger.info(f"{self.name}: solution cost {cost:.6f} at {event.elapsed_us} us")
        if self.on_solution is not None:
            self.on_solution(event)

    def _result(self, path: Optional[Path], tree_edges=None) -> PlannerResult:
        return PlannerResult(self.name, path, list(self.events), self.counters,
                             self._elapsed_us(), tree_edges or [])

    def plan(self) -> PlannerResult:
        self._start_ns = time.monotonic_ns()
        if self.config.stop.is_zero():
            return self._result(None)
        return self._solve()

    def _solve(self) -> PlannerResult:
        raise NotImplementedError


def _tree_edges(tree: SearchTree) -> List[Tuple[StateVec, StateVec]]:
    return [(tree.states[p], tree.states[v]) for p, v in tree.edges()]


def _tree_path(tree: SearchTree, v: int) -> Path:
    waypoints = [tree.states[i] for i in tree.path_ids(v)]
    return Path(waypoints, tree.cost_to_come(v))


class RRTPlanner(BaselinePlanner):
    """Goal-biased RRT; stops at the first connection to the goal"""

    name = 'rrt'

    def _solve(self) -> PlannerResult:
        world = self.world
        tree = SearchTree(0, world.x_start)
        index = PointIndex(world.dimension)
        index.insert(world.x_start, 0)
        ids = itertools.count(1)
        iterations = 0

        while not self._stopped(iterations):
            iterations += 1
            if self.rng.random() < self.config.goal_bias:
                target = world.x_goal
            else:
                target = sample_uniform(world.bounds, self.rng)
            self.counters.samples += 1
            nearest = index.nearest(target)
            x_near = tree.states[nearest]
            x_new = self.steer(x_near, target)
            if not self._motion_free(x_near, x_new):
                continue
            new_id = next(ids)
            tree.add_vertex(new_id, x_new, nearest, euclidean_distance(x_near, x_new))
            index.insert(x_new, new_id)

            if np.array_equal(x_new, world.x_goal):
                goal_id = new_id
            elif (euclidean_distance(x_new, world.x_goal) <= self.edge_length
                  and self._motion_free(x_new, world.x_goal)):
                goal_id = next(ids)
                tree.add_vertex(goal_id, world.x_goal, new_id, euclidean_distance(x_new, world.x_goal))
            else:
                continue
            self._emit(tree.cost_to_come(goal_id))
            self.counters.batches = iterations
            return self._result(_tree_path(tree, goal_id), _tree_edges(tree))

        self.counters.batches = iterations
        return self._result(None, _tree_edges(tree))


class _GrowingTree:
    """One side of the bidirectional search"""

    def __init__(self, root: StateVec, dimension: int):
        self.tree = SearchTree(0, root)
        self.index = PointIndex(dimension)
        self.index.insert(root, 0)
        self._ids = itertools.count(1)

    def add(self, state: StateVec, parent: int) -> int:
        new_id = next(self._ids)
        self.tree.add_vertex(new_id, state, parent, euclidean_distance(self.tree.states[parent], state))
        self.index.insert(state, new_id)
        return new_id


TRAPPED, ADVANCED, REACHED = 'trapped', 'advanced', 'reached'


class RRTConnectPlanner(BaselinePlanner):
    """Bidirectional RRT with greedy connection and no goal bias"""

    name = 'rrtconnect'

    def _extend(self, side: _GrowingTree, target: StateVec) -> Tuple[str, Optional[int]]:
        nearest = side.index.nearest(target)
        x_near = side.tree.states[nearest]
        x_new = self.steer(x_near, target)
        if not self._motion_free(x_near, x_new):
            return TRAPPED, None
        new_id = side.add(x_new, nearest)
        return (REACHED if np.array_equal(x_new, target) else ADVANCED), new_id

    def _connect(self, side: _GrowingTree, target: StateVec) -> Tuple[str, Optional[int]]:
        status, new_id = ADVANCED, None
        while status == ADVANCED:
            status, last = self._extend(side, target)
            if last is not None:
                new_id = last
        return status, new_id

    def _solve(self) -> PlannerResult:
        world = self.world
        a = _GrowingTree(world.x_start, world.dimension)
        b = _GrowingTree(world.x_goal, world.dimension)
        start_side = a
        iterations = 0

        while not self._stopped(iterations):
            iterations += 1
            target = sample_uniform(world.bounds, self.rng)
            self.counters.samples += 1
            status, new_id = self._extend(a, target)
            if status != TRAPPED:
                x_new = a.tree.states[new_id]
                status, other_id = self._connect(b, x_new)
                if status == REACHED:
                    self.counters.batches = iterations
                    path = self._join(a, new_id, b, other_id, start_side)
                    self._emit(path.cost)
                    edges = _tree_edges(a.tree) + _tree_edges(b.tree)
                    return self._result(path, edges)
            a, b = b, a

        self.counters.batches = iterations
        return self._result(None, _tree_edges(a.tree) + _tree_edges(b.tree))

    @staticmethod
    def _join(a: _GrowingTree, a_id: int, b: _GrowingTree, b_id: int, start_side: _GrowingTree) -> Path:
        first = [a.tree.states[i] for i in a.tree.path_ids(a_id)]
        second = [b.tree.states[i] for i in b.tree.path_ids(b_id)]
        # Both trees end on the same meeting state
        waypoints = first + list(reversed(second))[1:]
        if a is not start_side:
            waypoints.reverse()
        return Path(waypoints, path_cost(waypoints))


class RRTStarPlanner(BaselinePlanner):
    """RRT* with r-disc choose-parent and rewiring; informed=True samples the informed set"""

    name = 'rrtstar'

    def __init__(self, world: World, config: Optional[BaselineConfig] = None, on_solution=None,
                 informed: bool = False):
        super().__init__(world, config, on_solution)
        self.informed = informed
        if informed:
            self.name = 'informedrrtstar'
        self._phs = ProlateHyperspheroid(world.x_start, world.x_goal)
        self._measure = world_measure(world)

    def _sample(self) -> StateVec:
        phs = self._phs
        if self.informed and not math.isinf(self.c_best):
            phs = phs.with_cost(max(self.c_best, phs.c_min))
        return sample_informed(phs, self.world.bounds, self.rng)

    def _solve(self) -> PlannerResult:
        world = self.world
        tree = SearchTree(0, world.x_start)
        index = PointIndex(world.dimension)
        index.insert(world.x_start, 0)
        ids = itertools.count(1)
        goal_id = None
        iterations = 0

        while not self._stopped(iterations):
            iterations += 1
            if self.rng.random() < self.config.goal_bias:
                target = world.x_goal
            else:
                target = self._sample()
            self.counters.samples += 1
            nearest = index.nearest(target)
            x_near = tree.states[nearest]
            x_new = self.steer(x_near, target)
            if not self._motion_free(x_near, x_new):
                continue

            r = radius(max(len(tree), 2), world.dimension, self.config.rewire_eta, self._measure)
            near = sorted(index.near(x_new, r))
            reaches_goal = np.array_equal(x_new, world.x_goal)

            if reaches_goal and goal_id is not None:
                self._improve_vertex(tree, goal_id, near)
            else:
                parent, cost = nearest, tree.cost_to_come(nearest) + euclidean_distance(x_near, x_new)
                for u in near:
                    c = tree.cost_to_come(u) + euclidean_distance(tree.states[u], x_new)
                    if c < cost and self._motion_free(tree.states[u], x_new):
                        parent, cost = u, c
                new_id = next(ids)
                tree.add_vertex(new_id, x_new, parent, euclidean_distance(tree.states[parent], x_new))
                index.insert(x_new, new_id)
                if reaches_goal:
                    goal_id = new_id
                self._rewire(tree, new_id, near)

            if goal_id is not None:
                self._emit(tree.cost_to_come(goal_id))

        self.counters.batches = iterations
        path = _tree_path(tree, goal_id) if goal_id is not None else None
        return self._result(path, _tree_edges(tree))

    def _improve_vertex(self, tree: SearchTree, v: int, near: List[int]):
        """Give an existing vertex the cheapest collision-free parent among near"""
        x_v = tree.states[v]
        best_parent, best_cost = None, tree.cost_to_come(v)
        for u in near:
            if u == v:
                continue
            c = tree.cost_to_come(u) + euclidean_distance(tree.states[u], x_v)
            if c < best_cost and self._motion_free(tree.states[u], x_v):
                best_parent, best_cost = u, c
        if best_parent is not None and v not in tree.path_ids(best_parent):
            tree.rewire(v, best_parent, euclidean_distance(tree.states[best_parent], x_v))
            self.counters.rewirings += 1

    def _rewire(self, tree: SearchTree, new_id: int, near: List[int]):
        x_new = tree.states[new_id]
        g_new = tree.cost_to_come(new_id)
        for w in near:
            if w == tree.parent[new_id]:
                continue
            c = g_new + euclidean_distance(x_new, tree.states[w])
            if c < tree.cost_to_come(w) and self._motion_free(x_new, tree.states[w]):
                tree.rewire(w, new_id, euclidean_distance(x_new, tree.states[w]))
                self.counters.rewirings += 1


class FMTStarPlanner(BaselinePlanner):
    """Single-batch fast marching tree over uniform free samples

    After planning, `states`, `radius`, `start_index` and `goal_index`
    describe the explicit graph that was searched.
    """

    name = 'fmtstar'

    def __init__(self, world: World, config: Optional[BaselineConfig] = None, on_solution=None):
        super().__init__(world, config, on_solution)
        self.states: List[StateVec] = []
        self.radius = INF
        self.start_index = 0
        self.goal_index = 0

    def _draw_samples(self) -> List[StateVec]:
        samples = []
        while len(samples) < self.config.fmt_sample_count:
            x = sample_uniform(self.world.bounds, self.rng)
            if is_state_free(self.world, x):
                samples.append(x)
            else:
                self.counters.rejected_samples += 1
        self.counters.samples += len(samples)
        return samples

    def _solve(self) -> PlannerResult:
        world = self.world
        self.states = [world.x_start] + self._draw_samples() + [world.x_goal]
        self.start_index, self.goal_index = 0, len(self.states) - 1
        self.radius = radius(max(self.config.fmt_sample_count, 2), world.dimension,
                             self.config.rewire_eta, world_measure(world))
        self.counters.batches = 1

        index = PointIndex(world.dimension)
        index.insert_many((x, i) for i, x in enumerate(self.states))
        neighbours: Dict[int, List[int]] = {}

        def near(i: int) -> List[int]:
            if i not in neighbours:
                neighbours[i] = sorted(j for j in index.near(self.states[i], self.radius) if j != i)
            return neighbours[i]

        cost: Dict[int, float] = {self.start_index: 0.0}
        parent: Dict[int, Optional[int]] = {self.start_index: None}
        unvisited = set(range(1, len(self.states)))
        open_set = {self.start_index}
        heap: List[Tuple[float, int]] = []
        z = self.start_index
        solved = False

        while True:
            if self.config.stop.out_of_time(self._elapsed_us()):
                break
            if z == self.goal_index:
                solved = True
                break
            self.counters.vertices_expanded += 1
            for x in [i for i in near(z) if i in unvisited]:
                candidates = [y for y in near(x) if y in open_set]
                y_min = min(candidates, key=lambda y: (cost[y] + euclidean_distance(self.states[y], self.states[x]), y))
                self.counters.edges_processed += 1
                if self._motion_free(self.states[y_min], self.states[x]):
                    cost[x] = cost[y_min] + euclidean_distance(self.states[y_min], self.states[x])
                    parent[x] = y_min
                    unvisited.discard(x)
                    open_set.add(x)
                    heapq.heappush(heap, (cost[x], x))
            open_set.discard(z)
            if not heap:
                break
            _, z = heapq.heappop(heap)

        edges = [(self.states[p], self.states[v]) for v, p in parent.items() if p is not None]
        if not solved:
            logger.info(f"{self.name}: no solution over {len(self.states)} states")
            return self._result(None, edges)
        ids = [self.goal_index]
        while parent[ids[-1]] is not None:
            ids.append(parent[ids[-1]])
        ids.reverse()
        path = Path([self.states[i] for i in ids], cost[self.goal_index])
        self._emit(path.cost)
        return self._result(path, edges)


def _with_budget(config: Optional[BaselineConfig], budget: Optional[StopCondition]) -> BaselineConfig:
    config = config or BaselineConfig()
    return replace(config, stop=budget) if budget is not None else config


def rrt_plan(world: World, config: Optional[BaselineConfig] = None,
             budget: Optional[StopCondition] = None) -> PlannerResult:
    return RRTPlanner(world, _with_budget(config, budget)).plan()


def rrt_connect_plan(world: World, config: Optional[BaselineConfig] = None,
                     budget: Optional[StopCondition] = None) -> PlannerResult:
    return RRTConnectPlanner(world, _with_budget(config, budget)).plan()


def rrtstar_plan(world: World, config: Optional[BaselineConfig] = None,
                 budget: Optional[StopCondition] = None) -> PlannerResult:
    return RRTStarPlanner(world, _with_budget(config, budget)).plan()


def informed_rrtstar_plan(world: World, config: Optional[BaselineConfig] = None,
                          budget: Optional[StopCondition] = None) -> PlannerResult:
    return RRTStarPlanner(world, _with_budget(config, budget), informed=True).plan()


def fmtstar_plan(world: World, config: Optional[BaselineConfig] = None) -> PlannerResult:
    return FMTStarPlanner(world, config).plan()
