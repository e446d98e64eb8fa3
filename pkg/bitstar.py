"""
Batch informed tree planner
Heuristically ordered search of an implicit r-disc random geometric graph,
grown batch by batch from informed samples, with an anytime solution stream
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Set, Tuple

from nn import PointIndex
from sampling import ProlateHyperspheroid, RngStream, phs_measure, sample_informed
from space import (ContractViolation, Path, StateVec, World, euclidean_distance, is_motion_free,
                   is_state_free, unit_ball_measure, world_measure)

logger = logging.getLogger(__name__)

INF = math.inf
STALE_TOLERANCE = 1e-12

START_ID = 0
GOAL_ID = 1


@dataclass
class StopCondition:
    """Any limit that is set stops the run; the batch cap only at a batch end"""
    time_budget: Optional[float] = None  # seconds
    max_batches: Optional[int] = None
    max_iterations: Optional[int] = None

    def __post_init__(self):
        if self.time_budget is None and self.max_batches is None and self.max_iterations is None:
            raise ContractViolation("a stop condition needs a time budget or a batch/iteration cap")
        for name in ('time_budget', 'max_batches', 'max_iterations'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ContractViolation(f"{name} must be non-negative")

    def is_zero(self) -> bool:
        return 0 in (self.time_budget, self.max_batches, self.max_iterations)

    def out_of_time(self, elapsed_us: int) -> bool:
        return self.time_budget is not None and elapsed_us >= self.time_budget * 1e6


@dataclass
class PlannerConfig:
    samples_per_batch: int = 100
    rgg_eta: float = 1.1
    prune_threshold_fraction: float = 0.01
    collision_step: Optional[float] = None
    stop: StopCondition = field(default_factory=lambda: StopCondition(time_budget=1.0))
    seed: int = 1

    def __post_init__(self):
        if self.samples_per_batch < 1:
            raise ContractViolation("samples_per_batch must be a positive integer")
        if self.rgg_eta < 1.0:
            raise ContractViolation("rgg_eta must be >= 1")
        if not 0.0 <= self.prune_threshold_fraction < 1.0:
            raise ContractViolation("prune_threshold_fraction must lie in [0, 1)")
        if self.collision_step is not None and not self.collision_step > 0:
            raise ContractViolation("collision_step must be positive")


class CostEvent(NamedTuple):
    elapsed_us: int
    cost: float


@dataclass
class PlannerCounters:
    batches: int = 0
    samples: int = 0
    rejected_samples: int = 0
    collision_checks: int = 0
    edges_processed: int = 0
    vertices_expanded: int = 0
    rewirings: int = 0
    prunes: int = 0
    duplicate_edge_insertions: int = 0
    dominance_violations: int = 0
    stale_requeues: int = 0


@dataclass
class PlannerResult:
    planner: str
    path: Optional[Path]
    events: List[CostEvent]
    counters: PlannerCounters
    elapsed_us: int = 0
    tree_edges: List[Tuple[StateVec, StateVec]] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.path is not None

    @property
    def best_cost(self) -> float:
        return self.events[-1].cost if self.events else INF


def radius(q: int, n: int, eta: float, measure_lambda: float) -> float:
    """r-disc connection radius for a graph of q states"""
    if q < 2:
        raise ContractViolation(f"radius needs q >= 2, got {q}")
    if measure_lambda <= 0:
        raise ContractViolation("radius needs a positive measure")
    return (2.0 * eta * (1.0 + 1.0 / n) ** (1.0 / n)
            * (measure_lambda / unit_ball_measure(n)) ** (1.0 / n)
            * (math.log(q) / q) ** (1.0 / n))


class SearchTree:
    """Parent-linked tree rooted at the start with lazily computed cost-to-come

    Only parent links and edge costs are stored. cost_to_come walks the chain
    and memoises; any rewiring or removal drops the memo.
    """

    def __init__(self, root: int, state: StateVec):
        self.root = root
        self.states: Dict[int, StateVec] = {root: state}
        self.parent: Dict[int, Optional[int]] = {root: None}
        self.edge_cost: Dict[int, float] = {root: 0.0}
        self.children: Dict[int, Set[int]] = {root: set()}
        self._g: Dict[int, float] = {root: 0.0}

    def __contains__(self, v: int) -> bool:
        return v in self.states

    def __len__(self) -> int:
        return len(self.states)

    def vertices(self) -> List[int]:
        return list(self.states)

    def _reset_memo(self):
        self._g = {self.root: 0.0}

    def add_vertex(self, v: int, state: StateVec, parent: int, cost: float):
        if v in self.states:
            raise ContractViolation(f"vertex {v} is already in the tree")
        self.states[v] = state
        self.parent[v] = parent
        self.edge_cost[v] = cost
        self.children[v] = set()
        self.children[parent].add(v)
        self._g[v] = self.cost_to_come(parent) + cost

    def rewire(self, v: int, new_parent: int, cost: float):
        old = self.parent[v]
        if old is not None:
            self.children[old].discard(v)
        self.parent[v] = new_parent
        self.edge_cost[v] = cost
        self.children[new_parent].add(v)
        self._reset_memo()

    def remove_vertex(self, v: int):
        """Drop v; its children become orphans with infinite cost-to-come"""
        if v == self.root:
            raise ContractViolation("the root cannot be removed")
        parent = self.parent.pop(v)
        if parent is not None:
            self.children[parent].discard(v)
        for child in self.children.pop(v):
            self.parent[child] = None
        del self.states[v]
        del self.edge_cost[v]
        self._reset_memo()

    def has_edge(self, a: int, b: int) -> bool:
        return self.parent.get(b) == a or self.parent.get(a) == b

    def cost_to_come(self, v: int) -> float:
        g = self._g.get(v)
        if g is not None:
            return g
        if v not in self.states:
            return INF
        chain = []
        node = v
        while True:
            g = self._g.get(node)
            if g is not None:
                break
            parent = self.parent[node]
            if parent is None:
                g = INF
                self._g[node] = g
                break
            chain.append(node)
            node = parent
        for node in reversed(chain):
            g = g + self.edge_cost[node]
            self._g[node] = g
        return g

    def path_ids(self, v: int) -> List[int]:
        ids = [v]
        while self.parent[ids[-1]] is not None:
            ids.append(self.parent[ids[-1]])
            if len(ids) > len(self.states):
                raise ContractViolation("parent links contain a cycle")
        ids.reverse()
        return ids

    def edges(self) -> List[Tuple[int, int]]:
        return [(p, v) for v, p in self.parent.items() if p is not None]


class EdgeEntry(NamedTuple):
    key: float
    tie: float
    token: int
    source: int
    target: int
    c_hat: float
    g_source: float


class EdgeQueue:
    """Binary heap keyed at insertion, with lazy removal"""

    def __init__(self):
        self._heap: List[EdgeEntry] = []
        self._live: Dict[int, EdgeEntry] = {}
        self._by_target: Dict[int, Set[int]] = {}
        self._tokens = itertools.count()

    def __len__(self) -> int:
        return len(self._live)

    def push(self, source: int, target: int, c_hat: float, g_source: float, h_target: float):
        entry = EdgeEntry(g_source + c_hat + h_target, g_source, next(self._tokens),
                          source, target, c_hat, g_source)
        heapq.heappush(self._heap, entry)
        self._live[entry.token] = entry
        self._by_target.setdefault(target, set()).add(entry.token)

    def peek(self) -> Optional[EdgeEntry]:
        while self._heap and self._heap[0].token not in self._live:
            heapq.heappop(self._heap)
        return self._heap[0] if self._heap else None

    def pop(self) -> EdgeEntry:
        entry = self.peek()
        if entry is None:
            raise ContractViolation("pop from an empty edge queue")
        heapq.heappop(self._heap)
        self._discard(entry)
        return entry

    def _discard(self, entry: EdgeEntry):
        del self._live[entry.token]
        tokens = self._by_target.get(entry.target)
        if tokens is not None:
            tokens.discard(entry.token)
            if not tokens:
                del self._by_target[entry.target]

    def entries_into(self, target: int) -> List[EdgeEntry]:
        return [self._live[t] for t in sorted(self._by_target.get(target, ()))]

    def remove(self, entry: EdgeEntry):
        if entry.token in self._live:
            self._discard(entry)

    def clear(self):
        self._heap.clear()
        self._live.clear()
        self._by_target.clear()


class VertexEntry(NamedTuple):
    key: float
    token: int
    vertex: int
    g_vertex: float


class VertexQueue:
    """Binary heap of vertices keyed on g_T(v) + h_hat(v) at insertion"""

    def __init__(self):
        self._heap: List[VertexEntry] = []
        self._members: Dict[int, int] = {}
        self._tokens = itertools.count()

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, v: int) -> bool:
        return v in self._members

    def push(self, v: int, g_vertex: float, h_vertex: float):
        entry = VertexEntry(g_vertex + h_vertex, next(self._tokens), v, g_vertex)
        self._members[v] = entry.token
        heapq.heappush(self._heap, entry)

    def peek(self) -> Optional[VertexEntry]:
        while self._heap and self._members.get(self._heap[0].vertex) != self._heap[0].token:
            heapq.heappop(self._heap)
        return self._heap[0] if self._heap else None

    def remove(self, v: int):
        if v not in self._members:
            raise ContractViolation(f"vertex {v} is not in the vertex queue")
        del self._members[v]

    def clear(self):
        self._heap.clear()
        self._members.clear()


@dataclass
class PlannerState:
    tree: SearchTree
    samples: Dict[int, StateVec]
    old_vertices: Set[int] = field(default_factory=set)
    radius: float = INF
    c_best: float = INF

    def all_states(self) -> Dict[int, StateVec]:
        states = dict(self.tree.states)
        states.update(self.samples)
        return states


class BITStarPlanner:
    """Anytime planner alternating batch creation and ordered edge processing"""

    name = 'bitstar'

    def __init__(self, world: World, config: Optional[PlannerConfig] = None,
                 on_solution: Optional[Callable[[CostEvent], None]] = None,
                 on_batch_end: Optional[Callable[[PlannerState], None]] = None):
        self.world = world
        self.config = config or PlannerConfig()
        self.on_solution = on_solution
        self.on_batch_end = on_batch_end
        self.step = self.config.collision_step or world.step
        self.rng = RngStream(self.config.seed)
        self.counters = PlannerCounters()
        self.events: List[CostEvent] = []
        self.edge_queue = EdgeQueue()
        self.vertex_queue = VertexQueue()
        self.state: Optional[PlannerState] = None
        self._phs: Optional[ProlateHyperspheroid] = None
        self._g_hat: Dict[int, float] = {}
        self._h_hat: Dict[int, float] = {}
        self._batch_edges: Set[Tuple[int, int]] = set()
        self._ids = itertools.count(2)
        self._last_prune_cost = INF
        self._start_ns = 0
        self.sample_index = PointIndex(world.dimension)
        self.vertex_index = PointIndex(world.dimension)

    # Heuristics

    def f_hat(self, x: int) -> float:
        return self._g_hat[x] + self._h_hat[x]

    def _register(self, x: int, state: StateVec):
        self._g_hat[x] = euclidean_distance(self.world.x_start, state)
        self._h_hat[x] = euclidean_distance(state, self.world.x_goal)

    def _forget(self, x: int):
        self._g_hat.pop(x, None)
        self._h_hat.pop(x, None)

    def edge_key(self, v: int, x: int) -> Tuple[float, float]:
        g_v = self.state.tree.cost_to_come(v)
        c_hat = euclidean_distance(self.state.tree.states[v], self._state_of(x))
        return g_v + c_hat + self._h_hat[x], g_v

    def vertex_key(self, v: int) -> float:
        return self.state.tree.cost_to_come(v) + self._h_hat[v]

    def _state_of(self, x: int) -> StateVec:
        if x in self.state.tree:
            return self.state.tree.states[x]
        return self.state.samples[x]

    # Run loop

    def _elapsed_us(self) -> int:
        return (time.monotonic_ns() - self._start_ns) // 1000

    def initialise(self):
        """Fresh tree holding the start, with the goal as the only sample"""
        world = self.world
        if not is_state_free(world, world.x_start):
            raise ContractViolation("start state is in collision")
        if not is_state_free(world, world.x_goal):
            raise ContractViolation("goal state is in collision")
        if euclidean_distance(world.x_start, world.x_goal) == 0.0:
            raise ContractViolation("start and goal coincide")
        self.edge_queue = EdgeQueue()
        self.vertex_queue = VertexQueue()
        self.sample_index = PointIndex(world.dimension)
        self.vertex_index = PointIndex(world.dimension)
        self._g_hat.clear()
        self._h_hat.clear()
        self._batch_edges.clear()
        self._ids = itertools.count(2)
        self._last_prune_cost = INF
        tree = SearchTree(START_ID, world.x_start)
        self.state = PlannerState(tree=tree, samples={GOAL_ID: world.x_goal})
        self._register(START_ID, world.x_start)
        self._register(GOAL_ID, world.x_goal)
        self.vertex_index.insert(world.x_start, START_ID)
        self.sample_index.insert(world.x_goal, GOAL_ID)
        self._phs = ProlateHyperspheroid(world.x_start, world.x_goal)

    def solution_is_optimal(self) -> bool:
        """True once c_best reaches the straight-line lower bound"""
        return self.state.c_best <= self._phs.c_min + STALE_TOLERANCE

    def plan(self) -> PlannerResult:
        stop = self.config.stop
        self.initialise()
        self._start_ns = time.monotonic_ns()
        if stop.is_zero():
            return self._result()

        iterations = 0
        while True:
            if stop.out_of_time(self._elapsed_us()):
                break
            if stop.max_iterations is not None and iterations >= stop.max_iterations:
                break
            if not len(self.edge_queue) and not len(self.vertex_queue):
                if self.counters.batches > 0 and self.on_batch_end is not None:
                    self.on_batch_end(self.state)
                if stop.max_batches is not None and self.counters.batches >= stop.max_batches:
                    break
                if self.solution_is_optimal():
                    logger.info(f"{self.name}: solution meets the straight-line bound, stopping")
                    break
                self.new_batch()

            while len(self.vertex_queue) and self._best_vertex_value() <= self._best_edge_value():
                self.expand_vertex(self.vertex_queue.peek().vertex)

            if not len(self.edge_queue):
                continue
            self.process_best_edge()
            iterations += 1

        return self._result()

    def _result(self) -> PlannerResult:
        path = None
        if self.state is not None and GOAL_ID in self.state.tree and self.state.c_best < INF:
            path = self.extract_path()
        tree_edges = []
        if self.state is not None:
            tree = self.state.tree
            tree_edges = [(tree.states[p], tree.states[v]) for p, v in tree.edges()]
        return PlannerResult(self.name, path, list(self.events), self.counters,
                             self._elapsed_us(), tree_edges)

    # Batch creation

    def _informed_set(self) -> ProlateHyperspheroid:
        c_best = self.state.c_best
        if math.isinf(c_best):
            return self._phs
        return self._phs.with_cost(max(c_best, self._phs.c_min))

    def _should_prune(self) -> bool:
        c_best = self.state.c_best
        if math.isinf(c_best):
            return False
        if math.isinf(self._last_prune_cost):
            return True
        improvement = (self._last_prune_cost - c_best) / self._last_prune_cost
        return improvement > self.config.prune_threshold_fraction

    def new_batch(self):
        """Prune, add m informed samples, requeue every vertex and shrink r"""
        if len(self.edge_queue) or len(self.vertex_queue):
            raise ContractViolation("a new batch needs both queues empty")
        state = self.state
        if self._should_prune():
            self.prune(state.c_best)

        informed = self._informed_set()
        added = 0
        while added < self.config.samples_per_batch:
            x = sample_informed(informed, self.world.bounds, self.rng)
            if not is_state_free(self.world, x):
                self.counters.rejected_samples += 1
                continue
            self.add_sample(x)
            added += 1
        self.counters.samples += added

        state.old_vertices = set(state.tree.vertices())
        for v in sorted(state.old_vertices):
            self.vertex_queue.push(v, state.tree.cost_to_come(v), self._h_hat[v])

        measure = world_measure(self.world)
        if not math.isinf(state.c_best):
            informed_measure = phs_measure(informed, self.world.dimension)
            # zero once c_best reaches c_min
            if informed_measure > 0.0:
                measure = min(measure, informed_measure)
        q = len(state.tree) + len(state.samples)
        state.radius = radius(q, self.world.dimension, self.config.rgg_eta, measure)
        self._batch_edges.clear()
        self.counters.batches += 1
        logger.debug(f"Batch {self.counters.batches}: q={q}, r={state.radius:.6f}, c_best={state.c_best}")

    def add_sample(self, x: StateVec) -> int:
        """Register a free state as an unconnected sample"""
        sample_id = next(self._ids)
        self.state.samples[sample_id] = x
        self._register(sample_id, x)
        self.sample_index.insert(x, sample_id)
        return sample_id

    def connect_sample(self, v: int, x: int, cost: float):
        """Move sample x into the tree under v and queue it for expansion"""
        x_state = self.state.samples.pop(x)
        self.sample_index.remove(x)
        self.state.tree.add_vertex(x, x_state, v, cost)
        self.vertex_index.insert(x_state, x)
        self.vertex_queue.push(x, self.state.tree.cost_to_come(x), self._h_hat[x])

    # Queue values with re-keying of stale entries

    def _best_edge_value(self) -> float:
        tree = self.state.tree
        while True:
            entry = self.edge_queue.peek()
            if entry is None:
                return INF
            g_now = tree.cost_to_come(entry.source)
            if abs(g_now - entry.g_source) <= STALE_TOLERANCE or (math.isinf(g_now) and math.isinf(entry.g_source)):
                return entry.key
            self.edge_queue.pop()
            self.edge_queue.push(entry.source, entry.target, entry.c_hat, g_now, self._h_hat[entry.target])
            self.counters.stale_requeues += 1

    def _best_vertex_value(self) -> float:
        tree = self.state.tree
        while True:
            entry = self.vertex_queue.peek()
            if entry is None:
                return INF
            g_now = tree.cost_to_come(entry.vertex)
            if abs(g_now - entry.g_vertex) <= STALE_TOLERANCE or (math.isinf(g_now) and math.isinf(entry.g_vertex)):
                return entry.key
            self.vertex_queue.push(entry.vertex, g_now, self._h_hat[entry.vertex])
            self.counters.stale_requeues += 1

    def _queue_edge(self, v: int, x: int, c_hat: float, g_v: float):
        pair = (v, x)
        if pair in self._batch_edges:
            self.counters.duplicate_edge_insertions += 1
            return
        self._batch_edges.add(pair)
        self.edge_queue.push(v, x, c_hat, g_v, self._h_hat[x])

    # Vertex expansion

    def expand_vertex(self, v: int):
        """Queue the edges from v that could improve the current solution"""
        self.vertex_queue.remove(v)
        self.counters.vertices_expanded += 1
        state = self.state
        tree = state.tree
        x_v = tree.states[v]
        g_v = tree.cost_to_come(v)
        g_hat_v = self._g_hat[v]

        for x in sorted(self.sample_index.near(x_v, state.radius)):
            c_hat = euclidean_distance(x_v, state.samples[x])
            if g_hat_v + c_hat + self._h_hat[x] < state.c_best:
                self._queue_edge(v, x, c_hat, g_v)

        if v in state.old_vertices:
            return
        for w in sorted(self.vertex_index.near(x_v, state.radius)):
            if w == v or tree.has_edge(v, w):
                continue
            c_hat = euclidean_distance(x_v, tree.states[w])
            if g_hat_v + c_hat + self._h_hat[w] < state.c_best and g_v + c_hat < tree.cost_to_come(w):
                self._queue_edge(v, w, c_hat, g_v)

    # Edge processing

    def true_cost(self, v: int, x: int) -> float:
        a = self.state.tree.states[v]
        b = self._state_of(x)
        self.counters.collision_checks += 1
        if is_motion_free(self.world, a, b, self.step):
            return euclidean_distance(a, b)
        return INF

    def process_best_edge(self):
        """Pop the best edge and add it to the tree if it passes all three gates"""
        state = self.state
        tree = state.tree
        edge_value = self._best_edge_value()
        if edge_value > self._best_vertex_value() + STALE_TOLERANCE:
            self.counters.dominance_violations += 1
        entry = self.edge_queue.pop()
        self.counters.edges_processed += 1
        v, x = entry.source, entry.target
        g_v = tree.cost_to_come(v)
        h_x = self._h_hat[x]

        if not g_v + entry.c_hat + h_x < state.c_best:
            self.edge_queue.clear()
            self.vertex_queue.clear()
            return
        if not self._g_hat[v] + entry.c_hat + h_x < state.c_best:
            return
        cost = self.true_cost(v, x)
        if not self._g_hat[v] + cost + h_x < state.c_best:
            return
        if not g_v + cost < tree.cost_to_come(x):
            return

        if x in tree:
            tree.rewire(x, v, cost)
            self.counters.rewirings += 1
        else:
            self.connect_sample(v, x, cost)

        g_x = tree.cost_to_come(x)
        for other in self.edge_queue.entries_into(x):
            if tree.cost_to_come(other.source) + other.c_hat >= g_x:
                self.edge_queue.remove(other)
        self._update_solution()

    def _update_solution(self):
        state = self.state
        if GOAL_ID not in state.tree:
            return
        cost = state.tree.cost_to_come(GOAL_ID)
        if cost < state.c_best:
            state.c_best = cost
            event = CostEvent(self._elapsed_us(), cost)
            self.events.append(event)
            logger.info(f"{self.name}: solution cost {cost:.6f} at {event.elapsed_us} us "
                        f"(batch {self.counters.batches})")
            if self.on_solution is not None:
                self.on_solution(event)

    # Pruning

    def prune(self, c: float):
        """Remove states that cannot give a solution better than c"""
        if math.isinf(c):
            raise ContractViolation("prune needs a finite cost")
        state = self.state
        tree = state.tree
        protected = set(tree.path_ids(GOAL_ID)) if GOAL_ID in tree else set()

        for x in sorted(state.samples):
            if self.f_hat(x) >= c:
                del state.samples[x]
                self.sample_index.remove(x)
                self._forget(x)

        removed = 0
        for v in sorted(tree.vertices()):
            if v != tree.root and v not in protected and self.f_hat(v) > c:
                tree.remove_vertex(v)
                self.vertex_index.remove(v)
                self._forget(v)
                removed += 1

        recycled = 0
        for v in sorted(tree.vertices()):
            if tree.cost_to_come(v) == INF:
                x_state = tree.states[v]
                tree.remove_vertex(v)
                self.vertex_index.remove(v)
                if self.f_hat(v) < c:
                    state.samples[v] = x_state
                    self.sample_index.insert(x_state, v)
                    recycled += 1
                else:
                    self._forget(v)
                    removed += 1

        self._last_prune_cost = c
        self.counters.prunes += 1
        logger.info(f"{self.name}: pruned at cost {c:.6f}, removed {removed} vertices, "
                    f"recycled {recycled} orphans, {len(state.samples)} samples kept")

    # Solution

    def extract_path(self) -> Path:
        tree = self.state.tree
        if GOAL_ID not in tree or tree.cost_to_come(GOAL_ID) == INF:
            raise ContractViolation("the goal is not connected to the tree")
        ids = tree.path_ids(GOAL_ID)
        return Path([tree.states[i] for i in ids], tree.cost_to_come(GOAL_ID))


def plan(world: World, config: Optional[PlannerConfig] = None,
         on_solution: Optional[Callable[[CostEvent], None]] = None) -> PlannerResult:
    """Run the batch informed tree planner once"""
    return BITStarPlanner(world, config, on_solution).plan()
