"""
Benchmark harness - random worlds, trial sweeps and cost-versus-time statistics
Trials are independent; aggregation runs once every trial has finished
"""

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import binom

from baselines import BaselineConfig, FMTStarPlanner, RRTConnectPlanner, RRTPlanner, RRTStarPlanner
from bitstar import BITStarPlanner, CostEvent, PlannerConfig, StopCondition
from sampling import RngStream
from space import Box, ContractViolation, World

logger = logging.getLogger(__name__)

DEFAULT_PERIOD_US = 1000
CI_COVERAGE = 0.95

REGIME_SOLID = 'solid'
REGIME_DASHED = 'dashed'
REGIME_NONE = 'none'

TRIAL_FIELDS = ['planner', 'world_id', 'seed', 'elapsed_us', 'cost']
AGGREGATE_FIELDS = ['planner', 'time_ms', 'success_fraction', 'median_cost', 'ci_lo', 'ci_hi', 'regime']
INITIAL_FIELDS = ['planner', 'trials', 'solved', 'median_time_ms', 'median_cost']


# Random worlds

@dataclass
class RandomWorldSpec:
    dimension: int
    seed: int
    width: float = 2.0
    max_obstructed_fraction: float = 1.0 / 3.0
    min_obstacle_width: float = 0.1
    max_obstacle_width: float = 0.5
    goal_offset: float = 0.9
    estimate_points: int = 100_000
    max_obstacles: int = 200

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ContractViolation(f"dimension must be a positive integer, got {self.dimension!r}")
        if not 0.0 < self.min_obstacle_width <= self.max_obstacle_width <= self.width:
            raise ContractViolation("obstacle widths must satisfy 0 < min <= max <= world width")
        if not 0.0 <= self.max_obstructed_fraction < 1.0:
            raise ContractViolation("max_obstructed_fraction must lie in [0, 1)")
        if self.goal_offset >= self.width / 2.0:
            raise ContractViolation("goal must lie inside the world")

    @property
    def bounds(self) -> Box:
        half = self.width / 2.0
        return Box(np.full(self.dimension, -half), np.full(self.dimension, half))

    @property
    def start(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def goal(self) -> np.ndarray:
        return np.full(self.dimension, self.goal_offset)


def gen_random_world(spec: RandomWorldSpec) -> World:
    """Add random boxes while a Monte Carlo estimate of the obstructed fraction stays under the cap"""
    rng = RngStream(spec.seed)
    n = spec.dimension
    bounds = spec.bounds
    start, goal = spec.start, spec.goal
    probes = bounds.lo + rng.random(spec.estimate_points * n).reshape(spec.estimate_points, n) * bounds.extents
    covered = np.zeros(spec.estimate_points, dtype=bool)
    span = spec.max_obstacle_width - spec.min_obstacle_width

    obstacles: List[Box] = []
    redraws = 0
    while len(obstacles) < spec.max_obstacles:
        widths = spec.min_obstacle_width + rng.random(n) * span
        lo = bounds.lo + rng.random(n) * (bounds.extents - widths)
        box = Box(lo, lo + widths)
        if box.contains(start) or box.contains(goal):
            redraws += 1
            continue
        inside = np.all((probes >= box.lo) & (probes <= box.hi), axis=1)
        candidate = covered | inside
        if candidate.mean() > spec.max_obstructed_fraction:
            break
        covered = candidate
        obstacles.append(box)

    logger.debug(f"World n={n} seed={spec.seed}: {len(obstacles)} obstacles, "
                 f"obstructed fraction {covered.mean():.4f}, {redraws} redraws")
    return World(n, bounds, obstacles, start, goal)


# Planner registry

def _bitstar(world: World, seed: int, stop: StopCondition, options: Dict[str, Any]):
    return BITStarPlanner(world, PlannerConfig(seed=seed, stop=stop, **options))


def _baseline(cls, **extra) -> Callable:
    def factory(world: World, seed: int, stop: StopCondition, options: Dict[str, Any]):
        return cls(world, BaselineConfig(seed=seed, stop=stop, **options), **extra)
    return factory


PLANNERS: Dict[str, Callable] = {
    'bitstar': _bitstar,
    'rrt': _baseline(RRTPlanner),
    'rrtconnect': _baseline(RRTConnectPlanner),
    'rrtstar': _baseline(RRTStarPlanner),
    'informedrrtstar': _baseline(RRTStarPlanner, informed=True),
    'fmtstar': _baseline(FMTStarPlanner),
}


def planner_names() -> List[str]:
    return list(PLANNERS)


def make_planner(name: str, world: World, seed: int, stop: StopCondition,
                 options: Optional[Dict[str, Any]] = None):
    """Build a planner by name; `fmtstar:<count>` selects the FMT* sample count"""
    base, _, count = name.partition(':')
    if base not in PLANNERS:
        raise ContractViolation(f"unknown planner {name!r}; valid names: {', '.join(planner_names())}")
    options = dict(options or {})
    if count:
        if base != 'fmtstar' or not count.isdigit() or int(count) < 1:
            raise ContractViolation(f"invalid planner name {name!r}; only fmtstar:<count> takes a count")
        options['fmt_sample_count'] = int(count)
    try:
        return PLANNERS[base](world, seed, stop, options)
    except TypeError as e:
        raise ContractViolation(f"invalid options for {name}: {e}") from e


# Trials

@dataclass
class TrialRecord:
    planner: str
    world_id: str
    seed: int
    events: List[CostEvent] = field(default_factory=list)
    wall_time_us: int = 0
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return bool(self.events)

    @property
    def final_cost(self) -> float:
        return self.events[-1].cost if self.events else math.inf


@dataclass
class TrialSpec:
    planner: str
    world_id: str
    world: World
    seed: int
    stop: StopCondition
    options: Dict[str, Any] = field(default_factory=dict)


def run_trial(spec: TrialSpec) -> TrialRecord:
    """Run one (planner, world, seed) triple; failures come back as an unsolved record"""
    started = time.monotonic_ns()
    try:
        planner = make_planner(spec.planner, spec.world, spec.seed, spec.stop, spec.options)
        result = planner.plan()
        return TrialRecord(spec.planner, spec.world_id, spec.seed, list(result.events), result.elapsed_us)
    except Exception as e:
        logger.error(f"Trial {spec.planner}/{spec.world_id}/{spec.seed} failed: {e}", exc_info=True)
        return TrialRecord(spec.planner, spec.world_id, spec.seed, [],
                           (time.monotonic_ns() - started) // 1000, error=f"{type(e).__name__}: {e}")


def _as_stop(time_budget: Union[float, StopCondition]) -> StopCondition:
    if isinstance(time_budget, StopCondition):
        return time_budget
    return StopCondition(time_budget=float(time_budget))


def run_trials(planners: Sequence[str], worlds: Sequence[Tuple[str, World]], seeds: Sequence[int],
               time_budget: Union[float, StopCondition], jobs: int = 1,
               options: Optional[Dict[str, Dict[str, Any]]] = None) -> List[TrialRecord]:
    """One record per (planner, world, seed), in that nesting order

    time_budget is seconds per trial or a full StopCondition. jobs > 1 runs
    trials in worker processes.
    """
    if not planners or not worlds or not seeds:
        raise ContractViolation("run_trials needs at least one planner, world and seed")
    if jobs < 1:
        raise ContractViolation("jobs must be a positive integer")
    stop = _as_stop(time_budget)
    options = options or {}
    specs = [TrialSpec(p, world_id, world, seed, stop, dict(options.get(p.partition(':')[0], {})))
             for p in planners for world_id, world in worlds for seed in seeds]
    logger.info(f"Running {len(specs)} trials with {jobs} job(s)")

    if jobs == 1:
        records = [run_trial(s) for s in specs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            records = list(executor.map(run_trial, specs))

    failed = sum(1 for r in records if r.error)
    solved = sum(1 for r in records if r.success)
    logger.info(f"Trials finished: {solved} solved, {failed} failed, {len(records)} total")
    return records


# Time series

def _check_events(events: Sequence[CostEvent]):
    for a, b in zip(events[:-1], events[1:]):
        if not b.cost < a.cost or b.elapsed_us < a.elapsed_us:
            raise ContractViolation("events must be time-ordered with strictly decreasing cost")


def time_grid_us(period_us: int, horizon_us: int) -> np.ndarray:
    if period_us <= 0:
        raise ContractViolation("period must be positive")
    return np.arange(1, horizon_us // period_us + 1, dtype=np.int64) * period_us


def resample_series(events: Sequence[CostEvent], period_us: int = DEFAULT_PERIOD_US,
                    horizon_us: int = 0) -> np.ndarray:
    """Last observed cost at t = period, 2 period, ... horizon; inf before the first event"""
    _check_events(events)
    grid = time_grid_us(period_us, horizon_us)
    if not events:
        return np.full(grid.shape, math.inf)
    times = np.array([e.elapsed_us for e in events], dtype=np.int64)
    costs = np.array([e.cost for e in events], dtype=np.float64)
    idx = np.searchsorted(times, grid, side='right') - 1
    series = np.full(grid.shape, math.inf)
    seen = idx >= 0
    series[seen] = costs[idx[seen]]
    return series


def median_ci_ranks(n: int, coverage: float = CI_COVERAGE) -> Tuple[int, int]:
    """Binomial count bounds (k, n - k): the largest k with P(k <= B <= n - k) >= coverage, B ~ Binomial(n, 1/2)

    These bound how many observations fall below the median. The matching
    order statistics are X_(k) and X_(n-k+1), so n = 50 gives (18, 32) and the
    interval [X_(18), X_(33)]. k = 0 means the sample is too small and the
    interval is the full range.
    """
    if n < 1:
        raise ContractViolation("median_ci_ranks needs at least one observation")
    for k in range(n // 2, -1, -1):
        mass = binom.cdf(n - k, n, 0.5) - (binom.cdf(k - 1, n, 0.5) if k > 0 else 0.0)
        if mass >= coverage:
            return k, n - k
    return 0, n


def median_interval(values: Sequence[float], coverage: float = CI_COVERAGE) -> Tuple[float, float, float]:
    """Median plus order-statistic confidence bounds"""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    n = len(ordered)
    k, _ = median_ci_ranks(n, coverage)
    lo = ordered[max(k - 1, 0)]
    hi = ordered[min(n - k, n - 1)]
    return float(np.median(ordered)), float(lo), float(hi)


@dataclass
class SeriesStats:
    planner: str
    trials: int
    times_ms: np.ndarray
    success_fraction: np.ndarray
    median_cost: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    regime: List[str]

    def rows(self) -> List[Dict[str, Any]]:
        rows = []
        for i, t in enumerate(self.times_ms):
            defined = self.regime[i] != REGIME_NONE
            rows.append({
                'planner': self.planner,
                'time_ms': float(t),
                'success_fraction': float(self.success_fraction[i]),
                'median_cost': float(self.median_cost[i]) if defined else None,
                'ci_lo': float(self.ci_lo[i]) if defined else None,
                'ci_hi': float(self.ci_hi[i]) if defined else None,
                'regime': self.regime[i],
            })
        return rows


def aggregate(records: Sequence[TrialRecord], period_us: int = DEFAULT_PERIOD_US,
              horizon_us: int = 0) -> Dict[str, SeriesStats]:
    """Success fraction, solved-only median cost and its interval per planner and time step"""
    by_planner: Dict[str, List[TrialRecord]] = {}
    for record in records:
        by_planner.setdefault(record.planner, []).append(record)
    grid = time_grid_us(period_us, horizon_us)

    stats = {}
    for planner in sorted(by_planner):
        group = by_planner[planner]
        if len(group) < 2:
            raise ContractViolation(f"aggregate needs at least two trials for {planner}")
        series = np.stack([resample_series(r.events, period_us, horizon_us) for r in group])
        solved = np.isfinite(series)
        fraction = solved.sum(axis=0) / len(group)
        median = np.full(grid.shape, math.nan)
        lo = np.full(grid.shape, math.nan)
        hi = np.full(grid.shape, math.nan)
        regime = []
        for i in range(grid.shape[0]):
            if fraction[i] < 0.5:
                regime.append(REGIME_NONE)
                continue
            median[i], lo[i], hi[i] = median_interval(series[solved[:, i], i])
            regime.append(REGIME_SOLID if fraction[i] == 1.0 else REGIME_DASHED)
        stats[planner] = SeriesStats(planner, len(group), grid / 1000.0, fraction, median, lo, hi, regime)
    return stats


def aggregate_by_world(records: Sequence[TrialRecord], period_us: int = DEFAULT_PERIOD_US,
                       horizon_us: int = 0) -> Dict[str, Dict[str, SeriesStats]]:
    """aggregate() over each world's trials on its own; worlds are never pooled"""
    by_world: Dict[str, List[TrialRecord]] = {}
    for record in records:
        by_world.setdefault(record.world_id, []).append(record)
    return {world_id: aggregate(by_world[world_id], period_us, horizon_us) for world_id in sorted(by_world)}


def time_to_reach(record: TrialRecord, target_cost: float) -> Optional[int]:
    """Elapsed microseconds of the first event at or below target_cost"""
    for event in record.events:
        if event.cost <= target_cost:
            return event.elapsed_us
    return None


def initial_solution_stats(records: Sequence[TrialRecord]) -> Dict[str, Dict[str, float]]:
    """Median time and cost of the first solution per planner, over solved trials"""
    by_planner: Dict[str, List[TrialRecord]] = {}
    for record in records:
        by_planner.setdefault(record.planner, []).append(record)
    summary = {}
    for planner in sorted(by_planner):
        group = by_planner[planner]
        firsts = [r.events[0] for r in group if r.events]
        summary[planner] = {
            'trials': len(group),
            'solved': len(firsts),
            'median_time_ms': float(np.median([e.elapsed_us for e in firsts])) / 1000.0 if firsts else math.nan,
            'median_cost': float(np.median([e.cost for e in firsts])) if firsts else math.nan,
        }
    return summary


# CSV files

def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return repr(float(value))


def write_trials_csv(records: Sequence[TrialRecord], path: str):
    """One row per cost event; unsolved trials contribute no rows"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRIAL_FIELDS)
        for r in records:
            for e in r.events:
                writer.writerow([r.planner, r.world_id, r.seed, e.elapsed_us, _fmt(e.cost)])


def read_trials_csv(path: str) -> List[TrialRecord]:
    records: Dict[Tuple[str, str, int], TrialRecord] = {}
    with open(path, 'r', newline='', encoding='utf-8') as f:
        for row in csv.DictReader(f):
            key = (row['planner'], row['world_id'], int(row['seed']))
            record = records.setdefault(key, TrialRecord(*key))
            record.events.append(CostEvent(int(row['elapsed_us']), float(row['cost'])))
    return list(records.values())


def write_aggregate_csv(stats: Dict[str, SeriesStats], path: str):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(AGGREGATE_FIELDS)
        for planner in stats:
            for row in stats[planner].rows():
                writer.writerow([row['planner'], _fmt(row['time_ms']), _fmt(row['success_fraction']),
                                 _fmt(row['median_cost']), _fmt(row['ci_lo']), _fmt(row['ci_hi']),
                                 '' if row['regime'] == REGIME_NONE else row['regime']])


def read_aggregate_csv(path: str) -> List[Dict[str, Any]]:
    rows = []
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != AGGREGATE_FIELDS:
            raise ContractViolation(f"{path} is not an aggregate CSV (header {reader.fieldnames})")
        for row in reader:
            rows.append({
                'planner': row['planner'],
                'time_ms': float(row['time_ms']),
                'success_fraction': float(row['success_fraction']),
                'median_cost': float(row['median_cost']) if row['median_cost'] else None,
                'ci_lo': float(row['ci_lo']) if row['ci_lo'] else None,
                'ci_hi': float(row['ci_hi']) if row['ci_hi'] else None,
                'regime': row['regime'] or REGIME_NONE,
            })
    return rows


def write_initial_csv(summary: Dict[str, Dict[str, float]], path: str):
    """Median first-solution time and cost per planner, as initial_solution_stats reports them"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(INITIAL_FIELDS)
        for planner in sorted(summary):
            s = summary[planner]
            writer.writerow([planner, s['trials'], s['solved'], _fmt(s['median_time_ms']), _fmt(s['median_cost'])])


def read_initial_csv(path: str) -> Dict[str, Dict[str, Any]]:
    summary = {}
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != INITIAL_FIELDS:
            raise ContractViolation(f"{path} is not an initial-solution CSV (header {reader.fieldnames})")
        for row in reader:
            summary[row['planner']] = {
                'trials': int(row['trials']),
                'solved': int(row['solved']),
                'median_time_ms': float(row['median_time_ms']) if row['median_time_ms'] else None,
                'median_cost': float(row['median_cost']) if row['median_cost'] else None,
            }
    return summary
