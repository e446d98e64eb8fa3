"""
State space primitives - worlds, boxes, paths and collision checking
Defines the free space the planners search and the JSON world file format
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import gamma

logger = logging.getLogger(__name__)

# Collision resolution as a fraction of the largest bounds extent
DEFAULT_STEP_FRACTION = 0.002

StateVec = np.ndarray


class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions"""


class WorldFormatError(ValueError):
    """Raised by the world loader; message starts with the offending line"""


def as_state(x: Sequence[float], dimension: Optional[int] = None) -> StateVec:
    """Convert a coordinate sequence into a finite float64 state vector"""
    state = np.asarray(x, dtype=np.float64)
    if state.ndim != 1:
        raise ContractViolation(f"state must be a flat vector, got shape {state.shape}")
    if dimension is not None and state.shape[0] != dimension:
        raise ContractViolation(f"state has dimension {state.shape[0]}, expected {dimension}")
    if not np.all(np.isfinite(state)):
        raise ContractViolation("state coordinates must be finite")
    return state


@dataclass(eq=False)
class Box:
    """Closed axis-aligned hyperrectangle [lo, hi]"""
    lo: StateVec
    hi: StateVec

    def __post_init__(self):
        self.lo = as_state(self.lo)
        self.hi = as_state(self.hi, self.lo.shape[0])
        if np.any(self.lo > self.hi):
            raise ContractViolation("box requires lo[i] <= hi[i] on every axis")

    @property
    def dimension(self) -> int:
        return self.lo.shape[0]

    @property
    def extents(self) -> StateVec:
        return self.hi - self.lo

    def contains(self, x: StateVec) -> bool:
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def intersects(self, other: 'Box') -> bool:
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def volume(self) -> float:
        return float(np.prod(self.extents))

    def to_dict(self) -> Dict[str, List[float]]:
        return {'lo': [float(v) for v in self.lo], 'hi': [float(v) for v in self.hi]}


@dataclass(eq=False)
class World:
    """Bounds, box obstacles, start and goal; the free space is bounds minus obstacles"""
    dimension: int
    bounds: Box
    obstacles: List[Box]
    x_start: StateVec
    x_goal: StateVec
    collision_step: Optional[float] = None
    _obs_lo: np.ndarray = field(init=False, repr=False)
    _obs_hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.dimension, (int, np.integer)) or self.dimension < 1:
            raise ContractViolation(f"world dimension must be a positive integer, got {self.dimension!r}")
        self.dimension = int(self.dimension)
        if self.bounds.dimension != self.dimension:
            raise ContractViolation("bounds dimension does not match world dimension")
        for i, obstacle in enumerate(self.obstacles):
            if obstacle.dimension != self.dimension:
                raise ContractViolation(f"obstacle {i} dimension does not match world dimension")
            if not obstacle.intersects(self.bounds):
                raise ContractViolation(f"obstacle {i} does not intersect the world bounds")
        if self.collision_step is not None and not self.collision_step > 0:
            raise ContractViolation("collision_step must be positive")
        self.x_start = as_state(self.x_start, self.dimension)
        self.x_goal = as_state(self.x_goal, self.dimension)
        if self.obstacles:
            self._obs_lo = np.stack([o.lo for o in self.obstacles])
            self._obs_hi = np.stack([o.hi for o in self.obstacles])
        else:
            self._obs_lo = np.empty((0, self.dimension))
            self._obs_hi = np.empty((0, self.dimension))
        if not is_state_free(self, self.x_start):
            raise ContractViolation("start state is outside the bounds or in collision")
        if not is_state_free(self, self.x_goal):
            raise ContractViolation("goal state is outside the bounds or in collision")

    @property
    def step(self) -> float:
        """Configured collision resolution, or the default for these bounds"""
        if self.collision_step is not None:
            return float(self.collision_step)
        return default_collision_step(self.bounds)

    def states_free(self, points: np.ndarray) -> np.ndarray:
        """Vectorised membership test for an (N, n) array of states"""
        inside = np.all((points >= self.bounds.lo) & (points <= self.bounds.hi), axis=1)
        if self._obs_lo.shape[0] == 0:
            return inside
        p = points[:, None, :]
        hit = np.all((p >= self._obs_lo[None]) & (p <= self._obs_hi[None]), axis=2)
        return inside & ~np.any(hit, axis=1)


@dataclass(eq=False)
class Path:
    """Polygonal path from start to goal"""
    waypoints: List[StateVec]
    cost: float

    def as_lists(self) -> List[List[float]]:
        return [[float(v) for v in w] for w in self.waypoints]


def default_collision_step(bounds: Box) -> float:
    return DEFAULT_STEP_FRACTION * float(np.max(bounds.extents))


def _check_dimension(world: World, x: StateVec):
    if np.shape(x) != (world.dimension,):
        raise ContractViolation(f"state has shape {np.shape(x)}, world dimension is {world.dimension}")


def is_state_free(world: World, x: StateVec) -> bool:
    """True iff x lies inside the bounds and inside no (closed) obstacle"""
    _check_dimension(world, x)
    x = np.asarray(x, dtype=np.float64)
    return bool(world.states_free(x[None, :])[0])


def is_motion_free(world: World, a: StateVec, b: StateVec, step: float) -> bool:
    """Check the segment [a, b] at spacing <= step, both endpoints included"""
    if not step > 0:
        raise ContractViolation(f"collision step must be positive, got {step}")
    _check_dimension(world, a)
    _check_dimension(world, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    # Interpolate from the lexicographically smaller endpoint so (a, b) and (b, a) agree
    if tuple(b) < tuple(a):
        a, b = b, a
    length = euclidean_distance(a, b)
    if length == 0.0:
        return is_state_free(world, a)
    count = max(1, math.ceil(length / step))
    t = np.arange(count + 1, dtype=np.float64) / count
    points = a[None, :] + t[:, None] * (b - a)[None, :]
    points[-1] = b
    return bool(np.all(world.states_free(points)))


def euclidean_distance(a: StateVec, b: StateVec) -> float:
    """L2 norm of b - a"""
    if np.shape(a) != np.shape(b):
        raise ContractViolation(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")
    d = np.subtract(b, a, dtype=np.float64)
    return float(np.sqrt(np.dot(d, d)))


def unit_ball_measure(n: int) -> float:
    """Lebesgue measure of the n-dimensional unit ball"""
    if n < 1:
        raise ContractViolation(f"unit ball dimension must be >= 1, got {n}")
    return float(math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0))


def world_measure(world: World) -> float:
    """Measure of the bounds box, used in place of the free-space measure"""
    return world.bounds.volume()


def path_cost(waypoints: Sequence[StateVec]) -> float:
    """Polyline length"""
    return float(sum(euclidean_distance(a, b) for a, b in zip(waypoints[:-1], waypoints[1:])))


def validate_path(world: World, path: Path, step: Optional[float] = None) -> bool:
    """Endpoints match start/goal and every segment is motion-free"""
    if len(path.waypoints) < 1:
        return False
    step = step or world.step
    if not np.array_equal(path.waypoints[0], world.x_start):
        return False
    if not np.array_equal(path.waypoints[-1], world.x_goal):
        return False
    return all(is_motion_free(world, a, b, step)
               for a, b in zip(path.waypoints[:-1], path.waypoints[1:]))


# World file format

def world_to_dict(world: World) -> Dict[str, Any]:
    data = {
        'dimension': world.dimension,
        'bounds': world.bounds.to_dict(),
        'obstacles': [o.to_dict() for o in world.obstacles],
        'start': [float(v) for v in world.x_start],
        'goal': [float(v) for v in world.x_goal],
    }
    if world.collision_step is not None:
        data['collision_step'] = float(world.collision_step)
    return data


def world_to_json(world: World) -> str:
    """Deterministic JSON text; one obstacle per line"""
    data = world_to_dict(world)
    lines = ['{']
    lines.append(f'  "dimension": {data["dimension"]},')
    lines.append(f'  "bounds": {json.dumps(data["bounds"])},')
    if data['obstacles']:
        lines.append('  "obstacles": [')
        rows = [f'    {json.dumps(o)}' for o in data['obstacles']]
        lines.append(',\n'.join(rows))
        lines.append('  ],')
    else:
        lines.append('  "obstacles": [],')
    tail = [f'  "start": {json.dumps(data["start"])}', f'  "goal": {json.dumps(data["goal"])}']
    if 'collision_step' in data:
        tail.append(f'  "collision_step": {json.dumps(data["collision_step"])}')
    lines.append(',\n'.join(tail))
    lines.append('}')
    return '\n'.join(lines) + '\n'


def save_world(world: World, path: str):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(world_to_json(world))


def load_world(path: str) -> World:
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    return world_from_json(text)


def _line_at(text: str, pos: int) -> int:
    return text.count('\n', 0, max(pos, 0)) + 1


def _line_of_key(text: str, key: str) -> int:
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    return _line_at(text, match.start()) if match else 1


def _line_of_obstacle(text: str, index: int) -> int:
    match = re.search(r'"obstacles"\s*:', text)
    if not match:
        return 1
    pos = match.end()
    for _ in range(index + 1):
        pos = text.find('{', pos)
        if pos < 0:
            return _line_at(text, match.start())
        pos += 1
    return _line_at(text, pos - 1)


def _vector(value: Any, dimension: int, what: str) -> StateVec:
    if not isinstance(value, list) or len(value) != dimension:
        raise ContractViolation(f"{what} must be a list of {dimension} numbers")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ContractViolation(f"{what} must contain only numbers")
    return as_state(value, dimension)


def world_from_json(text: str) -> World:
    """Parse and validate a world file; errors carry the offending line number"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise WorldFormatError(f"line {e.lineno}: invalid JSON: {e.msg}") from e

    def fail(line: int, message: str):
        raise WorldFormatError(f"line {line}: {message}")

    if not isinstance(data, dict):
        fail(1, "world file must contain a JSON object")
    for key in ('dimension', 'bounds', 'obstacles', 'start', 'goal'):
        if key not in data:
            fail(1, f"missing required key '{key}'")

    dimension = data['dimension']
    if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 1:
        fail(_line_of_key(text, 'dimension'), "dimension must be a positive integer")

    try:
        raw = data['bounds']
        if not isinstance(raw, dict):
            raise ContractViolation("bounds must be an object with 'lo' and 'hi'")
        bounds = Box(_vector(raw.get('lo'), dimension, 'bounds.lo'),
                     _vector(raw.get('hi'), dimension, 'bounds.hi'))
    except ContractViolation as e:
        fail(_line_of_key(text, 'bounds'), str(e))

    if not isinstance(data['obstacles'], list):
        fail(_line_of_key(text, 'obstacles'), "obstacles must be a list")
    obstacles = []
    for i, raw in enumerate(data['obstacles']):
        try:
            if not isinstance(raw, dict):
                raise ContractViolation("obstacle must be an object with 'lo' and 'hi'")
            box = Box(_vector(raw.get('lo'), dimension, f'obstacles[{i}].lo'),
                      _vector(raw.get('hi'), dimension, f'obstacles[{i}].hi'))
            if not box.intersects(bounds):
                raise ContractViolation(f"obstacles[{i}] does not intersect the bounds")
        except ContractViolation as e:
            fail(_line_of_obstacle(text, i), str(e))
        obstacles.append(box)

    states = {}
    for key in ('start', 'goal'):
        try:
            states[key] = _vector(data[key], dimension, key)
        except ContractViolation as e:
            fail(_line_of_key(text, key), str(e))

    step = data.get('collision_step')
    if step is not None and (not isinstance(step, (int, float)) or not step > 0):
        fail(_line_of_key(text, 'collision_step'), "collision_step must be a positive number")

    try:
        return World(dimension, bounds, obstacles, states['start'], states['goal'],
                     collision_step=float(step) if step is not None else None)
    except ContractViolation as e:
        message = str(e)
        key = 'goal' if 'goal' in message else 'start' if 'start' in message else 'dimension'
        fail(_line_of_key(text, key), message)
