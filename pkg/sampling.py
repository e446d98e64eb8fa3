"""
Seeded sampling - uniform sampling of the bounds and direct informed sampling
of the prolate hyperspheroid that holds every state able to improve a solution
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from space import Box, ContractViolation, StateVec, as_state, euclidean_distance, unit_ball_measure

logger = logging.getLogger(__name__)

MEMBERSHIP_TOLERANCE = 1e-9
SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF


class RngStream:
    """Single-owner random stream on the Philox4x64 counter-based generator

    The generator is keyed directly with the 64-bit seed, so a seed maps to
    the same sequence on every platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & SEED_MASK
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))
        self.draws = 0
        self.informed_rejections = 0

    def random(self, size: Optional[int] = None):
        """Uniform variates in [0, 1)"""
        self.draws += 1 if size is None else size
        return self._gen.random(size)

    def normal(self, size: int) -> np.ndarray:
        self.draws += size
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int) -> int:
        self.draws += 1
        return int(self._gen.integers(low, high))


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for trial `index` of a sweep"""
    sequence = np.random.SeedSequence([int(master_seed) & SEED_MASK, int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def sample_uniform(bounds: Box, rng: RngStream) -> StateVec:
    """Each coordinate independently uniform in [lo[i], hi[i]]"""
    u = rng.random(bounds.dimension)
    return bounds.lo + u * bounds.extents


def sample_unit_ball(n: int, rng: RngStream) -> StateVec:
    """Uniform sample of the unit n-ball: gaussian direction, radius u^(1/n)"""
    direction = rng.normal(n)
    norm = float(np.sqrt(np.dot(direction, direction)))
    while norm == 0.0:
        direction = rng.normal(n)
        norm = float(np.sqrt(np.dot(direction, direction)))
    radius = float(rng.random()) ** (1.0 / n)
    return direction * (radius / norm)


def transverse_rotation(x_start: StateVec, x_goal: StateVec) -> np.ndarray:
    """Rotation whose first column is the unit vector from x_start to x_goal

    Built from the Householder reflector that maps e1 onto that direction,
    with the last column negated to turn the reflection into a rotation.
    """
    x_start = as_state(x_start)
    x_goal = as_state(x_goal, x_start.shape[0])
    c_min = euclidean_distance(x_start, x_goal)
    if c_min == 0.0:
        raise ContractViolation("transverse rotation needs distinct foci")
    n = x_start.shape[0]
    u = (x_goal - x_start) / c_min
    e1 = np.zeros(n)
    e1[0] = 1.0
    if np.array_equal(u, e1):
        return np.eye(n)
    if n == 1:
        # Only a reflection can map e1 to -e1 on the line
        return u.reshape(1, 1).copy()
    w = e1 - u
    householder = np.eye(n) - 2.0 * np.outer(w, w) / float(np.dot(w, w))
    householder[:, -1] *= -1.0
    return householder


@dataclass(eq=False)
class ProlateHyperspheroid:
    """The informed set {x : |x - a| + |x - b| <= c_best} for path length"""
    focus_a: StateVec
    focus_b: StateVec
    c_best: float = math.inf
    rotation: Optional[np.ndarray] = None
    c_min: float = field(init=False)
    center: StateVec = field(init=False)

    def __post_init__(self):
        self.focus_a = as_state(self.focus_a)
        self.focus_b = as_state(self.focus_b, self.focus_a.shape[0])
        self.c_min = euclidean_distance(self.focus_a, self.focus_b)
        self.center = 0.5 * (self.focus_a + self.focus_b)
        if self.c_best < self.c_min:
            raise ContractViolation(f"c_best {self.c_best} is below c_min {self.c_min}")
        if self.rotation is None:
            self.rotation = transverse_rotation(self.focus_a, self.focus_b)

    @property
    def dimension(self) -> int:
        return self.focus_a.shape[0]

    def with_cost(self, c_best: float) -> 'ProlateHyperspheroid':
        """Same foci and rotation, new cost bound"""
        return ProlateHyperspheroid(self.focus_a, self.focus_b, c_best, self.rotation)

    def radii(self) -> np.ndarray:
        if math.isinf(self.c_best):
            raise ContractViolation("an unbounded hyperspheroid has no radii")
        transverse = self.c_best / 2.0
        conjugate = math.sqrt(max(self.c_best ** 2 - self.c_min ** 2, 0.0)) / 2.0
        radii = np.full(self.dimension, conjugate)
        radii[0] = transverse
        return radii


def informed_contains(phs: ProlateHyperspheroid, x: StateVec) -> bool:
    f_hat = euclidean_distance(phs.focus_a, x) + euclidean_distance(x, phs.focus_b)
    return f_hat <= phs.c_best + MEMBERSHIP_TOLERANCE


def sample_informed(phs: ProlateHyperspheroid, bounds: Box, rng: RngStream) -> StateVec:
    """Uniform sample of the hyperspheroid intersected with the bounds

    Falls back to sample_uniform while c_best is infinite. Samples landing
    outside the bounds are redrawn; rng.informed_rejections counts them.
    """
    if phs.c_best < phs.c_min:
        raise ContractViolation(f"c_best {phs.c_best} is below c_min {phs.c_min}")
    if math.isinf(phs.c_best):
        return sample_uniform(bounds, rng)
    transform = phs.rotation * phs.radii()[None, :]
    while True:
        ball = sample_unit_ball(phs.dimension, rng)
        x = phs.center + transform @ ball
        if bounds.contains(x):
            return x
        rng.informed_rejections += 1
        if rng.informed_rejections % 10000 == 0:
            logger.debug(f"Informed sampler has rejected {rng.informed_rejections} out-of-bounds states")


def phs_measure(phs: ProlateHyperspheroid, n: int) -> float:
    """Measure of the hyperspheroid: zeta_n * product of its radii"""
    if math.isinf(phs.c_best):
        raise ContractViolation("an unbounded hyperspheroid has no finite measure; use world_measure")
    transverse = phs.c_best / 2.0
    conjugate = math.sqrt(max(phs.c_best ** 2 - phs.c_min ** 2, 0.0)) / 2.0
    return unit_ball_measure(n) * transverse * conjugate ** (n - 1)
