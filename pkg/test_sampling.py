"""
Tests for seeded uniform and informed sampling
"""

import math

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from sampling import (ProlateHyperspheroid, RngStream, derive_seed, informed_contains, phs_measure,
                      sample_informed, sample_unit_ball, sample_uniform, transverse_rotation)
from space import Box, ContractViolation

FOCUS_A = np.zeros(2)
FOCUS_B = np.array([0.9, 0.9])
WIDE = Box([-2.0, -2.0], [2.0, 2.0])
SQUARE = Box([-1.0, -1.0], [1.0, 1.0])


@pytest.fixture(scope='module')
def informed_draws():
    """10^5 direct samples of the c_best = 1.5 spheroid, away from the bounds"""
    phs = ProlateHyperspheroid(FOCUS_A, FOCUS_B, 1.5)
    rng = RngStream(2024)
    return phs, np.stack([sample_informed(phs, WIDE, rng) for _ in range(10 ** 5)])


def test_uniform_is_deterministic():
    a = [sample_uniform(SQUARE, RngStream(7)) for _ in range(2)]
    assert np.array_equal(a[0], a[1])
    first, second = RngStream(7), RngStream(7)
    for _ in range(100):
        assert np.array_equal(sample_uniform(SQUARE, first), sample_uniform(SQUARE, second))


def test_uniform_stays_in_bounds():
    rng = RngStream(1)
    for _ in range(1000):
        assert SQUARE.contains(sample_uniform(SQUARE, rng))


@pytest.mark.slow
def test_uniform_mean():
    rng = RngStream(5)
    total = np.zeros(2)
    for _ in range(10 ** 6):
        total += sample_uniform(SQUARE, rng)
    assert np.all(np.abs(total / 10 ** 6) < 0.005)


def test_derived_seeds_differ():
    seeds = {derive_seed(1, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(1, 3) == derive_seed(1, 3)
    assert derive_seed(1, 3) != derive_seed(2, 3)


def test_unit_ball_samples_inside():
    rng = RngStream(9)
    for n in (1, 2, 5, 8):
        for _ in range(200):
            x = sample_unit_ball(n, rng)
            assert x.shape == (n,)
            assert float(np.dot(x, x)) <= 1.0 + 1e-12


def test_rotation_aligned_is_identity():
    assert np.array_equal(transverse_rotation(np.zeros(3), np.array([2.0, 0, 0])), np.eye(3))


@pytest.mark.parametrize('n', [2, 3, 5, 8])
def test_rotation_is_proper(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        a, b = rng.normal(size=(2, n))
        rotation = transverse_rotation(a, b)
        assert np.allclose(rotation.T @ rotation, np.eye(n), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(rotation[:, 0], (b - a) / np.linalg.norm(b - a), atol=1e-12)


def test_rotation_needs_distinct_foci():
    with pytest.raises(ContractViolation):
        transverse_rotation(np.ones(2), np.ones(2))


def test_cost_below_c_min_rejected():
    with pytest.raises(ContractViolation):
        ProlateHyperspheroid(FOCUS_A, FOCUS_B, 1.0)


def test_degenerate_spheroid_samples_on_segment():
    phs = ProlateHyperspheroid(FOCUS_A, FOCUS_B)
    c_min = phs.c_min
    phs = phs.with_cost(c_min)
    rng = RngStream(3)
    direction = FOCUS_B / c_min
    for _ in range(500):
        x = sample_informed(phs, SQUARE, rng)
        t = float(np.dot(x, direction))
        assert -1e-9 <= t <= c_min + 1e-9
        assert np.linalg.norm(x - t * direction) <= 1e-9


def test_infinite_cost_matches_uniform():
    phs = ProlateHyperspheroid(FOCUS_A, FOCUS_B)
    informed, uniform = RngStream(17), RngStream(17)
    for _ in range(200):
        assert np.array_equal(sample_informed(phs, SQUARE, informed), sample_uniform(SQUARE, uniform))


def test_samples_respect_bounds():
    phs = ProlateHyperspheroid(FOCUS_A, FOCUS_B, 1.5)
    rng = RngStream(8)
    for _ in range(2000):
        x = sample_informed(phs, SQUARE, rng)
        assert SQUARE.contains(x)
        assert informed_contains(phs, x)
    assert rng.informed_rejections > 0


def test_phs_measure():
    ellipse = ProlateHyperspheroid(np.zeros(2), np.array([0.8, 0.0]), 1.0)
    assert phs_measure(ellipse, 2) == pytest.approx(0.4712389, abs=1e-7)
    assert phs_measure(ellipse.with_cost(0.8), 2) == pytest.approx(0.0, abs=1e-12)
    ball = ProlateHyperspheroid(np.zeros(3), np.zeros(3), 2.0, rotation=np.eye(3))
    assert phs_measure(ball, 3) == pytest.approx(4.1887902, abs=1e-7)
    with pytest.raises(ContractViolation):
        phs_measure(ProlateHyperspheroid(FOCUS_A, FOCUS_B), 2)


@pytest.mark.slow
def test_informed_membership(informed_draws):
    phs, points = informed_draws
    f_hat = np.linalg.norm(points - FOCUS_A, axis=1) + np.linalg.norm(points - FOCUS_B, axis=1)
    assert np.all(f_hat <= 1.5 + 1e-9)


@pytest.mark.slow
def test_informed_volume_fraction(informed_draws):
    """Share of samples inside the 0.8-scaled concentric spheroid is 0.8^n"""
    phs, points = informed_draws
    local = (points - phs.center) @ phs.rotation / phs.radii()
    inside = np.count_nonzero(np.linalg.norm(local, axis=1) <= 0.8)
    assert inside / len(points) == pytest.approx(0.8 ** 2, abs=0.02)


@pytest.mark.slow
def test_informed_matches_rejection_sampler(informed_draws):
    phs, direct = informed_draws
    half = np.sqrt(((phs.rotation * phs.radii()) ** 2).sum(axis=1))
    lo, hi = phs.center - half, phs.center + half

    gen = np.random.default_rng(99)
    accepted = []
    while sum(len(a) for a in accepted) < len(direct):
        candidates = lo + gen.random((50_000, 2)) * (hi - lo)
        f_hat = (np.linalg.norm(candidates - FOCUS_A, axis=1)
                 + np.linalg.norm(candidates - FOCUS_B, axis=1))
        accepted.append(candidates[f_hat <= phs.c_best])
    rejection = np.concatenate(accepted)[:len(direct)]

    edges = [np.linspace(lo[i], hi[i], 11) for i in range(2)]
    direct_counts, _, _ = np.histogram2d(direct[:, 0], direct[:, 1], bins=edges)
    rejection_counts, _, _ = np.histogram2d(rejection[:, 0], rejection[:, 1], bins=edges)
    table = np.stack([direct_counts.ravel(), rejection_counts.ravel()])
    table = table[:, table.sum(axis=0) > 0]
    _, p_value, _, _ = chi2_contingency(table)
    assert p_value > 0.01


def test_rng_counters():
    rng = RngStream(4)
    sample_uniform(SQUARE, rng)
    assert rng.draws == 2
    sample_unit_ball(3, rng)
    assert rng.draws == 2 + 3 + 1
    assert math.isfinite(float(rng.random()))
