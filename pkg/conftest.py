"""
Shared fixtures - small worlds used across the planner tests
"""

import os
import sys

import numpy as np
import pytest

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from space import Box, World  # noqa: E402

C_MIN = float(np.hypot(0.9, 0.9))


def square_bounds() -> Box:
    return Box([-1.0, -1.0], [1.0, 1.0])


@pytest.fixture
def empty_world() -> World:
    """The obstacle-free square, start at the origin, goal at (0.9, 0.9)"""
    return World(2, square_bounds(), [], [0.0, 0.0], [0.9, 0.9])


@pytest.fixture
def wall_world() -> World:
    """A wall across the diagonal with gaps at both ends"""
    wall = Box([-0.6, 0.35], [0.6, 0.45])
    return World(2, square_bounds(), [wall], [0.0, 0.0], [0.9, 0.9])


@pytest.fixture
def sealed_world() -> World:
    """Goal boxed in by four walls so no path exists"""
    walls = [
        Box([0.7, 0.7], [1.0, 0.75]),
        Box([0.7, 0.7], [0.75, 1.0]),
        Box([0.7, 0.95], [1.0, 1.0]),
        Box([0.95, 0.7], [1.0, 1.0]),
    ]
    return World(2, square_bounds(), walls, [0.0, 0.0], [0.9, 0.9])


@pytest.fixture
def chdir_tmp(tmp_path, monkeypatch):
    """Run inside a temporary directory so logs and outputs stay out of the tree"""
    monkeypatch.chdir(tmp_path)
    return tmp_path
