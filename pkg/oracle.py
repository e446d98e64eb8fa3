"""
Explicit graph oracle
Materialises the r-disc graph over a fixed state set and solves it with Dijkstra
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from space import ContractViolation, StateVec, World, euclidean_distance, is_motion_free

logger = logging.getLogger(__name__)

PAIR_SLACK = 1e-9


@dataclass(eq=False)
class ExplicitRgg:
    """Every pair within r joined by a collision-free segment, weighted by length"""
    states: List[StateVec]
    radius: float
    graph: nx.Graph = field(default_factory=nx.Graph)

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()


def build_rgg(states: Sequence[StateVec], r: float, world: World,
              step: Optional[float] = None) -> ExplicitRgg:
    if r < 0:
        raise ContractViolation(f"radius must be non-negative, got {r}")
    step = step or world.step
    states = [np.asarray(s, dtype=np.float64) for s in states]
    rgg = ExplicitRgg(states, r)
    rgg.graph.add_nodes_from(range(len(states)))
    if len(states) < 2:
        return rgg

    if math.isinf(r):
        pairs = [(i, j) for i in range(len(states)) for j in range(i + 1, len(states))]
    else:
        tree = cKDTree(np.stack(states))
        pairs = sorted(tree.query_pairs(r * (1.0 + PAIR_SLACK) + PAIR_SLACK))

    for i, j in pairs:
        length = euclidean_distance(states[i], states[j])
        if length > r or length == 0.0:
            continue
        if is_motion_free(world, states[i], states[j], step):
            rgg.graph.add_edge(i, j, weight=length)
    logger.debug(f"Explicit graph: {len(states)} states, {rgg.edge_count} edges, r={r:.6f}")
    return rgg


def rgg_shortest_path(states: Sequence[StateVec], r: float, world: World, source: int, target: int,
                      step: Optional[float] = None) -> Tuple[float, List[int]]:
    """Exact shortest path cost and state indices; (inf, []) when disconnected"""
    if not 0 <= source < len(states) or not 0 <= target < len(states):
        raise ContractViolation("source and target must index into states")
    rgg = build_rgg(states, r, world, step)
    try:
        cost, path = nx.single_source_dijkstra(rgg.graph, source, target, weight='weight')
    except nx.NetworkXNoPath:
        return math.inf, []
    return float(cost), list(path)
