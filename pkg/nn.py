"""
Nearest-neighbour index over planner states
Exact r-disc and nearest queries on a dynamic point set
"""

import logging
import math
from typing import Dict, Hashable, Iterable, List, Optional, Set

import numpy as np
from scipy.spatial import cKDTree

from space import ContractViolation, StateVec, as_state, euclidean_distance

logger = logging.getLogger(__name__)

# Slack applied to kd-tree radii before the exact distance filter
QUERY_SLACK = 1e-9
MIN_REBUILD = 32


class PointIndex:
    """Dynamic point set behind a kd-tree snapshot

    Inserts go to a linear buffer and removals to a tombstone set until either
    grows past roughly the square root of the snapshot, then the kd-tree is
    rebuilt. Every query result is filtered with euclidean_distance, so answers
    are exact rather than approximate.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ContractViolation("index dimension must be positive")
        self.dimension = dimension
        self._states: Dict[Hashable, StateVec] = {}
        self._tree: Optional[cKDTree] = None
        self._tree_ids: List[Hashable] = []
        self._buffer: Set[Hashable] = set()
        self._tombstones: Set[Hashable] = set()

    def __len__(self) -> int:
        return len(self._states)

    def __contains__(self, item_id: Hashable) -> bool:
        return item_id in self._states

    def ids(self) -> List[Hashable]:
        return list(self._states)

    def state(self, item_id: Hashable) -> StateVec:
        return self._states[item_id]

    def _check(self, x: StateVec) -> StateVec:
        if np.shape(x) != (self.dimension,):
            raise ContractViolation(f"query has shape {np.shape(x)}, index dimension is {self.dimension}")
        return np.asarray(x, dtype=np.float64)

    def insert(self, x: StateVec, item_id: Hashable):
        if item_id in self._states:
            raise ContractViolation(f"id {item_id!r} is already in the index")
        self._states[item_id] = as_state(self._check(x))
        self._buffer.add(item_id)
        self._maybe_rebuild()

    def insert_many(self, items: Iterable):
        for x, item_id in items:
            self.insert(x, item_id)

    def remove(self, item_id: Hashable):
        if item_id not in self._states:
            raise ContractViolation(f"id {item_id!r} is not in the index")
        del self._states[item_id]
        if item_id in self._buffer:
            self._buffer.discard(item_id)
        else:
            self._tombstones.add(item_id)
        self._maybe_rebuild()

    def clear(self):
        self._states.clear()
        self._tree = None
        self._tree_ids = []
        self._buffer.clear()
        self._tombstones.clear()

    def _maybe_rebuild(self):
        size = len(self._tree_ids)
        limit = max(MIN_REBUILD, int(math.sqrt(size)) + 1)
        if len(self._buffer) > limit or len(self._tombstones) > max(limit, size // 2):
            self.rebuild()

    def rebuild(self):
        self._tree_ids = list(self._states)
        if self._tree_ids:
            self._tree = cKDTree(np.stack([self._states[i] for i in self._tree_ids]))
        else:
            self._tree = None
        self._buffer.clear()
        self._tombstones.clear()

    def _candidates_within(self, x: StateVec, r: float) -> List[Hashable]:
        found = list(self._buffer)
        if self._tree is not None:
            for idx in self._tree.query_ball_point(x, r * (1.0 + QUERY_SLACK) + QUERY_SLACK):
                item_id = self._tree_ids[idx]
                if item_id not in self._tombstones:
                    found.append(item_id)
        return found

    def near(self, x: StateVec, r: float) -> Set[Hashable]:
        """Ids of every state within distance r of x (inclusive)"""
        if r < 0:
            raise ContractViolation(f"radius must be non-negative, got {r}")
        x = self._check(x)
        if math.isinf(r):
            return set(self._states)
        return {i for i in self._candidates_within(x, r)
                if euclidean_distance(self._states[i], x) <= r}

    def nearest(self, x: StateVec) -> Hashable:
        """Id minimising the distance to x; ties go to the smallest id"""
        if not self._states:
            raise ContractViolation("nearest query on an empty index")
        x = self._check(x)
        best = math.inf
        if self._tree is not None:
            live = len(self._tree_ids) - len(self._tombstones)
            if live > 0:
                k = min(len(self._tree_ids), len(self._tombstones) + 1)
                dists, idxs = self._tree.query(x, k=k)
                for d, idx in zip(np.atleast_1d(dists), np.atleast_1d(idxs)):
                    item_id = self._tree_ids[int(idx)]
                    if item_id not in self._tombstones:
                        best = min(best, euclidean_distance(self._states[item_id], x))
                        break
        for item_id in self._buffer:
            best = min(best, euclidean_distance(self._states[item_id], x))
        scored = [(euclidean_distance(self._states[i], x), i)
                  for i in self._candidates_within(x, best)]
        return min(scored)[1]
