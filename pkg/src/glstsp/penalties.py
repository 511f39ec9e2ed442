"""Sparse per-edge penalty counts backed by the engine's hash table."""
from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from . import _engine as eng
from .tsp_core import EdgeKey, edge


class PenaltyStore:
    """Map from undirected edge to its non-negative integer penalty.

    Absent edges have penalty 0. Values only ever grow by one per
    penalization event.
    """

    def __init__(self, n: int, capacity: int | None = None):
        self.n = int(n)
        self.keys, self.vals = eng.new_table(capacity or max(64, 4 * self.n))
        self.count = 0  # distinct penalized edges
        self.total = 0  # running sum of all penalties

    @property
    def total_penalty(self) -> int:
        return self.total

    def _key(self, e) -> int:
        a, b = e
        return int(eng.ekey(int(a), int(b), self.n))

    def __getitem__(self, e) -> int:
        return int(eng.hget(self.keys, self.vals, self._key(e)))

    def get(self, a: int, b: int) -> int:
        return self[(a, b)]

    def __contains__(self, e) -> bool:
        return self[e] > 0

    def __len__(self) -> int:
        return self.count

    def ensure_capacity(self, extra: int) -> None:
        if 2 * (self.count + extra) <= self.keys.shape[0]:
            return
        keys, vals = eng.new_table(4 * (self.count + extra))
        eng.rehash(self.keys, self.vals, keys, vals)
        self.keys, self.vals = keys, vals

    def increment(self, e) -> None:
        self.ensure_capacity(1)
        self.count += int(eng.hadd(self.keys, self.vals, self._key(e), 1))
        self.total += 1

    def items(self) -> Iterator[tuple[EdgeKey, int]]:
        used = np.flatnonzero(self.keys != eng.EMPTY)
        for k, v in zip(self.keys[used].tolist(), self.vals[used].tolist()):
            yield EdgeKey(k // self.n, k % self.n), v

    def as_dict(self) -> dict[EdgeKey, int]:
        return dict(self.items())

    def mass(self, edges: Iterable) -> int:
        """Sum of penalties over ``edges``."""
        return sum(self[e] for e in edges)

    def copy(self) -> "PenaltyStore":
        other = PenaltyStore.__new__(PenaltyStore)
        other.n = self.n
        other.keys = self.keys.copy()
        other.vals = self.vals.copy()
        other.count = self.count
        other.total = self.total
        return other

    def __repr__(self) -> str:
        return f"PenaltyStore(n={self.n}, edges={self.count}, total={self.total})"


def edge_table(n: int, edges: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Hash set of edges in the engine's table layout (value 1 = member)."""
    edges = [edge(*e) for e in edges]
    keys, vals = eng.new_table(max(16, 4 * len(edges)))
    for a, b in edges:
        k = int(eng.ekey(a, b, n))
        if eng.hget(keys, vals, k) == 0:
            eng.hadd(keys, vals, k, 1)
    return keys, vals
