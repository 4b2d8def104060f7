"""Array-backed HNSW graph over unit-norm float32 vectors.

The graph state lives in flat numpy arrays so the walk and insert kernels in
``kernels`` can run under numba. Node ids are dense insertion positions.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels

MAX_LEVEL = 16


class HNSWGraph:
    """Incremental HNSW index.

    Args:
        dim: vector dimension.
        m: graph degree on the upper layers; layer 0 allows ``2 * m``.
        ef_construction: beam width while linking new nodes.
        seed: seeds the level draws, so a replayed insertion order rebuilds
            the identical graph.
    """

    def __init__(self, dim: int, m: int = 16, ef_construction: int = 200, seed: int = 0,
                 capacity: int = 1024):
        if m < 2:
            raise ValueError("m must be >= 2")
        self.dim = dim
        self.m = m
        self.ef_construction = ef_construction
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._ml = 1.0 / math.log(m)
        self.size = 0
        self.entry = -1
        self.top = -1
        self._tag = 1
        self._alloc(max(capacity, 16), 1)

    def _alloc(self, cap: int, layers: int) -> None:
        width = 2 * self.m
        vecs = np.zeros((cap, self.dim), dtype=np.float32)
        links = np.zeros((layers, cap, width), dtype=np.int32)
        counts = np.zeros((layers, cap), dtype=np.int32)
        visited = np.zeros(cap, dtype=np.int64)
        if self.size:
            old_layers = self.links.shape[0]
            vecs[: self.size] = self.vecs[: self.size]
            links[:old_layers, : self.size] = self.links[:, : self.size]
            counts[:old_layers, : self.size] = self.counts[:, : self.size]
        self.vecs, self.links, self.counts, self.visited = vecs, links, counts, visited
        self._tag = 1

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()
        return min(int(-math.log(u) * self._ml), MAX_LEVEL)

    def add(self, vector: np.ndarray) -> int:
        """Insert one unit vector; returns its node id."""
        level = self._draw_level()
        cap, layers = self.vecs.shape[0], self.links.shape[0]
        if self.size == cap or level >= layers:
            self._alloc(cap * 2 if self.size == cap else cap, max(layers, level + 1))
        node = self.size
        self.vecs[node] = vector
        self.size += 1
        if self.entry < 0:
            self.entry, self.top = node, level
            return node
        self._tag = kernels.insert_node(
            self.vecs, self.links, self.counts, node, level, self.entry, self.top,
            self.m, self.ef_construction, self.visited, self._tag,
        )
        if level > self.top:
            self.entry, self.top = node, level
        return node

    def search(self, query: np.ndarray, ef: int) -> tuple[np.ndarray, np.ndarray]:
        """Approximate neighbours of ``query``: (node ids, 1 - cosine), closest first."""
        if self.size == 0:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
        q = np.ascontiguousarray(query, dtype=np.float32)
        ids, dists, self._tag = kernels.knn_search(
            self.vecs, self.links, self.counts, self.entry, self.top, q,
            max(ef, 1), self.visited, self._tag,
        )
        return ids, dists

    def degree_stats(self) -> tuple[float, int]:
        c = self.counts[0, : self.size]
        return float(c.mean()) if self.size else 0.0, int(c.max()) if self.size else 0
