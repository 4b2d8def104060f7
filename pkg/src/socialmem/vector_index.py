"""Cosine nearest-neighbour index over message embeddings.

Entries are partitioned per face id. A partition is scanned exactly while it
holds at most ``exact_threshold`` entries; past that it is served by an HNSW
graph and the graph's candidates are re-scored exactly before ranking.
Results always rank by descending similarity, ties by ascending message id.
"""

from __future__ import annotations

import threading
import zlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, DuplicateEntryError, ValidationError
from .hnsw import HNSWGraph


@dataclass(frozen=True)
class IndexEntry:
    message_id: int
    face_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class IndexParams:
    dim: int = 1536
    m: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    exact_threshold: int = 512
    seed: int = 0


class _Partition:
    def __init__(self, face_id: str, params: IndexParams):
        self.face_id = face_id
        self.params = params
        self.lock = threading.Lock()
        self.size = 0
        self.message_ids = np.zeros(64, dtype=np.int64)
        # float64 rows are the scoring source; the graph walks a float32 copy
        self._vecs = np.zeros((64, params.dim), dtype=np.float64)
        self.graph: HNSWGraph | None = None

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs[: self.size]

    def add(self, message_id: int, vec: np.ndarray) -> int:
        if self.size == self.message_ids.shape[0]:
            self.message_ids = np.concatenate([self.message_ids, np.zeros_like(self.message_ids)])
            self._vecs = np.concatenate([self._vecs, np.zeros_like(self._vecs)])
        pos = self.size
        self.message_ids[pos] = message_id
        self._vecs[pos] = vec
        if self.graph is not None:
            self.graph.add(vec)
        self.size += 1
        if self.graph is None and self.size > self.params.exact_threshold:
            self._build_graph()
        return pos

    def _build_graph(self) -> None:
        p = self.params
        seed = (p.seed * 1_000_003 + zlib.crc32(self.face_id.encode("utf-8"))) & 0xFFFFFFFF
        graph = HNSWGraph(p.dim, m=p.m, ef_construction=p.ef_construction, seed=seed,
                          capacity=max(2 * self.size, 1024))
        for i in range(self.size):
            graph.add(self._vecs[i])
        self.graph = graph

    def exact(self, q: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        scores = kernels.cosine_scores(self.vectors, q)
        return kernels.top_k(scores, self.message_ids[: self.size], k)

    def query(self, q: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        if self.graph is None:
            return self.exact(q, k)
        nodes, _ = self.graph.search(q, max(self.params.ef_search, k))
        scores = kernels.cosine_scores(self._vecs[nodes], q)
        return kernels.top_k(scores, self.message_ids[nodes], k)


class VectorIndex:
    """Per-face cosine index with an exact-scan oracle.

    >>> idx = VectorIndex(IndexParams(dim=3))
    >>> idx.insert(IndexEntry(1, "f1", np.array([1.0, 0.0, 0.0])))
    >>> idx.search(np.array([1.0, 0.0, 0.0]), 1, "f1")
    [(1, 1.0)]
    """

    def __init__(self, params: IndexParams | None = None):
        self.params = params or IndexParams()
        self._parts: dict[str, _Partition] = {}
        self._where: dict[int, tuple[str, int]] = {}
        self._aliases: dict[str, str] = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.params.dim

    def __len__(self) -> int:
        return len(self._where)

    def __contains__(self, message_id: int) -> bool:
        return message_id in self._where

    def _unit(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float64).ravel()
        if v.shape[0] != self.params.dim:
            raise DimensionError(f"expected dimension {self.params.dim}, got {v.shape[0]}")
        n = np.linalg.norm(v)
        if not np.isfinite(n) or n == 0.0:
            raise ValidationError("vector must have a finite, non-zero norm")
        # already-unit input (e.g. a restored snapshot) is kept bit-for-bit
        if abs(n - 1.0) <= 1e-12:
            return v.copy()
        return v / n

    def insert(self, entry: IndexEntry) -> None:
        v = self._unit(entry.vector)
        with self._lock:
            if entry.message_id in self._where:
                raise DuplicateEntryError(entry.message_id)
            part = self._parts.get(entry.face_id)
            if part is None:
                part = self._parts[entry.face_id] = _Partition(entry.face_id, self.params)
            # reserve the id before releasing the index lock
            self._where[entry.message_id] = (entry.face_id, -1)
        with part.lock:
            pos = part.add(entry.message_id, v)
        self._where[entry.message_id] = (entry.face_id, pos)

    def alias(self, duplicate_face: str, survivor_face: str) -> None:
        """Route queries for ``survivor_face`` to entries tagged ``duplicate_face`` too."""
        with self._lock:
            if self._root(survivor_face) == duplicate_face:
                raise ValidationError("alias would form a cycle")
            self._aliases[duplicate_face] = survivor_face

    def _root(self, face: str) -> str:
        while face in self._aliases:
            face = self._aliases[face]
        return face

    def faces_for(self, face_filter: str) -> list[str]:
        root = self._root(face_filter)
        with self._lock:
            return sorted(f for f in self._parts if self._root(f) == root)

    def _run(self, query, k: int, face_filter: str, exact: bool) -> list[tuple[int, float]]:
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != self.params.dim:
            raise DimensionError(f"expected dimension {self.params.dim}, got {q.shape[0]}")
        n = np.linalg.norm(q)
        if n == 0.0:
            raise ValidationError("query vector must be non-zero")
        q = q / n
        id_parts, score_parts = [], []
        for face in self.faces_for(face_filter):
            part = self._parts[face]
            with part.lock:
                if part.size == 0:
                    continue
                ids, scores = part.exact(q, k) if exact else part.query(q, k)
            id_parts.append(ids)
            score_parts.append(scores)
        if not id_parts:
            return []
        ids, scores = kernels.top_k(np.concatenate(score_parts), np.concatenate(id_parts), k)
        return [(int(i), float(s)) for i, s in zip(ids, scores)]

    def search(self, query, k: int, face_filter: str) -> list[tuple[int, float]]:
        """Top ``k`` (message_id, cosine) within one person's entries."""
        return self._run(query, k, face_filter, exact=False)

    def exact_search(self, query, k: int, face_filter: str) -> list[tuple[int, float]]:
        """Full-scan version of :meth:`search`, used as its oracle."""
        return self._run(query, k, face_filter, exact=True)

    def vector(self, message_id: int) -> np.ndarray:
        face, pos = self._where[message_id]
        part = self._parts[face]
        with part.lock:
            return part.vectors[pos].copy()

    def entries(self) -> list[IndexEntry]:
        """All entries ordered by message id (face tag as inserted)."""
        out = []
        for mid in sorted(self._where):
            out.append(IndexEntry(mid, self._where[mid][0], self.vector(mid)))
        return out

    def aliases(self) -> dict[str, str]:
        return dict(self._aliases)

    def uses_graph(self, face_id: str) -> bool:
        part = self._parts.get(face_id)
        return part is not None and part.graph is not None
