"""In-memory vector tables with exact brute-force top-k cosine search.

Search is an exhaustive scan (no approximate index): corpus scale is a
few thousand rows, so exactness is cheap and lets the result be checked
against an independent scan oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ZeroVector
from .sections import SectionId

logger = logging.getLogger(__name__)


@dataclass
class TopKResult:
    """Hits sorted by descending similarity, ties broken by ascending row id."""

    hits: list[tuple[int, float]]
    k: int
    min_sim: float


class VectorTable:
    """Rows of (row_id, vector, payload of section ids), fixed dimension."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.row_ids: list[int] = []
        self.payloads: list[frozenset[SectionId]] = []
        self._vectors: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None
        self._norms: np.ndarray | None = None
        self._ids_seen: set[int] = set()

    def __len__(self) -> int:
        return len(self.row_ids)

    def add_row(self, row_id: int, vector, payload) -> None:
        if row_id in self._ids_seen:
            raise ValueError(f"duplicate row id {row_id}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector has shape {vec.shape}, table dim is {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"row {row_id}: non-finite vector entries")
        if not np.any(vec):
            raise ZeroVector(f"row {row_id}: zero vector")
        self.row_ids.append(row_id)
        self.payloads.append(frozenset(payload))
        self._vectors.append(vec)
        self._ids_seen.add(row_id)
        self._matrix = None
        self._norms = None

    def _ensure_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            self._matrix = np.ascontiguousarray(np.vstack(self._vectors))
            self._norms = np.linalg.norm(self._matrix, axis=1)
        return self._matrix, self._norms

    def vector(self, row_id: int) -> np.ndarray:
        return self._vectors[self.row_ids.index(row_id)]

    def payload(self, row_id: int) -> frozenset[SectionId]:
        return self.payloads[self.row_ids.index(row_id)]

    def rows(self):
        """Iterate (row_id, vector, payload) in insertion order."""
        return zip(self.row_ids, self._vectors, self.payloads)


def top_k(table: VectorTable, query, k: int, min_sim: float) -> TopKResult:
    """Exact top-k rows by cosine similarity, strictly above ``min_sim``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (table.dim,):
        raise DimensionMismatch(
            f"query has shape {q.shape}, table dim is {table.dim}")
    q_norm = float(np.linalg.norm(q))
    if q_norm == 0.0:
        raise ZeroVector("zero query vector")
    if len(table) == 0:
        return TopKResult([], k, min_sim)
    matrix, norms = table._ensure_matrix()
    sims = kernels.cosine_scan(matrix, norms, np.ascontiguousarray(q), q_norm)
    candidates = [
        (table.row_ids[i], float(sims[i]))
        for i in np.flatnonzero(sims > min_sim)
    ]
    candidates.sort(key=lambda hit: (-hit[1], hit[0]))
    return TopKResult(candidates[:k], k, min_sim)
