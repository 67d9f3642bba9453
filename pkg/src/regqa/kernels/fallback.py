"""Numpy implementation of the similarity scan; used when the compiled
extension is unavailable or disabled."""
import numpy as np


def cosine_scan(matrix: np.ndarray, norms: np.ndarray, query: np.ndarray,
                query_norm: float) -> np.ndarray:
    """Cosine similarity of ``query`` against every row of ``matrix``.

    ``norms`` holds precomputed row L2 norms; all norms must be nonzero.
    """
    return (matrix @ query) / (norms * query_norm)
