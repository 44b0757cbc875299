"""Built-in degree models.

``two_class(a, b)``: node and edge types on degrees {3, 12} with node
correlation ``a`` and edge correlation ``b``.

``four_class(q)``: diagonal node types (2,2), (4,4), (8,8), (16,16) with
weights 8:4:2:1 and an edge matrix drawn from the simplex spanned by four
permutation-like matrices.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .degree_model import DegreeModel, ensure_consistent
from .errors import ParameterOutOfRange, SimplexViolation

TWO_CLASS_DEGREES = (3, 12)
FOUR_CLASS_DEGREES = (2, 4, 8, 16)

_EDGE_BASIS = np.array([
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],
    [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]],
    [[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],
], dtype=float) / 4.0


def two_class(a: float, b: float) -> DegreeModel:
    """Types {(3,3), (3,12), (12,3), (12,12)}; requires a in [0, 1/2], b in [0, 1/5]."""
    if not 0.0 <= a <= 0.5:
        raise ParameterOutOfRange(f"a={a} outside [0, 1/2]")
    if not 0.0 <= b <= 0.2:
        raise ParameterOutOfRange(f"b={b} outside [0, 1/5]")
    P = np.array([[0.5 - a, a], [a, 0.5 - a]])
    Q = np.array([[0.2 - b, b], [b, 0.8 - b]])
    # 0.2 - b can round to a tiny negative when b == 0.2 is given as a decimal
    P = np.clip(P, 0.0, None)
    Q = np.clip(Q, 0.0, None)
    return ensure_consistent(DegreeModel(TWO_CLASS_DEGREES, TWO_CLASS_DEGREES, P, Q))


def four_class_edge_matrix(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise SimplexViolation(f"need four simplex weights, got {q.shape}")
    if np.any(q < -1e-12) or abs(q.sum() - 1.0) > 1e-9:
        raise SimplexViolation(f"weights {q.tolist()} are not on the simplex")
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    return np.tensordot(q, _EDGE_BASIS, axes=1)


def four_class(q=(0.25, 0.25, 0.25, 0.25)) -> DegreeModel:
    P = np.diag([8.0, 4.0, 2.0, 1.0]) / 15.0
    Q = four_class_edge_matrix(q)
    return ensure_consistent(DegreeModel(FOUR_CLASS_DEGREES, FOUR_CLASS_DEGREES, P, Q))


def simplex_grid(resolution: int = 21, face: int | None = None):
    """Barycentric grid points with ``resolution`` points per edge.

    ``face`` (1..4) restricts to the face where that weight is zero.
    Points are exact rationals converted to floats, in lexicographic order.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    m = resolution - 1
    points = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            for k in range(m + 1 - i - j):
                w = (i, j, k, m - i - j - k)
                if face is not None and w[face - 1] != 0:
                    continue
                points.append(tuple(float(Fraction(x, m)) for x in w))
    return points
