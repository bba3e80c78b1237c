from __future__ import annotations

from typing import List, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import linear_sum_assignment

# total-cost agreement when probing tie-break alternatives
_RTOL = 1e-9
_ATOL = 1e-12


class Matching(BaseModel):
    pairs: List[Tuple[int, int]] = Field(default_factory=list)
    cost: float = 0.0


def _assignment_cost(m: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> Tuple[float, List[int]]:
    """Optimal cost and column choice for the given row/column subsets."""
    if not rows:
        return 0.0, []
    sub = m[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub)
    chosen = [0] * len(rows)
    for ri, ci in zip(r, c):
        chosen[ri] = cols[ci]
    return float(sub[r, c].sum()), chosen


def _lexicographic(m: np.ndarray, best: float, current: List[int]) -> List[int]:
    """Among optimal assignments (rows <= cols) pick the lexicographically
    smallest sequence of columns, row by row."""
    n_rows, n_cols = m.shape
    used: Set[int] = set()
    prefix = 0.0
    chosen: List[int] = []
    for i in range(n_rows):
        for j in range(n_cols):
            if j in used:
                continue
            if j == current[i]:
                break
            rest_cols = [c for c in range(n_cols) if c not in used and c != j]
            rest_cost, rest_choice = _assignment_cost(m, list(range(i + 1, n_rows)), rest_cols)
            if np.isclose(prefix + m[i, j] + rest_cost, best, rtol=_RTOL, atol=_ATOL):
                current = current[:i] + [j] + rest_choice
                break
        j = current[i]
        chosen.append(j)
        used.add(j)
        prefix += m[i, j]
    return chosen


def min_cost_matching(costs) -> Matching:
    """Minimum-cost rectangular assignment of min(rows, cols) pairs.

    Ties between optimal assignments are broken toward the smallest column
    index for the first row, then the second, and so on (rows and columns
    swap roles when there are more rows than columns).
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    if c.size == 0:
        return Matching()
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise ValueError("costs must be finite and non-negative")

    transposed = c.shape[0] > c.shape[1]
    m = c.T if transposed else c
    best, current = _assignment_cost(m, list(range(m.shape[0])), list(range(m.shape[1])))
    chosen = _lexicographic(m, best, current)

    pairs = [(j, i) if transposed else (i, j) for i, j in enumerate(chosen)]
    pairs.sort()
    return Matching(pairs=pairs, cost=float(sum(c[r, k] for r, k in pairs)))
