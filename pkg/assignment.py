from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from boxes import box_iou_matrix


@dataclass(frozen=True)
class MatchResult:
    pairs: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_a: List[int] = field(default_factory=list)
    unmatched_b: List[int] = field(default_factory=list)


def pad_square(cost: np.ndarray, pad_value: float = 1.0) -> np.ndarray:
    rows, cols = cost.shape
    size = max(rows, cols)
    padded = np.full((size, size), pad_value, dtype=np.float64)
    padded[:rows, :cols] = cost
    return padded


def hungarian(cost, pad_value: float = 1.0) -> List[Tuple[int, int]]:
    """Minimum-cost assignment of min(n, m) row/column pairs.

    Rectangular matrices are padded to a square one with `pad_value`; pairs
    landing on padding are dropped. The solver scans row-major, so equal-cost
    alternatives resolve the same way on every run.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return []
    if cost.ndim != 2:
        raise ValueError(f'cost must be a 2D matrix, got shape {cost.shape}')
    if not np.all(np.isfinite(cost)):
        raise ValueError('cost matrix contains non-finite entries')

    rows, cols = cost.shape
    row_ind, col_ind = linear_sum_assignment(pad_square(cost, pad_value))
    return [(int(r), int(c)) for r, c in zip(row_ind, col_ind) if r < rows and c < cols]


def assignment_cost(cost, assignment: Sequence[Tuple[int, int]]) -> float:
    cost = np.asarray(cost, dtype=np.float64)
    return float(sum(cost[r, c] for r, c in assignment))


def match_boxes(set_a: Sequence, set_b: Sequence, min_iou: float = 0.5) -> MatchResult:
    """Hungarian matching on cost 1 - IoU, then pairs below `min_iou` are dissolved."""
    if not 0.0 < min_iou <= 1.0:
        raise ValueError(f'min_iou {min_iou} outside (0, 1]')
    ious = box_iou_matrix(set_a, set_b)

    pairs = []
    for r, c in hungarian(1.0 - ious):
        if ious[r, c] >= min_iou:
            pairs.append((r, c, float(ious[r, c])))

    matched_a = {r for r, _, _ in pairs}
    matched_b = {c for _, c, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_a=[i for i in range(len(set_a)) if i not in matched_a],
        unmatched_b=[j for j in range(len(set_b)) if j not in matched_b],
    )
