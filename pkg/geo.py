import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from formats import PoseRecord

HEATMAP_COLUMNS = ['cell_x_m', 'cell_y_m', 'frames', 'errors', 'rate']


@dataclass
class GeoGrid:
    """Square planar cells keyed by (i, j) = floor(position / bin_size_m).

    Each stored cell holds [errors, frames] with frames >= 1.
    """
    bin_size_m: float
    bins: Dict[Tuple[int, int], List[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bin_size_m > 0:
            raise ValueError(f'bin size must be positive, got {self.bin_size_m}')

    def cell(self, x_m, y_m) -> Tuple[int, int]:
        return math.floor(x_m / self.bin_size_m), math.floor(y_m / self.bin_size_m)

    def add(self, cell, errors, frames=1):
        counts = self.bins.setdefault(cell, [0, 0])
        counts[0] += errors
        counts[1] += frames

    def rate(self, cell) -> float:
        errors, frames = self.bins[cell]
        return errors / frames

    def merge(self, other: 'GeoGrid') -> 'GeoGrid':
        if other.bin_size_m != self.bin_size_m:
            raise ValueError(f'cannot merge grids with bin sizes {self.bin_size_m} and {other.bin_size_m}')
        merged = GeoGrid(self.bin_size_m, {cell: list(counts) for cell, counts in self.bins.items()})
        for cell, (errors, frames) in other.bins.items():
            merged.add(cell, errors, frames)
        return merged

    @property
    def total_errors(self) -> int:
        return sum(errors for errors, _ in self.bins.values())


def bin_errors(poses: Iterable[PoseRecord], error_counts: Dict[int, int], bin_size_m: float) -> GeoGrid:
    """Attribute each frame's error count to the cell of its ego pose.

    Every posed frame counts once toward its cell even without errors; frames
    with no pose are left out.
    """
    grid = GeoGrid(bin_size_m)
    for pose in poses:
        grid.add(grid.cell(pose.x_m, pose.y_m), error_counts.get(pose.frame, 0))
    return grid


def heatmap_table(grid: GeoGrid) -> pd.DataFrame:
    rows = []
    for cell in sorted(grid.bins):
        errors, frames = grid.bins[cell]
        rows.append({
            'cell_x_m': cell[0] * grid.bin_size_m,
            'cell_y_m': cell[1] * grid.bin_size_m,
            'frames': frames,
            'errors': errors,
            'rate': errors / frames,
        })
    return pd.DataFrame(rows, columns=HEATMAP_COLUMNS)


def heatmap_image(grid: GeoGrid) -> np.ndarray:
    """8-bit intensity over the bounding rectangle of the cells, rate scaled
    to the observed maximum. Row 0 holds the largest j."""
    cells = np.asarray(sorted(grid.bins), dtype=np.int64)
    i0, j0 = cells.min(axis=0)
    i1, j1 = cells.max(axis=0)
    image = np.zeros((j1 - j0 + 1, i1 - i0 + 1), dtype=np.uint8)
    peak = max(grid.rate(cell) for cell in grid.bins)
    if peak <= 0:
        return image
    for (i, j) in grid.bins:
        image[j1 - j, i - i0] = math.floor(grid.rate((i, j)) / peak * 255 + 0.5)
    return image


def export_heatmap(grid: GeoGrid) -> Tuple[pd.DataFrame, np.ndarray]:
    if not grid.bins:
        raise ValueError('cannot export a heatmap of an empty grid')
    return heatmap_table(grid), heatmap_image(grid)


def write_heatmap_csv(table: pd.DataFrame, stream):
    table.to_csv(stream, index=False, lineterminator='\n')
