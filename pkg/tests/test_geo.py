import io

import numpy as np
import pytest

from formats import PoseRecord
from geo import GeoGrid, bin_errors, export_heatmap, heatmap_table, write_heatmap_csv


def test_binning_counts_frames_and_errors():
    poses = [PoseRecord(0, 1.0, 1.0), PoseRecord(1, 2.0, 3.0), PoseRecord(2, 12.0, 1.0), PoseRecord(3, -0.5, 0.0)]
    grid = bin_errors(poses, {0: 1, 2: 3, 7: 5}, 10.0)
    assert grid.bins == {(0, 0): [1, 2], (1, 0): [3, 1], (-1, 0): [0, 1]}
    assert grid.rate((0, 0)) == 0.5
    # frame 7 has no pose
    assert grid.total_errors == 4


def test_heatmap_intensities():
    grid = GeoGrid(10.0)
    grid.add((0, 0), 1, 2)
    grid.add((1, 0), 1, 1)
    table, image = export_heatmap(grid)
    assert list(table['rate']) == [0.5, 1.0]
    assert list(table['cell_x_m']) == [0.0, 10.0]
    assert image.dtype == np.uint8
    assert image.tolist() == [[128, 255]]


def test_heatmap_rows_put_largest_y_first():
    grid = GeoGrid(5.0)
    grid.add((0, 0), 0, 1)
    grid.add((0, 2), 2, 1)
    _, image = export_heatmap(grid)
    assert image.tolist() == [[255], [0], [0]]


def test_empty_grid_cannot_be_exported():
    with pytest.raises(ValueError):
        export_heatmap(GeoGrid(10.0))
    with pytest.raises(ValueError):
        GeoGrid(0.0)


def test_merge_equals_joint_binning():
    poses = [PoseRecord(f, f * 3.0, (f % 3) * 4.0) for f in range(20)]
    errors = {f: f % 4 for f in range(20)}
    joint = bin_errors(poses, errors, 5.0)
    merged = bin_errors(poses[:9], errors, 5.0).merge(bin_errors(poses[9:], errors, 5.0))
    assert merged.bins == joint.bins
    with pytest.raises(ValueError):
        joint.merge(GeoGrid(2.0))


def test_heatmap_csv_columns():
    grid = GeoGrid(10.0)
    grid.add((0, 0), 1, 4)
    buf = io.StringIO()
    write_heatmap_csv(heatmap_table(grid), buf)
    assert buf.getvalue().splitlines() == ['cell_x_m,cell_y_m,frames,errors,rate', '0.0,0.0,4,1,0.25']
