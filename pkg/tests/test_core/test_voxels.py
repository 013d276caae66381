"""Tests for the voxel grid, rasterizer and shading set operations."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from kakeyalab.core.errors import ExtentError, GridMismatchError, ResolutionError
from kakeyalab.core.geometry import ConvexBody, DeltaTube
from kakeyalab.core.voxels import (
    Shading,
    VoxelGrid,
    check_same_grid,
    decode_runs,
    encode_runs,
    essentially_distinct,
    multiplicities,
    union_indices,
    union_of_bodies,
    voxelize,
    voxelize_many,
)


def _brute_force(body, grid):
    every = np.arange(grid.extent**3, dtype=np.int64)
    return every[body.contains_points(grid.centers(every))]


def test_grid_for_delta():
    grid = VoxelGrid.for_delta(1 / 16)
    assert grid.h == pytest.approx(1 / 64)
    assert grid.extent == 256
    assert grid.cell_volume == pytest.approx((1 / 64) ** 3)
    assert np.allclose(grid.upper, [2, 2, 2])


def test_locate_and_centers_agree():
    grid = VoxelGrid.for_delta(1 / 8)
    points = np.array([[0.01, -0.3, 1.2], [-1.99, 1.99, 0.0]])
    centers = grid.centers(grid.locate(points))
    assert np.all(np.abs(centers - points) <= grid.h / 2 + 1e-12)


def test_tube_volume_within_ten_percent():
    delta = 1 / 16
    grid = VoxelGrid.for_delta(delta)
    tube = DeltaTube([0.1, -0.2, 0.05], [0.3, 0.5, 0.8], delta)
    measured = voxelize(tube, grid).measure()
    assert measured == pytest.approx(4 * delta**2, rel=0.1)


@pytest.mark.parametrize("kind", ["prism", "ellipsoid"])
def test_rasterizer_matches_brute_force(kind):
    grid = VoxelGrid.for_delta(0.25, 2.0)
    axes = Rotation.from_rotvec([0.3, -0.7, 0.45]).as_matrix()
    body = ConvexBody([0.11, -0.07, 0.23], axes, (0.3, 0.55, 1.1), kind)
    assert voxelize(body, grid).voxels.tolist() == _brute_force(body, grid).tolist()


def test_slab_rasterizer_matches_brute_force():
    grid = VoxelGrid.for_delta(0.25, 2.0)
    slab = ConvexBody.slab([0.2, 0.3, 0.9], 0.17, 0.2)
    assert voxelize(slab, grid).voxels.tolist() == _brute_force(slab, grid).tolist()


def test_body_leaving_grid_raises():
    grid = VoxelGrid.for_delta(1 / 8)
    with pytest.raises(ExtentError):
        voxelize(DeltaTube([1.9, 0, 0], [1, 0, 0], 1 / 8), grid)


def test_voxelize_many_matches_single_threaded():
    grid = VoxelGrid.for_delta(1 / 16)
    tubes = [DeltaTube([0, 0, 0.1 * i], [1, i, 2], 1 / 16) for i in range(4)]
    serial = voxelize_many(tubes, grid, workers=1)
    threaded = voxelize_many(tubes, grid, workers=3)
    assert [s.voxels.tolist() for s in serial] == [s.voxels.tolist() for s in threaded]
    assert [s.body_id for s in threaded] == [0, 1, 2, 3]


def test_union_of_bodies_streams_in_chunks():
    grid = VoxelGrid.for_delta(1 / 16)
    tubes = [DeltaTube([0.05 * i, 0, 0], [i, 1, 3], 1 / 16) for i in range(5)]
    expected = union_indices(s.voxels for s in voxelize_many(tubes, grid))
    assert np.array_equal(union_of_bodies(tubes, grid, chunk=2), expected)
    assert np.array_equal(union_of_bodies(tubes, grid, workers=2, chunk=16), expected)
    assert len(union_of_bodies([], grid)) == 0


def test_shading_restricted_and_measure():
    grid = VoxelGrid.for_delta(1 / 8)
    shading = Shading(0, np.array([3, 5, 9, 12]), grid)
    half = shading.restricted(np.array([True, False, True, False]))
    assert half.voxels.tolist() == [3, 9]
    assert half.measure() == pytest.approx(2 * grid.cell_volume)


def test_union_and_multiplicities():
    arrays = [np.array([1, 2, 3]), np.array([3, 4]), np.array([4, 5, 1])]
    assert union_indices(arrays, batch=2).tolist() == [1, 2, 3, 4, 5]
    assert sorted(multiplicities(arrays).tolist()) == [1, 1, 2, 2, 2]


def test_check_same_grid():
    fine, coarse = VoxelGrid.for_delta(1 / 16), VoxelGrid.for_delta(1 / 8)
    assert check_same_grid([Shading(0, [1], fine), Shading(1, [2], fine)]).same_as(fine)
    with pytest.raises(GridMismatchError):
        check_same_grid([Shading(0, [1], fine), Shading(1, [2], coarse)])


def test_essentially_distinct():
    delta = 1 / 16
    grid = VoxelGrid.for_delta(delta)
    u = DeltaTube([0, 0, 0], [0, 0, 1], delta)
    far = DeltaTube([10 * delta, 0, 0], [0, 0, 1], delta)
    assert not essentially_distinct(u, u, grid)
    assert essentially_distinct(u, far, grid)
    with pytest.raises(ResolutionError):
        essentially_distinct(u, far, VoxelGrid.for_delta(delta, 1.0))


def test_run_length_encoding():
    voxels = np.array([1, 2, 3, 7, 8, 20])
    assert encode_runs(voxels) == [[1, 3], [7, 2], [20, 1]]
    assert decode_runs([[1, 3], [7, 2], [20, 1]]).tolist() == voxels.tolist()
    assert encode_runs(np.zeros(0)) == []
