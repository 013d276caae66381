"""Tests for tube families."""

import numpy as np
import pytest

from kakeyalab.core.errors import ReportIOError, ValidationError
from kakeyalab.core.family import CoverLevel, TubeFamily
from kakeyalab.core.geometry import ConvexBody, DeltaTube
from kakeyalab.core.voxels import Shading, VoxelGrid

DELTA = 1 / 8


@pytest.fixture
def three_tubes():
    return TubeFamily(
        anchors=[[0, 0, 0], [0.5, 0, 0], [0, 0.5, 0]],
        directions=[[0, 0, 2], [1, 0, 1], [0, 1, 1]],
        delta=DELTA,
    )


def test_directions_are_normalized(three_tubes):
    assert np.allclose(np.linalg.norm(three_tubes.directions, axis=1), 1.0)
    assert np.allclose(three_tubes.directions[0], [0, 0, 1])


def test_len_getitem_iter(three_tubes):
    assert len(three_tubes) == 3
    tube = three_tubes[1]
    assert isinstance(tube, DeltaTube)
    assert np.allclose(tube.anchor, [0.5, 0, 0])
    assert len(list(three_tubes)) == 3


def test_volumes(three_tubes):
    assert three_tubes.tube_volume == pytest.approx(4 * DELTA**2)
    assert three_tubes.total_volume() == pytest.approx(12 * DELTA**2)


@pytest.mark.parametrize(
    "anchors,directions,delta",
    [
        ([[0, 0, 0]], [[0, 0, 1], [1, 0, 0]], DELTA),
        ([[0, 0, 0]], [[0, 0, 0]], DELTA),
        ([[0, 0, 0]], [[0, 0, 1]], 0.5),
    ],
)
def test_invalid_family(anchors, directions, delta):
    with pytest.raises(ValidationError):
        TubeFamily(anchors=anchors, directions=directions, delta=delta)


def test_from_tubes():
    tubes = [DeltaTube([0, 0, 0], [0, 0, 1], DELTA), DeltaTube([0.2, 0, 0], [0, 1, 1], DELTA)]
    family = TubeFamily.from_tubes(tubes, metadata={"kind": "manual"})
    assert len(family) == 2
    assert family.delta == DELTA
    assert family.metadata == {"kind": "manual"}

    with pytest.raises(ValidationError):
        TubeFamily.from_tubes([])


def test_grid_is_none_without_shadings(three_tubes):
    assert three_tubes.grid is None
    assert three_tubes.shading_mass() == 0.0


def test_full_shadings_measure_close_to_volume(three_tubes):
    grid = VoxelGrid.for_delta(DELTA)
    shaded = three_tubes.with_shadings(three_tubes.full_shadings(grid))
    assert shaded.grid is grid
    assert sorted(shaded.shadings) == [0, 1, 2]
    assert shaded.shading_mass() == pytest.approx(shaded.total_volume(), rel=0.15)


def test_subset_rekeys_shadings_and_drops_covers(three_tubes):
    grid = VoxelGrid.for_delta(DELTA)
    shadings = three_tubes.full_shadings(grid)
    body = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.5, 0.5, 1.0), kind="prism")
    family = TubeFamily(
        three_tubes.anchors,
        three_tubes.directions,
        DELTA,
        shadings,
        [CoverLevel(0.5, [body], np.zeros(3, dtype=np.int64))],
    )
    sub = family.subset([2, 0])
    assert len(sub) == 2
    assert np.allclose(sub.anchors[0], [0, 0.5, 0])
    assert sorted(sub.shadings) == [0, 1]
    assert sub.shadings[0].body_id == 0
    assert np.array_equal(sub.shadings[0].voxels, shadings[2].voxels)
    assert sub.covers == []


def test_cover_near_picks_smallest_in_range():
    body = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.25, 0.25, 1.0), kind="prism")
    levels = [CoverLevel(scale, [body], np.zeros(1, dtype=np.int64)) for scale in (0.5, 0.25, 0.125)]
    family = TubeFamily([[0, 0, 0]], [[0, 0, 1]], DELTA, covers=levels)
    assert family.cover_near(0.25, 4.0).scale == 0.25
    assert family.cover_near(0.3, 2.0).scale == 0.5
    assert family.cover_near(0.6, 2.0) is None


def test_cover_members():
    body = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.25, 0.25, 1.0), kind="prism")
    level = CoverLevel(0.25, [body, body], np.array([0, 1, 0, 1, 1]))
    assert level.members(1).tolist() == [1, 3, 4]


def test_to_dict_from_dict_keeps_shadings(three_tubes):
    grid = VoxelGrid.for_delta(DELTA)
    shadings = three_tubes.full_shadings(grid)
    shadings[1] = shadings[1].restricted(np.arange(len(shadings[1])) % 2 == 0)
    family = three_tubes.with_shadings(shadings)

    restored = TubeFamily.from_dict(family.to_dict())
    assert np.allclose(restored.anchors, family.anchors)
    assert restored.grid.same_as(grid)
    assert np.array_equal(restored.shadings[1].voxels, shadings[1].voxels)


def test_from_dict_rejects_shadings_without_grid(three_tubes):
    data = three_tubes.to_dict()
    data["shadings"] = [{"tube": 0, "voxels": [[0, 3]]}]
    with pytest.raises(ValidationError):
        TubeFamily.from_dict(data)


def test_save_and_load(tmp_path, three_tubes):
    path = three_tubes.save(tmp_path / "families" / "three.json")
    assert path.exists()
    loaded = TubeFamily.load(path)
    assert len(loaded) == 3
    assert loaded.delta == DELTA


def test_load_missing_file(tmp_path):
    with pytest.raises(ReportIOError):
        TubeFamily.load(tmp_path / "missing.json")


def test_shading_list_is_ordered():
    grid = VoxelGrid.for_delta(DELTA)
    family = TubeFamily([[0, 0, 0], [0.1, 0, 0]], [[0, 0, 1], [0, 0, 1]], DELTA)
    family = family.with_shadings({1: Shading(1, [5, 6], grid), 0: Shading(0, [1], grid)})
    assert [s.body_id for s in family.shading_list()] == [0, 1]
