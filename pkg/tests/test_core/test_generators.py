"""Tests for family generators, shadings and family files."""

import numpy as np
import pytest

from kakeyalab.core.errors import ReportIOError, ValidationError
from kakeyalab.core.family import TubeFamily
from kakeyalab.core.generators import (
    FamilySpec,
    SlabFamily,
    as_spec,
    generate_family,
    load_family,
    save_family,
    shade_family,
    tubes_inside,
)
from kakeyalab.core.geometry import ConvexBody
from kakeyalab.core.voxels import VoxelGrid, union_indices


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "spiral", "delta": 0.125},
        {"kind": "random", "delta": 0.5},
        {"kind": "random", "delta": 1e-6},
    ],
)
def test_invalid_spec(spec):
    with pytest.raises(ValidationError):
        as_spec(spec)


def test_unknown_params_rejected():
    with pytest.raises(ValidationError):
        generate_family({"kind": "random", "delta": 0.125, "params": {"tubes": 3}})


def test_spec_passthrough():
    spec = FamilySpec(kind="bush", delta=0.125)
    assert as_spec(spec) is spec
    assert spec.resolved()["count"] == 128


def test_seed_determines_family():
    spec = {"kind": "random", "delta": 0.125, "seed": 9, "params": {"count": 16}}
    first, second = generate_family(spec), generate_family(spec)
    other = generate_family({**spec, "seed": 10})
    assert np.array_equal(first.anchors, second.anchors)
    assert not np.allclose(first.anchors, other.anchors)
    assert first.metadata["seed"] == 9


def test_direction_separated_directions_spread():
    family = generate_family({"kind": "direction_separated", "delta": 0.125})
    dots = np.abs(family.directions @ family.directions.T)
    np.fill_diagonal(dots, 0.0)
    assert np.arccos(dots.max()) >= 0.1
    assert np.linalg.norm(family.anchors, axis=1).max() <= 0.45 + 1e-9


def test_sticky_levels():
    family = generate_family({"kind": "sticky", "delta": 0.125})
    assert len(family) == 64
    assert [level.scale for level in family.covers] == [1.0, 0.5, 0.25]
    for level in family.covers:
        assert len(level.assignment) == 64
        assert level.assignment.max() == len(level.covers) - 1


def test_sticky_needs_dyadic_delta():
    with pytest.raises(ValidationError):
        generate_family({"kind": "sticky", "delta": 0.1})


def test_besicovitch_slopes_are_distinct():
    family = generate_family({"kind": "besicovitch", "delta": 0.125})
    assert len(family) == 8
    slopes = family.directions[:, 0] / family.directions[:, 2]
    assert len(np.unique(np.round(slopes, 12))) == 8
    assert np.allclose(family.directions[:, 1], 0.0)


def test_besicovitch_tree_overlaps():
    family = generate_family({"kind": "besicovitch", "delta": 2**-6})
    assert len(family) == 2**6
    assert family.metadata["depth"] == 6
    assert np.allclose(family.anchors[:, 1:], 0.0)
    family = family.with_shadings(family.full_shadings(VoxelGrid.for_delta(family.delta, 2.0)))
    union = family.grid.cell_volume * len(union_indices(s.voxels for s in family.shading_list()))
    assert union <= 0.5 * family.shading_mass()


@pytest.mark.parametrize("params", [{"spread": 0.0}, {"spread": 2.5}, {"low": 0.8, "high": 0.2}])
def test_besicovitch_rejects_bad_params(params):
    with pytest.raises(ValidationError):
        generate_family({"kind": "besicovitch", "delta": 0.125, "params": params})


def test_besicovitch_needs_dyadic_delta():
    with pytest.raises(ValidationError):
        generate_family({"kind": "besicovitch", "delta": 0.1})


def test_well_spaced_cover_holds_its_tubes():
    family = generate_family({"kind": "well_spaced", "delta": 0.125})
    level = family.covers[0]
    assert level.scale == pytest.approx(0.125**0.625)
    bodies = family.bodies()
    for w in range(0, len(level.covers), 7):
        assert bodies.contained_in(level.covers[w], 0.01, level.members(w)).all()


def test_prism_clustered_tubes_inside_prisms():
    family = generate_family(
        {"kind": "prism_clustered", "delta": 1 / 64, "params": {"prisms": 4, "b": 16, "per_prism": 10}}
    )
    assert len(family) == 40
    assert len(family.metadata["planted_prisms"]) == 4
    level = family.covers[0]
    bodies = family.bodies()
    for w, prism in enumerate(level.covers):
        assert bodies.contained_in(prism, 0.01, level.members(w)).all()


def test_prism_clustered_that_cannot_fit():
    with pytest.raises(ValidationError):
        generate_family({"kind": "prism_clustered", "delta": 1 / 64})


def test_tubes_inside_rejects_thin_prism():
    with pytest.raises(ValidationError):
        tubes_inside(np.zeros((1, 3)), np.eye(3)[None], np.array([0.01, 0.1, 1.0]), 2, 0.125, np.random.default_rng(0))


def test_two_level_rho_range():
    with pytest.raises(ValidationError):
        generate_family({"kind": "two_level", "delta": 0.125, "params": {"rho": 0.2}})
    family = generate_family({"kind": "two_level", "delta": 1 / 32, "params": {"outer": 3, "inner": 4}})
    assert len(family) == 12
    assert family.covers[0].scale == 0.125


def test_hairbrush_has_stem():
    family = generate_family({"kind": "hairbrush", "delta": 0.125, "params": {"count": 10}})
    assert len(family) == 11
    assert np.allclose(family.directions[0], [0, 0, 1])
    assert np.all(family.directions[1:, 2] <= np.cos(0.25) + 1e-12)


@pytest.mark.parametrize("kind", ["parallel_slabs", "random_slabs", "slab_bush"])
def test_slab_kinds(kind):
    family = generate_family({"kind": kind, "delta": 0.125, "params": {"count": 4}})
    assert isinstance(family, SlabFamily)
    assert len(family) == 4
    assert all(S.kind == "slab" for S in family.slabs)


def test_parallel_slabs_must_fit():
    with pytest.raises(ValidationError):
        generate_family({"kind": "parallel_slabs", "delta": 0.125, "params": {"count": 16}})


class TestShading:
    """Tests for shade_family."""

    def test_full_and_random(self):
        family = generate_family({"kind": "random", "delta": 0.125, "params": {"count": 4}})
        full = shade_family(family, cells_per_delta=2.0)
        thin = shade_family(family, "random", lam=0.5, seed=1, cells_per_delta=2.0)
        assert sorted(full) == [0, 1, 2, 3]
        for i in full:
            assert set(thin[i].voxels.tolist()) <= set(full[i].voxels.tolist())
            assert len(thin[i]) < len(full[i])

    def test_two_ends_keeps_a_segment(self):
        family = generate_family({"kind": "parallel_disjoint", "delta": 0.125, "params": {"count": 1}})
        full = shade_family(family, cells_per_delta=2.0)[0]
        piece = shade_family(family, "two_ends", lam=0.5, cells_per_delta=2.0)[0]
        z = piece.centers()[:, 2]
        assert z.max() - z.min() <= 0.5 + 1e-9
        assert 0.3 * len(full) <= len(piece) <= 0.7 * len(full)

    def test_seeded_shading_is_reproducible(self):
        family = generate_family({"kind": "random", "delta": 0.125, "params": {"count": 3}})
        first = shade_family(family, "random", lam=0.3, seed=4, cells_per_delta=2.0)
        second = shade_family(family, "random", lam=0.3, seed=4, cells_per_delta=2.0)
        assert all(np.array_equal(first[i].voxels, second[i].voxels) for i in first)

    @pytest.mark.parametrize("mode,lam", [("sparse", 0.5), ("random", 0.0), ("random", 1.5)])
    def test_invalid_shading(self, mode, lam):
        family = generate_family({"kind": "random", "delta": 0.125, "params": {"count": 2}})
        with pytest.raises(ValidationError):
            shade_family(family, mode, lam=lam)

    def test_slab_shadings(self):
        family = generate_family({"kind": "parallel_slabs", "delta": 0.125, "params": {"count": 2}})
        shadings = shade_family(family, cells_per_delta=2.0)
        assert all(len(s) > 0 for s in shadings.values())


def test_save_and_load_both_kinds(tmp_path):
    tubes = generate_family({"kind": "bush", "delta": 0.125, "params": {"count": 5}})
    slabs = generate_family({"kind": "slab_bush", "delta": 0.125, "params": {"count": 3}})
    assert isinstance(load_family(save_family(tubes, tmp_path / "tubes.json")), TubeFamily)
    loaded = load_family(save_family(slabs, tmp_path / "slabs.json"))
    assert isinstance(loaded, SlabFamily)
    assert len(loaded) == 3
    assert isinstance(loaded.slabs[0], ConvexBody)


def test_load_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ReportIOError):
        load_family(path)
