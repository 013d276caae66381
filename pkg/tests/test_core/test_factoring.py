"""Tests for bipartite pruning, convex and slab factoring, Brunn envelopes and rigid motions."""

import numpy as np
import pytest

from kakeyalab.core.errors import StatisticalFailure, ValidationError, VerificationError
from kakeyalab.core.factoring import (
    BipartiteGraph,
    brunn_envelope,
    factor_convex,
    factor_slab,
    motion_count,
    prune_bipartite,
    random_rigid_factor,
    sample_motion,
    voxel_disjoint,
)
from kakeyalab.core.family import TubeFamily
from kakeyalab.core.generators import generate_family
from kakeyalab.core.geometry import ConvexBody
from kakeyalab.core.voxels import VoxelGrid


def _clusters(delta=1 / 16, per_cluster=8, seed=11):
    rng = np.random.default_rng(seed)
    anchors, directions = [], []
    for center, axis in (([0.0, 0.0, 0.0], [0, 0, 1.0]), ([1.0, 0.0, 0.0], [0, 1.0, 0])):
        anchors.append(np.array(center) + rng.normal(scale=0.01, size=(per_cluster, 3)))
        directions.append(np.array(axis) + rng.normal(scale=0.01, size=(per_cluster, 3)))
    return TubeFamily(np.vstack(anchors), np.vstack(directions), delta)


def _planar(delta=1 / 8, count=24, seed=5):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0, np.pi, size=count)
    directions = np.stack([np.cos(angles), np.sin(angles), np.zeros(count)], axis=1)
    anchors = np.column_stack([rng.uniform(-0.2, 0.2, size=(count, 2)), np.zeros(count)])
    family = TubeFamily(anchors, directions, delta)
    return family.with_shadings(family.full_shadings(VoxelGrid.for_delta(delta, 2.0)))


def _perpendicular_clusters(delta=1 / 16, per_cluster=6, seed=2):
    """Tubes lying flat in the plane z = 0 next to upright tubes in the plane x = 0.6."""
    rng = np.random.default_rng(seed)
    tilt = rng.uniform(-0.5, 0.5, size=(2, per_cluster))
    offsets = rng.uniform(-0.2, 0.2, size=(2, per_cluster))
    zeros = np.zeros(per_cluster)
    flat = np.column_stack([np.full(per_cluster, -0.6), offsets[0], zeros])
    flat_dirs = np.column_stack([np.cos(tilt[0]), np.sin(tilt[0]), zeros])
    upright = np.column_stack([np.full(per_cluster, 0.6), offsets[1], zeros])
    upright_dirs = np.column_stack([zeros, np.sin(tilt[1]), np.cos(tilt[1])])
    family = TubeFamily(np.vstack([flat, upright]), np.vstack([flat_dirs, upright_dirs]), delta)
    return family.with_shadings(family.full_shadings(VoxelGrid.for_delta(delta, 2.0)))


class TestBipartiteGraph:
    """Tests for the bipartite graph container and pruning."""

    @pytest.mark.parametrize(
        "edges",
        [
            [[0, 0], [2, 0]],
            [[0, 0], [0, 3]],
            [[0, 0], [0, 0]],
        ],
    )
    def test_invalid_edges(self, edges):
        with pytest.raises(ValidationError):
            BipartiteGraph(2, 2, np.array(edges))

    def test_degrees(self):
        graph = BipartiteGraph(2, 3, np.array([[0, 0], [0, 1], [1, 2]]))
        assert graph.left_degrees().tolist() == [2, 1]
        assert graph.right_degrees().tolist() == [1, 1, 1]
        assert graph.edge_count == 3

    def test_prune_removes_sparse_vertex(self):
        edges = [[0, j] for j in range(10)] + [[1, 0]]
        pruned = prune_bipartite(BipartiteGraph(2, 10, np.array(edges)))
        assert pruned.left_kept.tolist() == [0]
        assert pruned.right_kept.tolist() == list(range(10))
        assert pruned.edge_count == 10

    def test_prune_keeps_half_the_edges_and_degree_floors(self):
        rng = np.random.default_rng(2)
        pairs = {(int(a), int(b)) for a, b in rng.integers(0, 20, size=(120, 2))}
        graph = BipartiteGraph(20, 20, np.array(sorted(pairs)))
        pruned = prune_bipartite(graph)
        assert 2 * pruned.edge_count >= graph.edge_count
        left = np.bincount(pruned.edges[:, 0], minlength=20)[pruned.left_kept]
        right = np.bincount(pruned.edges[:, 1], minlength=20)[pruned.right_kept]
        assert np.all(left >= graph.edge_count / 80)
        assert np.all(right >= graph.edge_count / 80)

    def test_prune_needs_edges(self):
        with pytest.raises(ValidationError):
            prune_bipartite(BipartiteGraph(3, 3, np.zeros((0, 2))))


class TestFactorConvex:
    """Tests for convex factoring from above."""

    def test_structure_of_result(self):
        family = _clusters()
        result = factor_convex(family, family.delta, {"k_cap": 1e9})
        assert len(result.kept) > 0
        assert set(result.kept.tolist()) <= set(range(len(family)))
        assert len(result.assignment) == len(result.kept)
        assert result.assignment.max() < len(result.covers)
        assert set(result.conclusions) == {"i_size", "ii_balance", "iii_covers", "iv_rescaled"}
        assert result.achieved_K == pytest.approx(max(c["value"] for c in result.conclusions.values()))
        assert result.achieved_K >= 1.0

    def test_kept_bodies_lie_in_their_covers(self):
        family = _clusters()
        result = factor_convex(family, family.delta, {"k_cap": 1e9})
        bodies = family.bodies()
        for w, cover in enumerate(result.covers):
            members = result.cover_members(w)
            assert bodies.contained_in(cover, 0.01, members).all()

    def test_small_cap_raises_verification_error(self):
        family = _clusters()
        with pytest.raises(VerificationError):
            factor_convex(family, family.delta, {"k_cap": 0.5})

    def test_direction_separated_family_needs_one_cover(self):
        family = generate_family({"kind": "direction_separated", "delta": 0.125})
        result = factor_convex(family, family.delta, {"k_cap": 1e9})
        assert len(result.covers) == 1
        assert (result.assignment == 0).all()
        assert family.bodies().contained_in(result.covers[0], 0.01, result.kept).all()

    def test_empty_family(self):
        with pytest.raises(ValidationError):
            factor_convex([], 1 / 16)


class TestFactorSlab:
    """Tests for greedy slab factoring."""

    def test_planar_family_factors(self):
        family = _planar()
        result = factor_slab(family)
        assert result.groups
        assert 0.0 < result.retention <= 1.0 + 1e-9
        assert result.passed
        assert voxel_disjoint(result.groups)

    def test_group_shadings_lie_in_their_slab(self):
        family = _planar()
        result = factor_slab(family)
        for group in result.groups[:-1]:
            for shading in group.shadings.values():
                assert group.slab.contains_points(shading.centers()).all()

    def test_perpendicular_clusters_split_into_two_groups(self):
        family = _perpendicular_clusters()
        result = factor_slab(family)
        groups = sorted(sorted(g.members.tolist()) for g in result.groups[:2])
        assert groups == [list(range(6)), list(range(6, 12))]
        assert voxel_disjoint(result.groups)
        normals = [np.abs(g.slab.plane_normal) for g in result.groups[:2]]
        assert abs(normals[0] @ normals[1]) < 0.1

    def test_missing_shadings(self):
        family = _planar()
        with pytest.raises(ValidationError):
            factor_slab(family.subset([0, 1]).with_shadings({}))

    def test_rejects_shadings_below_lambda_min(self):
        family = _planar()
        halves = {i: s.restricted(np.arange(len(s)) % 2 == 0) for i, s in family.shadings.items()}
        with pytest.raises(ValidationError, match="lambda_min"):
            factor_slab(family.with_shadings(halves))

    def test_voxel_disjoint_detects_overlap(self):
        family = _planar()
        result = factor_slab(family)
        group = result.groups[0]
        assert not voxel_disjoint([group, group])


class TestBrunnEnvelope:
    """Tests for the Brunn envelope measurement."""

    def test_centered_slab_holds(self):
        U = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.05, 0.2, 0.5), kind="prism")
        report = brunn_envelope(U, [1, 0, 0], 0.0, 0.1)
        assert report.t == pytest.approx(1.0)
        assert report.reach == pytest.approx(0.05)
        assert report.envelope == pytest.approx(1.0)
        assert report.holds

    def test_missing_slab(self):
        U = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.05, 0.2, 0.5), kind="prism")
        with pytest.raises(ValidationError):
            brunn_envelope(U, [1, 0, 0], 1.0, 0.1)


class TestRigidFactor:
    """Tests for randomized rigid factorization."""

    def test_sampled_motions_are_small(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert sample_motion(rng, 0.25).displacement_bound <= 0.25 + 1e-12

    def test_motion_count(self):
        assert motion_count(0.25, 1 / 32, 32) == 2
        assert motion_count(0.05, 1 / 32, 4) == 1
        assert motion_count(1.0, 2**-5, 1) == 2**10

    @pytest.mark.slow
    def test_single_tube_at_unit_scale(self):
        family = TubeFamily([[0.0, 0.0, 0.0]], [[0.0, 0.0, 1.0]], 2**-5)
        result = random_rigid_factor([family], rho=1.0, seed=7)
        assert result.count == 2**10
        assert result.bounds[0]["union"] <= 100.0 * np.log(3.0)

    def test_single_motion_is_identity(self):
        family = _clusters(delta=1 / 32, per_cluster=2)
        result = random_rigid_factor([family], rho=0.05)
        assert result.count == 1
        assert result.rounds == 0
        assert result.motions[0].displacement_bound == pytest.approx(0.0)

    def test_generous_calibration_verifies_first_round(self):
        family = _clusters(delta=1 / 32, per_cluster=2)
        result = random_rigid_factor([family], rho=0.25, seed=3, options={"k_cal": 1e6})
        assert result.count == motion_count(0.25, 1 / 32, 4)
        assert result.rounds == 1
        assert result.bounds[0]["union"] <= result.bounds[0]["limit"]

    def test_tight_calibration_fails(self):
        family = _clusters(delta=1 / 32, per_cluster=2)
        with pytest.raises(StatisticalFailure):
            random_rigid_factor([family], rho=0.25, seed=3, options={"k_cal": 1e-6, "rounds": 2})

    def test_needs_families(self):
        with pytest.raises(ValidationError):
            random_rigid_factor([], rho=0.25)
