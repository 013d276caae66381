"""Tests for union volumes and the volume inequalities."""

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from kakeyalab.core.errors import ValidationError
from kakeyalab.core.experiment import increasing_with_slack
from kakeyalab.core.family import TubeFamily
from kakeyalab.core.generators import generate_family
from kakeyalab.core.geometry import ConvexBody, DeltaTube
from kakeyalab.core.volumes import (
    InequalityReport,
    KakeyaEstimateParams,
    besicovitch_gain,
    cordoba_check,
    d_quantity,
    doubling_ratio,
    hairbrush_check,
    kakeya_bound_report,
    l2_union_bound,
    long_end_exit,
    tangency_experiment,
    tangency_stats,
    theta_min_at,
    union_volume,
)
from kakeyalab.core.voxels import Shading, VoxelGrid, voxelize

DELTA = 1 / 8


@pytest.fixture
def grid():
    return VoxelGrid.for_delta(DELTA, 2.0)


@pytest.fixture
def shaded_pair(grid):
    family = TubeFamily([[0, 0, 0], [0.05, 0, 0]], [[0, 0, 1], [0, 0.3, 1]], DELTA)
    return family.with_shadings(family.full_shadings(grid))


def _planks(angle, grid):
    rotated = Rotation.from_rotvec([0, 0, angle]).as_matrix()
    prisms = [
        ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.05, 0.2, 0.5), kind="prism"),
        ConvexBody(center=[0, 0, 0], axes=rotated.T, dims=(0.05, 0.2, 0.5), kind="prism"),
    ]
    return prisms, [voxelize(P, grid, i) for i, P in enumerate(prisms)]


class TestInequalityReport:
    """Tests for the report record."""

    def test_ratio_and_row(self):
        report = InequalityReport(
            "demo",
            0.125,
            2.0,
            4.0,
            False,
            constants={"m": {"value": 1.0, "source": "measured"}, "kappa": {"value": 0.01, "source": "config"}},
        )
        assert report.ratio == pytest.approx(0.5)
        assert report.provenance() == "kappa=config;m=measured"
        row = report.to_row()
        assert row["name"] == "demo"
        assert row["passed"] is False

    def test_zero_rhs(self):
        assert InequalityReport("demo", 0.125, 1.0, 0.0, True).ratio == math.inf


@pytest.mark.parametrize(
    "kwargs", [{"sigma": 0.7}, {"omega": -0.1}, {"epsilon": -1.0}, {"kappa": 0.0}, {"eta": -1.0}]
)
def test_estimate_params_validation(kwargs):
    with pytest.raises(ValidationError):
        KakeyaEstimateParams(**kwargs)


class TestUnionVolume:
    """Tests for exact grid union volumes."""

    def test_duplicate_shadings(self, grid):
        Y = voxelize(DeltaTube([0, 0, 0], [0, 0, 1], DELTA), grid)
        measured = union_volume([Y, Y])
        assert measured.voxels == len(Y)
        assert measured.volume == pytest.approx(Y.measure())
        assert measured.mass == pytest.approx(2 * Y.measure())

    def test_empty(self):
        assert union_volume([]).volume == 0.0

    def test_family_without_shadings(self):
        with pytest.raises(ValidationError):
            union_volume(TubeFamily([[0, 0, 0]], [[0, 0, 1]], DELTA))

    def test_l2_bound_below_union(self, shaded_pair):
        shadings = shaded_pair.shading_list()
        assert l2_union_bound(shadings) <= union_volume(shadings).volume * (1 + 1e-12)


class TestCordoba:
    """Tests for the slab union inequality."""

    def test_parallel_slabs_pass(self, grid):
        slab = ConvexBody.slab([0, 0, 1], 0.0, DELTA)
        shadings = [voxelize(slab, grid, i) for i in range(4)]
        report = cordoba_check([slab] * 4, shadings, lam=1.0, m=1.0)
        assert report.passed
        assert report.constants["m"]["source"] == "config"
        assert report.details["l2_bound"] <= report.lhs * (1 + 1e-12)

    def test_measured_constants(self, grid):
        slabs = [ConvexBody.slab([0, 0, 1], z, DELTA) for z in (-0.5, 0.0, 0.5)]
        shadings = [voxelize(S, grid, i) for i, S in enumerate(slabs)]
        report = cordoba_check(slabs, shadings)
        assert report.constants["lambda"]["source"] == "measured"
        assert report.constants["m"]["value"] >= 1.0

    def test_rejects_mismatched_input(self, grid):
        thin = ConvexBody.slab([0, 0, 1], 0.0, DELTA)
        thick = ConvexBody.slab([0, 0, 1], 0.0, 2 * DELTA)
        with pytest.raises(ValidationError):
            cordoba_check([thin, thick], [voxelize(thin, grid), voxelize(thick, grid)])
        with pytest.raises(ValidationError):
            cordoba_check([thin], [])
        with pytest.raises(ValidationError):
            cordoba_check([], [])


class TestKakeyaBounds:
    """Tests for the report-only volume assertions."""

    def test_flavor_d_formula(self, shaded_pair):
        params = KakeyaEstimateParams(sigma=0.0, omega=0.0, epsilon=0.5, kappa=0.01)
        report = kakeya_bound_report(shaded_pair, params, "D", m=1.0, ell=1.0)
        assert report.passed is None
        assert report.threshold == "report only"
        assert report.rhs == pytest.approx(0.01 * DELTA**0.5 * shaded_pair.total_volume())

    def test_flavor_e_divides_by_m(self, shaded_pair):
        params = KakeyaEstimateParams(sigma=0.0, epsilon=0.0)
        d = kakeya_bound_report(shaded_pair, params, "D", m=2.0, ell=1.0)
        e = kakeya_bound_report(shaded_pair, params, "E", m=2.0, ell=1.0)
        assert e.rhs == pytest.approx(d.rhs / 2.0)

    def test_flavor_f_on_prisms(self, grid):
        prisms, shadings = _planks(0.3, grid)
        report = kakeya_bound_report(prisms, KakeyaEstimateParams(), "F", shadings=shadings, m=1.0, ell=1.0)
        assert report.name == "kakeya_F"
        assert "D" in report.constants

    def test_invalid_requests(self, shaded_pair, grid):
        with pytest.raises(ValidationError):
            kakeya_bound_report(shaded_pair, KakeyaEstimateParams(), "G")
        with pytest.raises(ValidationError):
            kakeya_bound_report(shaded_pair, KakeyaEstimateParams(), "F")
        prisms, _ = _planks(0.3, grid)
        with pytest.raises(ValidationError):
            kakeya_bound_report(prisms, KakeyaEstimateParams(), "F")


def test_d_quantity_of_planks_packed_in_a_wide_tube():
    a, b = 1 / 32, 1 / 8
    offsets = np.array(
        [
            [x, y, z]
            for x in (-1.5 * a, -0.5 * a, 0.5 * a, 1.5 * a)
            for y in (-b / 2, -b / 6, b / 6, b / 2)
            for z in (-b / 2, -b / 6, b / 6, b / 2)
        ]
    )
    prisms = [ConvexBody(center=c, axes=np.eye(3), dims=(a, b, 0.5), kind="prism") for c in offsets]
    result = d_quantity(prisms)
    assert a <= result["rho"] <= b
    assert (b / a) ** 0.5 / 4 <= result["D"] <= 4 * (b / a) ** 0.5


@pytest.mark.slow
def test_bush_union_volume_matches_monte_carlo():
    family = generate_family({"kind": "bush", "delta": 2**-6, "seed": 3, "params": {"count": 100}})
    family = family.with_shadings(family.full_shadings(VoxelGrid.for_delta(family.delta)))
    rng = np.random.default_rng(0)
    points = rng.uniform(-1.0, 1.0, size=(1_000_000, 3))
    hit = np.zeros(len(points), dtype=bool)
    for tube in family:
        hit |= tube.as_body().contains_points(points)
    estimate = 8.0 * hit.mean()
    assert union_volume(family).volume == pytest.approx(estimate, rel=0.05)


class TestHairbrush:
    """Tests for the hairbrush union bound."""

    def test_hypotheses_met(self, shaded_pair):
        report = hairbrush_check(shaded_pair, m=1.0, ell=1.0)
        assert report.details["hypotheses"]
        assert report.passed == (report.lhs >= report.rhs)

    def test_hypotheses_unmet(self, shaded_pair):
        report = hairbrush_check(shaded_pair, m=100.0, ell=1.0)
        assert report.passed is None
        assert report.threshold == "hypotheses unmet"


class TestDoubling:
    """Tests for the doubling ratio."""

    def test_single_tube_ratio_near_one(self, grid):
        family = TubeFamily([[0, 0, 0]], [[0, 0, 1]], DELTA)
        family = family.with_shadings(family.full_shadings(grid))
        report = doubling_ratio(family, R=2.0)
        assert report.ratio == pytest.approx(1.0, rel=0.2)
        assert report.passed
        assert report.details["gain"] == pytest.approx(besicovitch_gain(DELTA))

    def test_rejects_contraction(self, shaded_pair):
        with pytest.raises(ValidationError):
            doubling_ratio(shaded_pair, R=0.5)

    def test_reports_union_gain(self, shaded_pair):
        report = doubling_ratio(shaded_pair, R=2.0)
        base = union_volume(shaded_pair).volume
        assert report.details["union_gain"] == pytest.approx(report.lhs / base)
        assert report.details["union_gain"] == pytest.approx(8.0 * report.ratio)

    @pytest.mark.slow
    def test_besicovitch_ratio_grows_as_delta_shrinks(self):
        ratios = {}
        for k in range(4, 10):
            family = generate_family({"kind": "besicovitch", "delta": 2.0**-k})
            family = family.with_shadings(family.full_shadings(VoxelGrid.for_delta(family.delta, 2.0)))
            ratios[k] = doubling_ratio(family, R=2.0)
        assert increasing_with_slack([ratios[k].ratio for k in range(4, 10)])
        fine = ratios[8]
        assert 1.0 < fine.ratio <= 2.0**4
        assert fine.details["union_gain"] > 2.0


def test_besicovitch_gain():
    delta = math.exp(-math.e**2)
    assert besicovitch_gain(delta) == pytest.approx(math.e**2 / 2)
    with pytest.raises(ValidationError):
        besicovitch_gain(0.5)


class TestTangency:
    """Tests for tangency statistics and the tangency experiment."""

    def test_long_end_exit(self):
        P = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.05, 0.1, 0.5), kind="prism")
        assert long_end_exit(DeltaTube([0, 0, 0], [0, 0, 1], DELTA), P)
        assert not long_end_exit(DeltaTube([0, 0, 0], [1, 0, 0], DELTA), P)

    def test_stats(self, grid):
        prisms, shadings = _planks(0.3, grid)
        stats = tangency_stats(prisms, shadings, tubes=[DeltaTube([0, 0, 0], [0, 0, 1], DELTA)])
        assert stats.theta_min == pytest.approx(0.25)
        assert sum(stats.histogram["counts"]) == stats.occupied
        assert max(stats.histogram["edges"]) == pytest.approx(0.25 + 0.3)
        assert stats.long_end_exit.shape == (1, 2)

    def test_stats_require_congruent_prisms(self, grid):
        prisms, shadings = _planks(0.3, grid)
        prisms[1] = ConvexBody(center=[0, 0, 0], axes=np.eye(3), dims=(0.1, 0.2, 0.5), kind="prism")
        with pytest.raises(ValidationError):
            tangency_stats(prisms, shadings)

    def test_experiment(self, grid):
        prisms, shadings = _planks(0.3, grid)
        report = tangency_experiment(prisms, shadings, lam=1.0)
        assert report.details["theta_min"] == pytest.approx(0.25)
        assert report.lhs > 0
        assert report.passed

    def test_experiment_rejects_bad_arguments(self, grid):
        prisms, shadings = _planks(0.3, grid)
        with pytest.raises(ValidationError):
            tangency_experiment(prisms, shadings, lam=0.0)
        with pytest.raises(ValidationError):
            tangency_experiment(prisms, shadings, lam=0.5, theta=2.0)

    def test_crossing_at_quarter_turn(self, grid):
        prisms, shadings = _planks(math.pi / 4, grid)
        assert tangency_stats(prisms, shadings).theta_min == pytest.approx(0.25)
        shared = np.intersect1d(shadings[0].voxels, shadings[1].voxels)
        assert len(shared) > 0
        crossing = [Shading(i, shared, grid) for i in range(2)]
        assert tangency_stats(prisms, crossing).theta_min == pytest.approx(0.25 + math.pi / 4)
        assert theta_min_at(prisms, crossing) == pytest.approx(0.25 + math.pi / 4)
