"""Volume analyses: union volume, Cordoba, Kakeya bounds, hairbrush, doubling, tangency."""

import math
from typing import List, Sequence, Tuple

import numpy as np

from ..core.broadness import regularize_shading
from ..core.generators import SlabFamily, shade_body
from ..core.geometry import ConvexBody
from ..core.volumes import (
    FLAVORS,
    InequalityReport,
    KakeyaEstimateParams,
    constant,
    cordoba_check,
    doubling_ratio,
    hairbrush_check,
    kakeya_bound_report,
    l2_union_bound,
    tangency_experiment,
    tangency_stats,
    union_volume,
)
from ..core.voxels import Shading, VoxelGrid
from ..core.errors import ValidationError
from .base import AnalysisResult, BaseAnalysis, SlabOrTube
from .constants import planted_prisms


class UnionVolumeAnalysis(BaseAnalysis):
    """|∪Y| with its Cauchy-Schwarz lower bound (report only)."""

    name = "union_volume"
    family_types = SlabOrTube
    needs_shading = True

    def run(self, family, seed: int) -> AnalysisResult:
        shadings = family.shading_list()
        measured = union_volume(shadings)
        bound = l2_union_bound(shadings)
        row = InequalityReport(
            "union_volume",
            family.delta,
            measured.volume,
            bound,
            None,
            threshold="report only",
            details=measured.to_dict(),
        )
        return self.result(None, [row], {"union": measured.to_dict(), "l2_bound": bound})


def pairwise_l2_bound(shadings: Sequence[Shading]) -> float:
    """(Σ|Y|)² / Σ_{Y,Y'} |Y ∩ Y'| from explicit pairwise intersections."""
    if not shadings:
        return 0.0
    h3 = shadings[0].grid.cell_volume
    overlap = 0
    for i, Y in enumerate(shadings):
        overlap += len(Y)
        for Z in shadings[i + 1 :]:
            overlap += 2 * len(np.intersect1d(Y.voxels, Z.voxels, assume_unique=True))
    if overlap == 0:
        return 0.0
    mass = h3 * sum(len(Y) for Y in shadings)
    return float(mass**2 / (h3 * overlap))


class CordobaAnalysis(BaseAnalysis):
    """Cordoba lower bound for congruent slabs, cross-checked by a pairwise L² oracle."""

    name = "cordoba"
    sections = ("geometry", "wolff", "volumes")
    family_types = (SlabFamily,)
    needs_shading = True
    defaults = {"lam": None, "m": None, "oracle_factor": 2.0}

    def run(self, family: SlabFamily, seed: int) -> AnalysisResult:
        p = self.params
        shadings = family.shading_list()
        report = cordoba_check(family.slabs, shadings, p["lam"], p["m"], self.options)
        oracle = pairwise_l2_bound(shadings)
        l2 = float(report.details["l2_bound"])
        factor = float(p["oracle_factor"])
        agrees = l2 > 0 and l2 / factor <= oracle <= l2 * factor
        chain = l2 <= report.lhs * (1 + 1e-9)
        details = {"oracle": oracle, "l2_bound": l2, "oracle_agrees": agrees, "chain_holds": chain}
        return self.result(bool(report.passed) and agrees and chain, [report], details)


class KakeyaAnalysis(BaseAnalysis):
    """Right-hand sides of the D/E/F assertions against |∪Y| (report only)."""

    name = "kakeya"
    sections = ("geometry", "wolff", "volumes")
    needs_shading = True
    defaults = {
        "flavors": ["D", "E"],
        "sigma": 0.0,
        "omega": 0.0,
        "epsilon": 0.1,
        "kappa": 0.01,
        "eta": 0.1,
        "m": None,
        "ell": None,
    }

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        unknown = set(p["flavors"]) - set(FLAVORS)
        if unknown:
            raise ValidationError(f"Unknown flavors {sorted(unknown)}. Available: {list(FLAVORS)}")
        params = KakeyaEstimateParams(p["sigma"], p["omega"], p["epsilon"], p["kappa"], p["eta"])
        reports = []
        for flavor in p["flavors"]:
            if flavor == "F":
                prisms = planted_prisms(family)
                grid = family.grid
                shadings = [shade_body(P, grid, i, "full", 1.0, seed) for i, P in enumerate(prisms)]
                reports.append(kakeya_bound_report(prisms, params, "F", shadings, p["m"], p["ell"], self.options))
            else:
                reports.append(kakeya_bound_report(family, params, flavor, None, p["m"], p["ell"], self.options))
        return self.result(None, reports)


class HairbrushAnalysis(BaseAnalysis):
    """|∪Y| ≥ κ δ^{3/2+ε} (#𝕋)^{1/2}, gated only when the Wolff hypotheses hold unless forced."""

    name = "hairbrush"
    sections = ("geometry", "wolff", "volumes")
    needs_shading = True
    defaults = {"m": None, "ell": None, "force": False}

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        report = hairbrush_check(family, p["m"], p["ell"], self.options)
        passed = report.passed
        if passed is None and p["force"]:
            passed = report.lhs >= report.rhs
        return self.result(passed, [report], {"hypotheses": report.details["hypotheses"]})


class DoublingAnalysis(BaseAnalysis):
    """|∪T_R| / (R³|∪Y|) against δ^{-ε}; `min_ratio` also demands a Besicovitch excess."""

    name = "doubling"
    sections = ("volumes",)
    needs_shading = True
    defaults = {"R": 2.0, "min_ratio": None}

    def run(self, family, seed: int) -> AnalysisResult:
        report = doubling_ratio(family, float(self.params["R"]), self.options)
        passed = report.passed
        floor = self.params["min_ratio"]
        if floor is not None:
            passed = passed and report.ratio > float(floor)
        summary = {"gain": report.details["gain"], "union_gain": report.details["union_gain"]}
        return self.result(passed, [report], summary)


def transversal_bush(delta: float, count: int, aspect: float, half_length: float) -> List[ConvexBody]:
    """Congruent planks sharing the z-axis, with plane normals spread evenly over [0, π)."""
    prisms = []
    for k in range(count):
        phi = math.pi * k / count
        normal = np.array([math.cos(phi), math.sin(phi), 0.0])
        wide = np.array([-math.sin(phi), math.cos(phi), 0.0])
        prisms.append(ConvexBody(np.zeros(3), np.vstack([normal, wide, [0.0, 0.0, 1.0]]), (delta, aspect * delta, half_length)))
    return prisms


def regular_shadings(
    prisms: Sequence[ConvexBody], grid: VoxelGrid, lam: float, seed: int
) -> Tuple[List[Shading], List[float]]:
    """λ-thinned shadings of each prism, cut down to regular sub-shadings."""
    shadings, kept = [], []
    for i, P in enumerate(prisms):
        thinned = shade_body(P, grid, i, "random", lam, seed)
        regular = regularize_shading(P, thinned, float(P.dims[0]))
        shadings.append(regular)
        kept.append(len(regular) / max(len(thinned), 1))
    return shadings, kept


class TangencyAnalysis(BaseAnalysis):
    """Neighbourhood mass of the first plank in a transversal bush."""

    name = "tangency"
    sections = ("volumes",)
    needs_family = False
    defaults = {"delta": 2.0**-5, "prisms": 8, "aspect": 8.0, "half_length": 0.5, "lam": 0.5, "cells_per_delta": 4.0}

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        delta = float(p["delta"])
        prisms = transversal_bush(delta, int(p["prisms"]), float(p["aspect"]), float(p["half_length"]))
        grid = VoxelGrid.for_delta(delta, float(p["cells_per_delta"]))
        shadings, kept = regular_shadings(prisms, grid, float(p["lam"]), seed)
        report = tangency_experiment(prisms, shadings, float(p["lam"]), 0, None, self.options)
        stats = tangency_stats(prisms, shadings)
        details = {"kept_fraction": kept, "histogram": stats.histogram, "theta_min": stats.theta_min}
        report.constants["aspect"] = constant(p["aspect"], "config")
        return self.result(report.passed, [report], details)
