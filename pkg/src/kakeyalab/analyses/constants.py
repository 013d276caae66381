"""Wolff-constant analyses: single constants, every-scale axioms, local and two-level checks."""

from typing import Any, Optional

from ..core.errors import ValidationError
from ..core.family import TubeFamily
from ..core.geometry import ConvexBody
from ..core.volumes import InequalityReport, constant
from ..core.wolff import (
    axioms_every_scale,
    family_constant,
    frostman_cardinality_floor,
    frostman_product,
    local_katz_tao,
    slab_cardinality_floor,
    two_level_product,
)
from .base import AnalysisResult, BaseAnalysis, SlabOrTube, all_passed


def planted_prisms(family: Any) -> list:
    prisms = family.metadata.get("planted_prisms")
    if not prisms:
        raise ValidationError("Family has no planted prisms", "Use a prism_clustered family")
    return [ConvexBody.from_dict(P) for P in prisms]


class WolffAnalysis(BaseAnalysis):
    """Katz-Tao or Frostman constant against a cap or an expected power of δ."""

    name = "wolff"
    stage = 0
    sections = ("geometry", "wolff")
    family_types = SlabOrTube
    defaults = {
        "normalization": "katz_tao",
        "kind": "convex",
        "max_constant": None,
        "expect_exponent": None,
        "expect_factor": 8.0,
    }

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        delta = family.delta
        report = family_constant(family.bodies(), delta, p["normalization"], p["kind"], self.options)
        value = report.constant
        checks = []
        rhs, threshold = 0.0, "report only"
        if p["max_constant"] is not None:
            rhs, threshold = float(p["max_constant"]), "lhs <= rhs"
            checks.append(value <= rhs)
        if p["expect_exponent"] is not None:
            target = delta ** float(p["expect_exponent"])
            factor = float(p["expect_factor"])
            rhs, threshold = target, f"rhs / {factor:g} <= lhs <= {factor:g} rhs"
            checks.append(target / factor <= value <= target * factor)
        passed = all_passed(checks)

        details = {"witness_source": report.witness_source, "candidates": report.candidate_count, "members": report.member_count}
        if p["normalization"] == "frostman" and value > 0:
            unit = float(family.bodies().volumes.max())
            floor = slab_cardinality_floor(value, delta) if p["kind"] == "slab" else frostman_cardinality_floor(value, unit)
            details["cardinality_floor"] = floor
            details["cardinality_ok"] = len(family) >= floor * (1 - 1e-9)
        row = InequalityReport(
            f"wolff_{p['normalization']}_{p['kind']}",
            delta,
            value,
            rhs,
            passed,
            threshold=threshold,
            constants={"constant": constant(value, "measured")},
            details={"witness": report.to_dict()["witness"]},
        )
        return self.result(passed, [row], details)


class EveryScaleAnalysis(BaseAnalysis):
    """Wolff axioms at every dyadic scale."""

    name = "every_scale"
    stage = 0
    sections = ("geometry", "wolff")
    defaults = {"K": 100.0, "variant": "katz_tao"}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        K = float(self.params["K"])
        report = axioms_every_scale(family, K, self.params["variant"], options=self.options)
        worst = max(s.constant for s in report.per_scale)
        row = InequalityReport(
            f"every_scale_{report.variant}",
            family.delta,
            worst,
            K,
            report.passed,
            threshold="lhs <= rhs at every scale",
            constants={"K": constant(K, "config")},
        )
        return self.result(report.passed, [row], {"scales": report.to_dict()["per_scale"], "failing": report.failing_scales()})


class LocalKatzTaoAnalysis(BaseAnalysis):
    """Local Katz-Tao constant of the planted prisms."""

    name = "local_katz_tao"
    stage = 0
    sections = ("geometry", "wolff")
    defaults = {"max_constant": None}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        report = local_katz_tao(planted_prisms(family), self.options)
        cap: Optional[float] = self.params["max_constant"]
        passed = None if cap is None else report.constant <= float(cap)
        row = InequalityReport(
            "local_katz_tao",
            family.delta,
            report.constant,
            float(cap) if cap is not None else 0.0,
            passed,
            threshold="lhs <= rhs" if cap is not None else "report only",
            constants={"constant": constant(report.constant, "measured")},
        )
        return self.result(passed, [row], report.details)


class SubmultiplicativeAnalysis(BaseAnalysis):
    """Two-level product bounds for the Katz-Tao and Frostman constants over a planted cover."""

    name = "submultiplicative"
    stage = 0
    sections = ("geometry", "wolff")
    defaults = {"level": 0}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        if not family.covers:
            raise ValidationError("Family has no planted cover", "Use a two_level or sticky family")
        index = int(self.params["level"])
        if not 0 <= index < len(family.covers):
            raise ValidationError(f"Cover level {index} out of range [0, {len(family.covers)})")
        level = family.covers[index]
        katz_tao = two_level_product(family, level, self.options)
        frostman = frostman_product(family.bodies(), level, family.delta, self.options)
        rows = [
            InequalityReport(
                f"submultiplicative_{name}",
                family.delta,
                data["total"],
                data["bound"],
                data["holds"],
                threshold="lhs <= rhs",
                constants={"factor": constant(64.0, "calibrated")},
                details=data,
            )
            for name, data in (("katz_tao", katz_tao), ("frostman", frostman))
        ]
        return self.result(katz_tao["holds"] and frostman["holds"], rows, {"scale": level.scale})
