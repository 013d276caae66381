"""Broadness analyses on random direction sets and on shaded families."""

from typing import List

import numpy as np

from ..core.broadness import (
    BroadnessParams,
    DirectionMultiset,
    across_scales,
    find_broad_pieces,
    find_broad_scale,
    line_angles,
    regularity_violations,
    regularize_shading,
    union_is_broad,
)
from ..core.candidates import hemisphere_net
from ..core.errors import ContractViolation
from ..core.family import TubeFamily
from ..core.geometry import normalize
from ..core.volumes import InequalityReport, constant
from .base import AnalysisResult, BaseAnalysis


def _random_axis(rng: np.random.Generator) -> np.ndarray:
    v = normalize(rng.normal(size=3))
    return v if v[2] >= 0 else -v


def clustered_directions(rng: np.random.Generator, delta: float) -> DirectionMultiset:
    """δ-separated directions from a hemisphere net, kept inside 1-4 random caps."""
    net = hemisphere_net(2.0 * delta)
    keep = np.zeros(len(net), dtype=bool)
    for _ in range(int(rng.integers(1, 5))):
        radius = rng.uniform(4.0 * delta, 0.8)
        keep |= line_angles(net, _random_axis(rng)) <= radius
    return DirectionMultiset(net[keep] if keep.any() else net)


def cap_subsets(rng: np.random.Generator, delta: float, center: np.ndarray, radius: float, pieces: int) -> List[DirectionMultiset]:
    """Random sub-multisets of the net points in one cap."""
    net = hemisphere_net(2.0 * delta)
    inside = net[line_angles(net, center) <= radius]
    out = []
    for _ in range(pieces):
        take = rng.random(len(inside)) < rng.uniform(0.2, 0.9)
        if not take.any():
            take[0] = True
        out.append(DirectionMultiset(inside[take], (center, radius)))
    return out


class BroadPiecesAnalysis(BaseAnalysis):
    """find_broad_pieces on random direction sets, plus union and across-scales constructions."""

    name = "broad_pieces"
    stage = 0
    sections = ("broadness",)
    needs_family = False
    defaults = {"trials": 30, "constructions": 30, "delta": 2.0**-5}

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        delta = float(p["delta"])
        beta = float(self.options.get("beta", 0.05))
        K = float(self.options.get("K", 100.0))
        params = BroadnessParams(beta=beta, delta=delta, K=K)

        piece_failures = []
        for t in range(int(p["trials"])):
            rng = np.random.default_rng([seed, 0, t])
            pieces = find_broad_pieces(clustered_directions(rng, delta), delta, beta, K)
            checks = pieces.checks
            if not (checks["piece_sizes"] and checks["pieces_broad"] and checks["union_ok"]):
                piece_failures.append({"trial": t, "rho": pieces.rho, **checks})

        union_failures, scale_failures = [], []
        for t in range(int(p["constructions"])):
            rng = np.random.default_rng([seed, 1, t])
            cap = (_random_axis(rng), rng.uniform(0.25, 1.0))
            outcome = union_is_broad(cap_subsets(rng, delta, cap[0], cap[1], int(rng.integers(2, 5))), cap, params)
            if not outcome["holds"]:
                union_failures.append({"construction": t, **outcome})

            rho = float(2.0 ** -int(rng.integers(2, 4)))
            centers = hemisphere_net(2.0 * rho)
            centers = centers[rng.random(len(centers)) < 0.5] if len(centers) > 1 else centers
            if len(centers) == 0:
                centers = hemisphere_net(2.0 * rho)[:1]
            subs = [cap_subsets(rng, delta, c, rho, 1)[0] for c in centers]
            outcome = across_scales(DirectionMultiset(centers), subs, rho, delta, beta)
            if not outcome["holds"]:
                scale_failures.append({"construction": t, "rho": rho, **outcome})

        details = {
            "pieces": {"trials": int(p["trials"]), "failures": piece_failures},
            "union": {"constructions": int(p["constructions"]), "failures": union_failures},
            "across_scales": {"constructions": int(p["constructions"]), "failures": scale_failures},
        }
        passed = not (piece_failures or union_failures or scale_failures)
        return self.result(passed, details=details)


class BroadScaleAnalysis(BaseAnalysis):
    """find_broad_scale on a shaded family."""

    name = "broad_scale"
    stage = 2
    sections = ("broadness",)
    needs_shading = True
    defaults = {"omega": 1.0, "max_covers": 256}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        K = float(self.options.get("K", 100.0))
        floor = float(self.options.get("certificate_floor", 1.0))
        result = find_broad_scale(
            family,
            omega=float(self.params["omega"]),
            beta=float(self.options.get("beta", 0.05)),
            K=K,
            max_covers=int(self.params["max_covers"]),
            certificate_floor=floor,
        )
        branch_b = result.branch == "B"
        row = InequalityReport(
            f"broad_scale_{result.branch}",
            family.delta,
            result.needed if branch_b else result.certificate,
            K if branch_b else floor,
            result.passed,
            threshold="lhs <= rhs and cover balanced" if branch_b else "lhs >= rhs",
            constants={
                "K": constant(K, "calibrated"),
                "omega": constant(self.params["omega"], "config"),
                "certificate_floor": constant(floor, "calibrated"),
            },
        )
        return self.result(result.passed, [row], result.to_dict())


class RegularityAnalysis(BaseAnalysis):
    """Regular sub-shadings: how much of each shading survives regularization."""

    name = "regularity"
    stage = 2
    needs_shading = True
    defaults = {"max_bodies": 32, "min_kept": 0.5}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        ids = sorted(family.shadings)
        if len(ids) > int(self.params["max_bodies"]):
            rng = np.random.default_rng(seed)
            ids = sorted(rng.choice(ids, size=int(self.params["max_bodies"]), replace=False).tolist())
        kept, initially_regular, violations = [], 0, []
        for i in ids:
            tube, shading = family[i], family.shadings[i]
            initially_regular += not regularity_violations(tube, shading, family.delta).any()
            try:
                regular = regularize_shading(tube, shading, family.delta)
            except ContractViolation as e:
                violations.append({"body": int(i), "message": e.message})
                kept.append(0.0)
                continue
            kept.append(len(regular) / max(len(shading), 1))
        floor = float(self.params["min_kept"])
        worst = min(kept) if kept else 1.0
        passed = not violations and worst >= floor
        details = {
            "bodies": ids,
            "kept_fraction": kept,
            "initially_regular": initially_regular,
            "violations": violations,
        }
        row = InequalityReport(
            "regularity_kept",
            family.delta,
            worst,
            floor,
            passed,
            constants={"min_kept": constant(floor, "config")},
        )
        return self.result(passed, [row], details)
