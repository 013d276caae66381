"""Factoring analyses: graph pruning, convex and slab factoring, Brunn envelopes, rigid motions."""

from itertools import product
from typing import List, Sequence, Set, Tuple

import numpy as np
from scipy.spatial.transform import Rotation
from scipy.stats import binom

from ..core.errors import ContractViolation, StatisticalFailure, ValidationError
from ..core.factoring import (
    BipartiteGraph,
    brunn_envelope,
    factor_convex,
    factor_slab,
    prune_bipartite,
    random_rigid_factor,
    voxel_disjoint,
)
from ..core.family import TubeFamily
from ..core.generators import generate_family
from ..core.geometry import ConvexBody, normalize
from ..core.volumes import InequalityReport, constant
from .base import AnalysisResult, BaseAnalysis
from .constants import planted_prisms


def random_bipartite(rng: np.random.Generator, total: int) -> BipartiteGraph:
    left = int(rng.integers(1, total))
    right = total - left
    mask = rng.random((left, right)) < rng.uniform(0.05, 0.6)
    if not mask.any():
        mask[rng.integers(left), rng.integers(right)] = True
    return BipartiteGraph(left, right, np.argwhere(mask))


def largest_core(graph: BipartiteGraph) -> Tuple[Set[int], Set[int]]:
    """Union of every vertex set whose induced subgraph meets both degree floors.

    Exhaustive over all subsets; only for small graphs.
    """
    total = graph.edge_count
    left_floor = total / (4.0 * graph.left_count)
    right_floor = total / (4.0 * graph.right_count)
    vertices = [("L", i) for i in range(graph.left_count)] + [("R", j) for j in range(graph.right_count)]
    edges = [(("L", int(i)), ("R", int(j))) for i, j in graph.edges]
    union: Set[tuple] = set()
    for bits in product((False, True), repeat=len(vertices)):
        chosen = {v for v, keep in zip(vertices, bits) if keep}
        if not chosen:
            continue
        degree = {v: 0 for v in chosen}
        for u, w in edges:
            if u in chosen and w in chosen:
                degree[u] += 1
                degree[w] += 1
        if all(degree[v] >= (left_floor if v[0] == "L" else right_floor) for v in chosen):
            union |= chosen
    return {i for side, i in union if side == "L"}, {j for side, j in union if side == "R"}


def check_pruning(graph: BipartiteGraph, brute_max: int) -> dict:
    """Edge retention, degree floors and inducedness of the pruned graph."""
    try:
        pruned = prune_bipartite(graph)
    except ContractViolation as e:
        return {"ok": False, "reason": e.message}
    total = graph.edge_count
    left, right = set(pruned.left_kept.tolist()), set(pruned.right_kept.tolist())
    induced = {(int(i), int(j)) for i, j in graph.edges if int(i) in left and int(j) in right}
    kept_edges = {(int(i), int(j)) for i, j in pruned.edges}
    left_deg, right_deg = pruned.left_degrees(), pruned.right_degrees()
    checks = {
        "edges": 2 * pruned.edge_count >= total,
        "left_degree": all(4 * graph.left_count * left_deg[i] >= total for i in left),
        "right_degree": all(4 * graph.right_count * right_deg[j] >= total for j in right),
        "induced": kept_edges == induced,
    }
    if graph.left_count + graph.right_count <= brute_max:
        checks["maximal"] = (left, right) == largest_core(graph)
    return {"ok": all(checks.values()), **checks}


class PruningAnalysis(BaseAnalysis):
    """Bipartite pruning on random graphs, with exhaustive checks on the small ones."""

    name = "pruning"
    stage = 1
    needs_family = False
    defaults = {"trials": 100, "max_vertices": 200, "brute_max": 12}

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        failures, brute = [], 0
        for t in range(int(p["trials"])):
            rng = np.random.default_rng([seed, t])
            top = int(p["brute_max"]) if t % 4 == 0 else int(p["max_vertices"])
            graph = random_bipartite(rng, int(rng.integers(2, top + 1)))
            outcome = check_pruning(graph, int(p["brute_max"]))
            brute += "maximal" in outcome
            if not outcome["ok"]:
                failures.append({"trial": t, **outcome})
        return self.result(not failures, details={"trials": int(p["trials"]), "exhaustive": brute, "failures": failures})


def recovered_prisms(planted: Sequence[ConvexBody], covers: Sequence[ConvexBody], factor: float) -> List[int]:
    """Planted prisms matched by a cover with nearby center and every dimension within `factor`."""
    found = []
    for i, P in enumerate(planted):
        for W in covers:
            near = np.linalg.norm(W.center - P.center) <= P.dims[1] + W.dims[1]
            if near and np.all(W.dims <= factor * P.dims) and np.all(P.dims <= factor * W.dims):
                found.append(i)
                break
    return found


class ConvexFactoringAnalysis(BaseAnalysis):
    """factor_convex with achieved K and planted-prism recovery."""

    name = "factor_convex"
    stage = 1
    sections = ("geometry", "wolff", "factoring")
    defaults = {"k_max": 100.0, "min_recovered": None, "dims_factor": 4.0}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        p = self.params
        result = factor_convex(family, family.delta, self.options)
        rows = [
            InequalityReport(
                "factor_convex",
                family.delta,
                result.achieved_K,
                float(p["k_max"]),
                result.achieved_K <= float(p["k_max"]),
                threshold="lhs <= rhs",
                constants={"k_max": constant(p["k_max"], "config")},
            )
        ]
        details = {
            "kept": len(result.kept),
            "covers": len(result.covers),
            "conclusions": {name: entry["value"] for name, entry in result.conclusions.items()},
        }
        passed = rows[0].passed
        if family.metadata.get("planted_prisms"):
            planted = planted_prisms(family)
            found = recovered_prisms(planted, result.covers, float(p["dims_factor"]))
            details["recovered"] = found
            minimum = p["min_recovered"] if p["min_recovered"] is not None else len(planted)
            passed = passed and len(found) >= int(minimum)
            details["min_recovered"] = int(minimum)
        return self.result(passed, rows, details)


class SlabFactoringAnalysis(BaseAnalysis):
    """factor_slab: disjoint groups, mass retention and per-group Frostman slab constants."""

    name = "factor_slab"
    stage = 1
    sections = ("geometry", "wolff", "slab_factoring")
    needs_shading = True
    defaults = {"retention_floor": 0.05, "frostman_factor": 10.0}

    def run(self, family: TubeFamily, seed: int) -> AnalysisResult:
        p = self.params
        result = factor_slab(family, self.options)
        disjoint = voxel_disjoint(result.groups)
        factor = float(p["frostman_factor"])
        group_ok = [g.frostman_slab <= factor / g.thickness for g in result.groups]
        floor = float(p["retention_floor"])
        row = InequalityReport(
            "slab_retention",
            family.delta,
            result.retention,
            floor,
            result.retention >= floor,
            constants={"floor": constant(floor, "config"), "lambda": constant(result.lam, "measured")},
        )
        passed = disjoint and all(group_ok) and bool(row.passed)
        details = {
            "groups": len(result.groups),
            "disjoint": disjoint,
            "group_frostman_ok": group_ok,
            "internal_floor": result.floor,
            "factoring": result.to_dict(),
        }
        return self.result(passed, [row], details)


def random_body_and_slab(rng: np.random.Generator, delta: float, kind: str) -> Tuple[ConvexBody, np.ndarray, float, float]:
    """A random prism or ellipsoid with a slab N_s(H) through one of its interior points."""
    a = rng.uniform(delta, 4.0 * delta)
    b = rng.uniform(a, 0.5)
    c = rng.uniform(b, 1.0)
    axes = Rotation.random(random_state=rng).as_matrix()
    U = ConvexBody(0.3 * (2.0 * rng.random(3) - 1.0), axes, (a, b, c), kind)
    normal = normalize(rng.normal(size=3))
    s = rng.uniform(delta, 0.25)
    local = (2.0 * rng.random(3) - 1.0) * U.dims * (0.5 if kind == "ellipsoid" else 1.0)
    offset = float((U.center + local @ U.axes) @ normal)
    return U, normal, offset, s


class BrunnAnalysis(BaseAnalysis):
    """Envelope containment U ⊂ N_{K₃s/t}(H) on random body/slab pairs."""

    name = "brunn"
    stage = 1
    sections = ("factoring",)
    needs_family = False
    defaults = {"trials": 1000, "delta": 2.0**-5, "max_voxels": 200_000}

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        K3 = float(self.options.get("k3", 10.0))
        failures, skipped, worst = [], 0, 0.0
        for t in range(int(p["trials"])):
            rng = np.random.default_rng([seed, t])
            U, normal, offset, s = random_body_and_slab(rng, float(p["delta"]), "prism" if t % 2 == 0 else "ellipsoid")
            try:
                report = brunn_envelope(U, normal, offset, s, K3, int(p["max_voxels"]))
            except ValidationError:
                skipped += 1
                continue
            worst = max(worst, report.reach / report.envelope)
            if not report.holds:
                failures.append({"trial": t, **report.to_dict()})
        details = {"trials": int(p["trials"]), "skipped": skipped, "worst_fraction": worst, "failures": failures}
        return self.result(not failures, details=details)


class RigidAnalysis(BaseAnalysis):
    """Repeated randomized rigid factorization with a binomial success gate."""

    name = "rigid"
    stage = 1
    sections = ("geometry", "wolff", "rigid")
    needs_family = False
    defaults = {
        "trials": 20,
        "families": 4,
        "tubes": 32,
        "delta": 2.0**-5,
        "rho": 0.25,
        "kind": "random",
        "success_rate": 0.9,
        "confidence": 0.99,
    }

    def run(self, family, seed: int) -> AnalysisResult:
        p = self.params
        trials, count = int(p["trials"]), int(p["families"])
        outcomes = []
        for t in range(trials):
            families = [
                generate_family(
                    {"kind": p["kind"], "delta": p["delta"], "seed": seed * 10007 + t * count + j, "params": {"count": p["tubes"]}}
                )
                for j in range(count)
            ]
            try:
                result = random_rigid_factor(families, float(p["rho"]), seed=seed * 10007 + t, options=self.options)
                outcomes.append({"trial": t, "ok": True, "rounds": result.rounds, "motions": result.count})
            except StatisticalFailure as e:
                outcomes.append({"trial": t, "ok": False, "rounds": e.rounds})
        successes = sum(o["ok"] for o in outcomes)
        needed = int(binom.ppf(1.0 - float(p["confidence"]), trials, float(p["success_rate"])))
        row = InequalityReport(
            "rigid_successes",
            float(p["delta"]),
            float(successes),
            float(needed),
            successes >= needed,
            constants={
                "success_rate": constant(p["success_rate"], "config"),
                "confidence": constant(p["confidence"], "config"),
            },
        )
        return self.result(row.passed, [row], {"trials": outcomes})
