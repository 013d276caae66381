"""Wolff constants over explicit candidate families, covers, and every-scale checks.

All constants are LOWER bounds on the supremum over every convex set: the
maximum is taken over a finite CandidateFamily only.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from .candidates import Candidate, CandidateFamily, build_candidates, explicit_candidates
from .errors import EmptyCandidatesError, ValidationError
from .family import CoverLevel, TubeFamily
from .geometry import (
    DEFAULT_SLACK,
    BodyArray,
    ConvexBody,
    contains_body,
    rescale_array,
    tube_prism,
)

NORMALIZATIONS = ("katz_tao", "frostman")


@dataclass
class WolffReport:
    """Result of a Wolff-constant maximisation."""

    constant: float
    witness: Optional[Candidate]
    normalization: str
    family_kind: str
    witness_index: int = -1
    witness_source: str = ""
    member_count: int = 0
    candidate_count: int = 0
    lower_bound: bool = True
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "normalization": self.normalization,
            "kind": self.family_kind,
            "constant": self.constant,
            "lower_bound": self.lower_bound,
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "witness_source": self.witness_source,
            "member_count": self.member_count,
            "candidate_count": self.candidate_count,
            "details": self.details,
        }


@dataclass
class CandidateScores:
    """Per-candidate contained mass, count and member indices."""

    sums: np.ndarray
    counts: np.ndarray
    volumes: np.ndarray
    members: List[np.ndarray]


def as_body_array(obj: Union[TubeFamily, BodyArray, Sequence]) -> BodyArray:
    if isinstance(obj, TubeFamily):
        return obj.bodies()
    if isinstance(obj, BodyArray):
        return obj
    return BodyArray.from_bodies(list(obj))


def members_of(
    bodies: BodyArray, W: Candidate, slack: float = DEFAULT_SLACK, tree: Optional[cKDTree] = None
) -> np.ndarray:
    """Sorted indices of the bodies contained in W (the set 𝒰[W])."""
    if isinstance(W, ConvexBody) and W.kind == "slab":
        dist = np.abs(bodies.centers @ W.axes[0] - W.offset)
        near = np.flatnonzero(dist <= W.dims[0] * (1.0 + slack) + 1e-12)
    else:
        center, half_axes = W.frame()
        reach = np.linalg.norm(half_axes, axis=1).sum() * (1.0 + slack) + 1e-12
        tree = tree if tree is not None else cKDTree(bodies.centers)
        near = np.sort(np.asarray(tree.query_ball_point(center, reach), dtype=np.int64))
    if len(near) == 0:
        return near
    return near[bodies.contained_in(W, slack, near)]


def score_candidates(
    bodies: BodyArray,
    candidates: CandidateFamily,
    slack: float = DEFAULT_SLACK,
    workers: int = 1,
) -> CandidateScores:
    """Contained mass Σ_{U∈𝒰[W]}|U| for every candidate W."""
    tree = cKDTree(bodies.centers)

    def evaluate(W):
        return members_of(bodies, W, slack, tree)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(evaluate, candidates.bodies))
    else:
        members = [evaluate(W) for W in candidates.bodies]
    sums = np.array([bodies.volumes[m].sum() for m in members], dtype=float)
    counts = np.array([len(m) for m in members], dtype=np.int64)
    volumes = np.array([W.volume() for W in candidates.bodies], dtype=float)
    return CandidateScores(sums, counts, volumes, members)


def wolff_constant(
    family: Union[TubeFamily, BodyArray, Sequence],
    candidates: CandidateFamily,
    normalization: str = "katz_tao",
    slack: float = DEFAULT_SLACK,
    workers: int = 1,
) -> WolffReport:
    """Katz-Tao or Frostman Wolff constant of a family over explicit candidates.

    katz_tao: max_W Σ_{U⊂W}|U| / |W|
    frostman: max_W Σ_{U⊂W}|U| / (|W| Σ_U |U|)

    Ties are broken by the lowest candidate index.

    Raises:
        ValidationError: If the family is empty or the normalization unknown
        EmptyCandidatesError: If there are no candidates
    """
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"Unknown normalization: {normalization}. Available: {list(NORMALIZATIONS)}")
    bodies = as_body_array(family)
    if len(bodies) == 0:
        raise ValidationError("Cannot compute a Wolff constant of an empty family")
    if len(candidates) == 0:
        raise EmptyCandidatesError("Candidate family is empty")

    scores = score_candidates(bodies, candidates, slack, workers)
    ratios = scores.sums / scores.volumes
    if normalization == "frostman":
        ratios = ratios / bodies.volumes.sum()
    best = int(np.argmax(ratios))
    logger.debug(
        f"{normalization} constant {ratios[best]:.4g} over {len(candidates)} {candidates.kind} candidates "
        f"(witness {candidates.sources[best]}, {scores.counts[best]} members)"
    )
    return WolffReport(
        constant=float(ratios[best]),
        witness=candidates.bodies[best],
        normalization=normalization,
        family_kind=candidates.kind,
        witness_index=best,
        witness_source=candidates.sources[best],
        member_count=int(scores.counts[best]),
        candidate_count=len(candidates),
    )


def family_constant(
    family: Union[TubeFamily, BodyArray, Sequence],
    delta: float,
    normalization: str = "katz_tao",
    kind: str = "convex",
    options: Optional[dict] = None,
    extra: Sequence[Candidate] = (),
) -> WolffReport:
    """Build the default candidates for a family and maximise over them."""
    options = options or {}
    bodies = as_body_array(family)
    candidates = build_candidates(bodies, delta, kind, options, seed=int(options.get("seed", 0)))
    if extra:
        candidates = candidates.extend(explicit_candidates(extra, kind))
    return wolff_constant(
        bodies,
        candidates,
        normalization,
        slack=float(options.get("slack", DEFAULT_SLACK)),
        workers=int(options.get("workers", 1)),
    )


# -- local Katz-Tao constant ---------------------------------------------------


def square(P: ConvexBody) -> ConvexBody:
    """□(P): the (ac/b) × c × c box about P, or the c-cube when b = c."""
    a, b, c = P.dims
    if b >= c * (1.0 - 1e-9):
        return ConvexBody(P.center, P.axes, (c, c, c), "prism")
    return ConvexBody(P.center, P.axes, (a * c / b, c, c), "prism")


def local_window(P: ConvexBody) -> ConvexBody:
    return square(P).dilate(2.0)


def in_window(Q: ConvexBody, window: ConvexBody, slack: float = DEFAULT_SLACK) -> bool:
    """𝒫⟨W⟩ membership: □(Q) ⊂ W."""
    return contains_body(square(Q), window, slack)


def local_katz_tao(prisms: Sequence[ConvexBody], options: Optional[dict] = None) -> WolffReport:
    """max over P of the Katz-Tao constant of the prisms whose □ lies in 2□(P).

    Raises:
        ValidationError: If the prisms are not congruent within a factor 2
    """
    options = dict(options or {})
    slack = float(options.get("slack", DEFAULT_SLACK))
    if not prisms:
        raise ValidationError("local_katz_tao needs at least one prism")
    dims = np.array([P.dims for P in prisms])
    if np.any(dims.max(axis=0) > 2.0 * dims.min(axis=0) * (1 + 1e-12)):
        raise ValidationError("Prisms must share dimensions within a factor 2")
    delta = float(dims[:, 0].min())
    options.setdefault("include_grid", False)

    best: Optional[WolffReport] = None
    for i, P in enumerate(prisms):
        window = local_window(P)
        inside = [j for j, Q in enumerate(prisms) if in_window(Q, window, slack)]
        sub = BodyArray.from_bodies([prisms[j] for j in inside])
        report = family_constant(sub, delta, "katz_tao", "convex", options, extra=[window])
        if best is None or report.constant > best.constant:
            best = report
            best.details = {"window_prism": i, "window_members": inside}
    logger.debug(f"Local Katz-Tao constant {best.constant:.4g} at prism {best.details['window_prism']}")
    return best


# -- covers (balanced / almost partitioning) ------------------------------------


@dataclass
class CoverCheck:
    """Cover predicates for bodies 𝒰 and covers 𝒲."""

    multiplicity: int
    balance: float
    uncovered: int
    masses: np.ndarray
    K: float
    sampled: bool = False

    @property
    def partitioning(self) -> bool:
        return self.multiplicity <= 1 and self.uncovered == 0

    @property
    def passed(self) -> bool:
        return self.uncovered == 0 and self.multiplicity <= self.K and self.balance <= self.K

    def to_dict(self) -> dict:
        return {
            "multiplicity": int(self.multiplicity),
            "balance": float(self.balance),
            "uncovered": int(self.uncovered),
            "partitioning": self.partitioning,
            "K": self.K,
            "sampled": self.sampled,
            "passed": self.passed,
        }


def cover_report(
    bodies: BodyArray,
    covers: Sequence[ConvexBody],
    K: float,
    assignment: Optional[np.ndarray] = None,
    slack: float = DEFAULT_SLACK,
    sample_limit: Optional[int] = None,
    seed: int = 0,
) -> CoverCheck:
    """Multiplicity, balance and coverage of a cover.

    Multiplicity counts covers containing each body (on a deterministic
    sample when `sample_limit` is set). Balance is max/min of
    |W|⁻¹ Σ|U| over the bodies assigned to W, or over 𝒰[W] without an
    assignment.
    """
    n = len(bodies)
    sample = np.arange(n)
    sampled = False
    if sample_limit is not None and n > sample_limit:
        sample = np.sort(np.random.default_rng(seed).choice(n, size=sample_limit, replace=False))
        sampled = True
    sub = bodies.subset(sample)
    tree = cKDTree(sub.centers)
    counts = np.zeros(len(sample), dtype=np.int64)
    masses = np.zeros(len(covers))
    full_tree = cKDTree(bodies.centers) if assignment is None else None

    for w, W in enumerate(covers):
        counts[members_of(sub, W, slack, tree)] += 1
        if assignment is None:
            members = members_of(bodies, W, slack, full_tree)
        else:
            members = np.flatnonzero(assignment == w)
        masses[w] = bodies.volumes[members].sum() / W.volume()

    if assignment is not None:
        uncovered = int(np.count_nonzero(assignment < 0))
    else:
        uncovered = int(np.count_nonzero(counts == 0))
    positive = masses[masses > 0]
    balance = float(positive.max() / positive.min()) if len(positive) else float("inf")
    return CoverCheck(int(counts.max(initial=0)), balance, uncovered, masses, float(K), sampled)


def _center_reach(scale: float, half_length: float, slack: float) -> float:
    """Largest center distance of a unit segment contained in a (ρ, ρ, L) tube prism."""
    s = 1.0 + slack
    transverse = np.sqrt(2.0) * scale * s
    axial = half_length * s - 0.5 * np.sqrt(max(0.0, 1.0 - 8.0 * (scale * s) ** 2))
    return float(np.hypot(transverse, max(axial, 0.0))) + 1e-12


def _canonical(directions: np.ndarray) -> np.ndarray:
    flip = np.where(directions[:, 2] < 0, -1.0, 1.0)
    return directions * flip[:, None]


def greedy_tube_cover(
    family: TubeFamily, scale: float, slack: float = DEFAULT_SLACK, iterations: int = 3
) -> CoverLevel:
    """Partition the tubes into ρ-tubes (ρ, ρ, ½ + ρ) by seeded mean shift.

    Seeds are visited densest first; each cover is re-centred on the mean
    anchor and direction of what it holds.
    """
    anchors = family.anchors
    directions = _canonical(family.directions)
    bodies = family.bodies()
    n = len(family)
    features = np.hstack([anchors, 0.5 * directions])
    density = cKDTree(features).query_ball_point(features, scale, return_length=True)
    order = np.lexsort((np.arange(n), -np.asarray(density)))
    tree = cKDTree(anchors)
    reach = _center_reach(scale, 0.5 + scale, slack)

    assignment = np.full(n, -1, dtype=np.int64)
    covers: List[ConvexBody] = []
    for seed in order.tolist():
        if assignment[seed] >= 0:
            continue
        center, direction = anchors[seed], directions[seed]
        cover, members = tube_prism(center, direction, scale, 0.5 + scale), np.array([seed])
        for _ in range(iterations):
            trial = tube_prism(center, direction, scale, 0.5 + scale)
            near = np.asarray(tree.query_ball_point(center, reach), dtype=np.int64)
            near = np.sort(near[assignment[near] < 0])
            found = near[bodies.contained_in(trial, slack, near)]
            if seed not in found:
                break
            cover, members = trial, found
            aligned = directions[found] * np.sign(directions[found] @ direction)[:, None]
            center = anchors[found].mean(axis=0)
            direction = aligned.mean(axis=0)
            direction = direction / np.linalg.norm(direction)
        assignment[members] = len(covers)
        covers.append(cover)
    logger.debug(f"Greedy cover at scale {scale:.4g}: {len(covers)} covers for {n} tubes")
    return CoverLevel(scale, covers, assignment)


# -- every-scale checks ----------------------------------------------------------


@dataclass
class ScaleReport:
    rho0: float
    rho: float
    source: str
    covers: int
    cover: Optional[CoverCheck]
    constant: float
    K: float
    sampled_covers: bool = False

    @property
    def passed(self) -> bool:
        cover_ok = self.cover is None or self.cover.passed
        return cover_ok and self.constant <= self.K

    def to_dict(self) -> dict:
        return {
            "rho0": self.rho0,
            "rho": self.rho,
            "source": self.source,
            "covers": self.covers,
            "cover": self.cover.to_dict() if self.cover else None,
            "constant": self.constant,
            "sampled_covers": self.sampled_covers,
            "passed": self.passed,
        }


@dataclass
class EveryScaleReport:
    variant: str
    K: float
    per_scale: List[ScaleReport]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.per_scale)

    def failing_scales(self) -> List[float]:
        return [s.rho0 for s in self.per_scale if not s.passed]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "K": self.K,
            "passed": self.passed,
            "per_scale": [s.to_dict() for s in self.per_scale],
        }


def _rescaled_frostman(bodies: BodyArray, W: ConvexBody, members: np.ndarray, options: dict) -> float:
    if len(members) == 1:
        return float(W.volume() / bodies.volumes[members[0]])
    rescaled = rescale_array(W, bodies.subset(members))
    thinnest = float(np.linalg.norm(rescaled.half_axes, axis=2).min())
    return family_constant(rescaled, max(thinnest, 1e-6), "frostman", "convex", options).constant


def _level_constant(
    family: TubeFamily, level: CoverLevel, variant: str, options: dict
) -> tuple:
    bodies = family.bodies()
    if variant == "katz_tao":
        report = family_constant(BodyArray.from_bodies(level.covers), level.scale, "katz_tao", "convex", options)
        return report.constant, False
    occupied = [w for w in range(len(level.covers)) if np.any(level.assignment == w)]
    limit = int(options.get("max_covers", 512))
    sampled = len(occupied) > limit
    if sampled:
        rng = np.random.default_rng(int(options.get("seed", 0)))
        occupied = sorted(rng.choice(occupied, size=limit, replace=False).tolist())
    constant = 0.0
    for w in occupied:
        constant = max(constant, _rescaled_frostman(bodies, level.covers[w], level.members(w), options))
    return constant, sampled


def _evaluate_level(
    family: TubeFamily, rho0: float, level: CoverLevel, source: str, K: float, variant: str, options: dict
) -> ScaleReport:
    check = cover_report(
        family.bodies(),
        level.covers,
        K,
        assignment=level.assignment,
        slack=float(options.get("slack", DEFAULT_SLACK)),
        sample_limit=int(options.get("cover_sample", 2000)),
    )
    constant, sampled = _level_constant(family, level, variant, options)
    return ScaleReport(rho0, level.scale, source, len(level.covers), check, constant, K, sampled)


def _trivial_level(family: TubeFamily, K: float, variant: str, options: dict) -> ScaleReport:
    if variant == "katz_tao":
        constant = family_constant(family, family.delta, "katz_tao", "convex", options).constant
    else:
        constant = 1.0
    return ScaleReport(family.delta, family.delta, "tubes", len(family), None, constant, K)


def axioms_every_scale(
    family: TubeFamily,
    K: float,
    variant: str = "katz_tao",
    scales: Optional[Sequence[float]] = None,
    options: Optional[dict] = None,
) -> EveryScaleReport:
    """Katz-Tao / Frostman Wolff axioms at every dyadic scale ρ₀ ∈ [δ, 1].

    For each ρ₀ a cover scale ρ ∈ [ρ₀, Kρ₀) is used: a planted cover when
    the family carries one, otherwise greedy covers at ρ₀, 2ρ₀, 4ρ₀ (the
    first passing one is kept, else the one with the smallest constant).
    """
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    if variant not in NORMALIZATIONS:
        raise ValidationError(f"Unknown variant: {variant}. Available: {list(NORMALIZATIONS)}")
    options = dict(options or {})
    options.setdefault("include_grid", False)
    options.setdefault("max_seeds", 64)
    delta = family.delta
    if scales is None:
        scales = []
        rho = delta
        while rho <= 1.0 * (1 + 1e-12):
            scales.append(rho)
            rho *= 2.0

    logger.info(f"Checking {variant} axioms at {len(scales)} scales with K={K}")
    reports: List[ScaleReport] = []
    for rho0 in scales:
        if rho0 <= delta * (1 + 1e-9):
            reports.append(_trivial_level(family, K, variant, options))
            continue
        planted = family.cover_near(rho0, K)
        if planted is not None:
            reports.append(_evaluate_level(family, rho0, planted, "planted", K, variant, options))
            continue
        best: Optional[ScaleReport] = None
        rho = rho0
        for _ in range(3):
            if rho >= K * rho0:
                break
            level = greedy_tube_cover(family, rho, float(options.get("slack", DEFAULT_SLACK)))
            report = _evaluate_level(family, rho0, level, "greedy", K, variant, options)
            if report.passed:
                best = report
                break
            if best is None or report.constant < best.constant:
                best = report
            rho *= 2.0
        reports.append(best)
        logger.debug(f"rho0={rho0:.4g}: rho={best.rho:.4g} constant={best.constant:.4g} passed={best.passed}")
    return EveryScaleReport(variant, float(K), reports)


# -- sub-multiplicativity and cardinality floors ----------------------------------


def two_level_product(family: TubeFamily, level: CoverLevel, options: Optional[dict] = None) -> dict:
    """C_KT(𝕋) against 64 · max_W C_KT(𝕋^W) · C_KT(𝕋_ρ) for a given cover level."""
    options = dict(options or {})
    options.setdefault("include_grid", False)
    bodies = family.bodies()
    total = family_constant(family, family.delta, "katz_tao", "convex", options).constant
    covers = family_constant(BodyArray.from_bodies(level.covers), level.scale, "katz_tao", "convex", options).constant
    inner = 0.0
    for w, W in enumerate(level.covers):
        members = level.members(w)
        if len(members) == 0:
            continue
        rescaled = rescale_array(W, bodies.subset(members))
        thinnest = float(np.linalg.norm(rescaled.half_axes, axis=2).min())
        inner = max(inner, family_constant(rescaled, max(thinnest, 1e-6), "katz_tao", "convex", options).constant)
    bound = 64.0 * inner * covers
    return {"total": total, "covers": covers, "inner": inner, "bound": bound, "holds": total <= bound}


def frostman_product(bodies: BodyArray, level: CoverLevel, delta: float, options: Optional[dict] = None) -> dict:
    """C_F(𝒰) against 64 · C_F(𝒲) · max_W C_F(𝒰^W) for a balanced cover."""
    options = dict(options or {})
    options.setdefault("include_grid", False)
    total = family_constant(bodies, delta, "frostman", "convex", options).constant
    covers = family_constant(BodyArray.from_bodies(level.covers), level.scale, "frostman", "convex", options).constant
    inner = 0.0
    for w, W in enumerate(level.covers):
        members = level.members(w)
        if len(members):
            inner = max(inner, _rescaled_frostman(bodies, W, members, options))
    bound = 64.0 * covers * inner
    return {"total": total, "covers": covers, "inner": inner, "bound": bound, "holds": total <= bound}


def slab_cardinality_floor(constant: float, delta: float) -> float:
    """#𝕋 lower bound implied by a Frostman slab constant (own δ-slab in the candidates)."""
    return 1.0 / (2.0 * np.pi * delta * constant)


def frostman_cardinality_floor(constant: float, body_volume: float) -> float:
    """#𝒰 lower bound implied by a Frostman convex constant: (4C|U|)⁻¹."""
    return 1.0 / (4.0 * constant * body_volume)
