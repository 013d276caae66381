"""Direction-set broadness, broad-piece decomposition, broad-scale search and
regular shadings."""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from .candidates import hemisphere_net
from .errors import ContractViolation, ValidationError
from .family import CoverLevel, TubeFamily
from .geometry import ConvexBody, normalize, phi_matrix
from .voxels import Shading, union_indices, voxelize
from .wolff import cover_report, greedy_tube_cover

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class BroadnessParams:
    """β exponent, bottom scale δ and error K."""

    beta: float = 0.05
    delta: float = 2.0**-6
    K: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.beta <= 2.0:
            raise ValidationError(f"beta={self.beta} outside (0, 2]")
        if self.delta <= 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if self.K < 1:
            raise ValidationError(f"K must be >= 1, got {self.K}")


@dataclass(eq=False)
class DirectionMultiset:
    """Unit vectors (duplicates allowed), optionally confined to a cap.

    Angles are between lines: ∠(v, w) = arccos |⟨v, w⟩|.
    """

    vectors: np.ndarray
    cap: Optional[Tuple[np.ndarray, float]] = None

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float).reshape(-1, 3)
        if len(vectors) and np.abs(np.linalg.norm(vectors, axis=1) - 1.0).max() > 1e-10:
            raise ValidationError("Direction vectors must be unit to 1e-10")
        self.vectors = vectors
        if self.cap is not None:
            center, radius = normalize(self.cap[0]), float(self.cap[1])
            self.cap = (center, radius)
            if len(vectors) and line_angles(vectors, center).max() > radius * (1 + 1e-9) + 1e-12:
                raise ValidationError("Direction vectors leave their cap")

    def __len__(self) -> int:
        return len(self.vectors)

    @classmethod
    def from_directions(cls, directions: np.ndarray, cap=None) -> "DirectionMultiset":
        d = np.asarray(directions, dtype=float)
        return cls(d / np.linalg.norm(d, axis=1, keepdims=True), cap)

    def subset(self, idx: np.ndarray, cap=None) -> "DirectionMultiset":
        return DirectionMultiset(self.vectors[np.asarray(idx, dtype=np.int64)], cap)


@dataclass
class BroadnessResult:
    broad: bool
    needed: float
    witness: Tuple[List[float], float, int]
    K: float

    def to_dict(self) -> dict:
        v0, r, count = self.witness
        return {"broad": self.broad, "needed": self.needed, "K": self.K, "witness": {"v0": v0, "r": r, "count": count}}


def line_angles(vectors: np.ndarray, v0: np.ndarray) -> np.ndarray:
    return np.arccos(np.clip(np.abs(vectors @ v0), 0.0, 1.0))


def ladder(delta: float, top: float) -> List[float]:
    """δ·2^k below `top`, then `top` itself."""
    scales, r = [], delta
    while r < top * (1 - 1e-12):
        scales.append(r)
        r *= 2.0
    scales.append(top)
    return scales


class CapCounter:
    """Counts vectors within line-angle r of query directions."""

    def __init__(self, vectors: np.ndarray):
        self.n = len(vectors)
        self.tree = cKDTree(np.vstack([vectors, -vectors])) if self.n else None

    def counts(self, centers: np.ndarray, r: float) -> np.ndarray:
        if self.n == 0:
            return np.zeros(len(centers), dtype=np.int64)
        if r >= HALF_PI:
            return np.full(len(centers), self.n, dtype=np.int64)
        chord = 2.0 * math.sin(0.5 * r) * (1 + 1e-12)
        return np.asarray(self.tree.query_ball_point(centers, chord, return_length=True), dtype=np.int64)


@lru_cache(maxsize=16)
def _net(spacing: float) -> np.ndarray:
    net = hemisphere_net(spacing)
    net.flags.writeable = False
    return net


def witness_net(delta: float, cap: Optional[Tuple[np.ndarray, float]] = None) -> np.ndarray:
    """Witness centers: a hemisphere net at spacing max(δ, 1/32), cut to the cap."""
    spacing = max(delta, 1.0 / 32.0)
    if cap is not None:
        spacing = min(spacing, max(cap[1] / 4.0, delta))
    net = _net(spacing)
    if cap is not None:
        net = np.vstack([cap[0][None, :], net[line_angles(net, cap[0]) <= cap[1]]])
    return net


def is_broad(
    dirs: DirectionMultiset,
    params: BroadnessParams,
    witnesses: Optional[np.ndarray] = None,
) -> BroadnessResult:
    """#{v : ∠(v, v₀) ≤ r} ≤ K (r/ρ)^β #𝒱 over v₀ ∈ dirs ∪ net and dyadic r ∈ [δ, ρ].

    ρ is the cap radius, or 1 without a cap. The witness is the (v₀, r)
    needing the largest K; ties go to the smaller r.
    """
    if len(dirs) == 0:
        raise ValidationError("is_broad needs at least one direction")
    top = dirs.cap[1] if dirs.cap is not None else 1.0
    centers = np.vstack([dirs.vectors, witness_net(params.delta, dirs.cap) if witnesses is None else witnesses])
    counter = CapCounter(dirs.vectors)
    n = len(dirs)

    needed, witness = -1.0, None
    for r in ladder(params.delta, top):
        counts = counter.counts(centers, r)
        ratio = counts / ((r / top) ** params.beta * n)
        i = int(np.argmax(ratio))
        if ratio[i] > needed * (1 + 1e-12):
            needed, witness = float(ratio[i]), (centers[i].tolist(), float(r), int(counts[i]))
    return BroadnessResult(needed <= params.K * (1 + 1e-12), needed, witness, params.K)


# -- broad pieces ----------------------------------------------------------------------


@dataclass
class BroadPieces:
    rho: float
    centers: List[np.ndarray]
    subsets: List[np.ndarray]
    checks: dict = field(default_factory=dict)

    @property
    def balls(self) -> List[Tuple[List[float], float]]:
        return [(c.tolist(), self.rho) for c in self.centers]

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "balls": self.balls,
            "sizes": [int(len(s)) for s in self.subsets],
            "checks": self.checks,
        }


def find_broad_pieces(
    dirs: DirectionMultiset, delta: float, beta: float = 0.05, K: float = 100.0
) -> BroadPieces:
    """Greedy broad decomposition of a δ-separated direction set.

    Each round takes the (v, r) maximising r^{-β}·#(𝒱 ∩ B(v, r)), keeps
    that ball as a piece and removes B(v, 100r). Rounds stop once half the
    mass is gone; the radius class holding the most mass gives ρ.
    """
    n = len(dirs)
    if n == 0:
        raise ValidationError("find_broad_pieces needs at least one direction")
    net = witness_net(delta)
    remaining = np.ones(n, dtype=bool)
    found: List[Tuple[np.ndarray, float, np.ndarray]] = []

    while remaining.sum() > n / 2.0:
        live = np.flatnonzero(remaining)
        vectors = dirs.vectors[live]
        centers = np.vstack([vectors, net])
        counter = CapCounter(vectors)
        best = None
        for r in ladder(delta, HALF_PI):
            value = counter.counts(centers, r) * r ** (-beta)
            i = int(np.argmax(value))
            if best is None or value[i] > best[0] * (1 + 1e-12):
                best = (value[i], centers[i], r)
        _, v, r = best
        angles = line_angles(vectors, v)
        piece = live[angles <= r * (1 + 1e-12)]
        gone = live[angles <= min(100.0 * r, HALF_PI) * (1 + 1e-12)]
        found.append((v, r, piece))
        remaining[gone] = False
        logger.debug(f"Broad piece: r={r:.4g}, {len(piece)} directions, removed {len(gone)}")

    classes = {}
    for v, r, piece in found:
        classes.setdefault(r, []).append((v, piece))
    rho = max(classes, key=lambda r: (sum(len(p) for _, p in classes[r]), -r))
    kept = classes[rho]

    params = BroadnessParams(beta=beta, delta=min(delta, rho), K=K)
    sizes_ok = all(len(p) >= 0.25 * rho**beta * n for _, p in kept)
    broad_ok = all(is_broad(dirs.subset(p, (v, rho)), params).broad for v, p in kept)
    union = sum(len(p) for _, p in kept)
    floor = n / (4.0 * math.log(1.0 / delta)) if delta < 1 else 0.0
    checks = {"piece_sizes": sizes_ok, "pieces_broad": broad_ok, "union": union, "union_floor": floor, "union_ok": union >= floor}
    return BroadPieces(float(rho), [v for v, _ in kept], [p for _, p in kept], checks)


def union_is_broad(
    pieces: Sequence[DirectionMultiset], cap: Tuple[np.ndarray, float], params: BroadnessParams
) -> dict:
    """Each piece and the multiset union, checked against one common witness set."""
    witnesses = np.vstack([p.vectors for p in pieces] + [witness_net(params.delta, cap)])
    per_piece = [is_broad(DirectionMultiset(p.vectors, cap), params, witnesses).needed for p in pieces]
    union = DirectionMultiset(np.vstack([p.vectors for p in pieces]), cap)
    needed = is_broad(union, params, witnesses).needed
    return {"pieces": per_piece, "union": needed, "holds": needed <= max(per_piece) * (1 + 1e-9)}


def across_scales(
    top: DirectionMultiset,
    pieces: Sequence[DirectionMultiset],
    rho: float,
    delta: float,
    beta: float = 0.05,
) -> dict:
    """Two-level broadness: K₁ for the piece centers at scales ≥ ρ, K₂ for the
    pieces inside their ρ-caps, and the union error against 64·K₁K₂."""
    k1 = is_broad(top, BroadnessParams(beta=beta, delta=rho, K=1e12)).needed
    k2 = max(is_broad(p, BroadnessParams(beta=beta, delta=delta, K=1e12)).needed for p in pieces)
    union = DirectionMultiset(np.vstack([p.vectors for p in pieces]))
    needed = is_broad(union, BroadnessParams(beta=beta, delta=delta, K=1e12)).needed
    bound = 64.0 * max(k1, 1.0) * max(k2, 1.0)
    return {"K1": k1, "K2": k2, "union": needed, "bound": bound, "holds": needed <= bound}


# -- broad scale of a shaded family --------------------------------------------------------


@dataclass
class BroadScaleResult:
    branch: str
    rho: float
    rho_star: float
    union_fraction: float
    certificate: float
    cover: Optional[CoverLevel] = None
    needed: float = 0.0
    K: float = 100.0
    balanced: Optional[dict] = None
    certificate_floor: float = 1.0

    @property
    def passed(self) -> bool:
        if self.branch == "A":
            return self.certificate >= self.certificate_floor
        return self.needed <= self.K and bool(self.balanced and self.balanced["passed"])

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "rho": self.rho,
            "rho_star": self.rho_star,
            "union_fraction": self.union_fraction,
            "certificate": self.certificate,
            "covers": len(self.cover.covers) if self.cover else 0,
            "needed": self.needed,
            "K": self.K,
            "cover_check": self.balanced,
            "certificate_floor": self.certificate_floor,
            "passed": self.passed,
        }


def _canonical(directions: np.ndarray) -> np.ndarray:
    flip = np.where(directions[:, 2] < 0, -1.0, 1.0)
    return directions * flip[:, None]


def _rescaled_directions(W: ConvexBody, directions: np.ndarray) -> np.ndarray:
    matrix, _ = phi_matrix(W)
    image = directions @ matrix.T
    return image / np.linalg.norm(image, axis=1, keepdims=True)


def _cover_at(family: TubeFamily, scale: float, factor: float) -> CoverLevel:
    planted = family.cover_near(scale, factor)
    return planted if planted is not None else greedy_tube_cover(family, scale)


def find_broad_scale(
    family: TubeFamily,
    omega: float = 1.0,
    beta: float = 0.05,
    K: float = 100.0,
    max_covers: int = 256,
    certificate_floor: float = 1.0,
) -> BroadScaleResult:
    """Either a multiplicity certificate (branch A) or a broad scale ρ with a cover (branch B).

    Directions in each cover of the r = δ^{ω/100} level are split into
    broad pieces; the pigeonholed piece radius ρ* decides the branch. When
    ρ* is below δ^{1-ω/100} the family is direction-concentrated and branch
    A measures c in |∪Y| ≥ c δ^{ω/2} Σ|Y|, passing when c ≥ `certificate_floor`.
    Otherwise ρ is clamped into [δ^{1-ω/100}, δ^{ω/100}]; the ρ-cover must be
    balanced with error K and every rescaled sub-family broad with error K.
    """
    if not family.shadings:
        raise ValidationError("find_broad_scale needs a shaded family")
    delta = family.delta
    shadings = family.shading_list()
    grid = shadings[0].grid
    total = family.shading_mass()
    union = grid.cell_volume * len(union_indices(s.voxels for s in shadings))
    union_fraction = union / total if total > 0 else 0.0
    certificate = union / (delta ** (omega / 2.0) * total) if total > 0 else 0.0

    r = delta ** (omega / 100.0)
    lo = delta ** (1.0 - omega / 100.0)
    top = _cover_at(family, r, 2.0)
    directions = _canonical(family.directions)
    masses = {}
    for w in range(len(top.covers)):
        members = top.members(w)
        if len(members) == 0:
            continue
        pieces = find_broad_pieces(DirectionMultiset(directions[members]), delta, beta, K)
        kept = sum(len(p) for p in pieces.subsets)
        masses[pieces.rho] = masses.get(pieces.rho, 0) + kept
    rho_star = max(masses, key=lambda s: (masses[s], -s))
    logger.debug(f"find_broad_scale: rho*={rho_star:.4g}, admissible [{lo:.4g}, {r:.4g}]")

    if rho_star < lo:
        return BroadScaleResult(
            "A", float(rho_star), float(rho_star), union_fraction, certificate, K=K, certificate_floor=certificate_floor
        )

    rho = float(min(max(rho_star, lo), r))
    cover = _cover_at(family, rho, 4.0)
    check = cover_report(family.bodies(), cover.covers, K, cover.assignment, sample_limit=2000)
    needed = 0.0
    occupied = [w for w in range(len(cover.covers)) if len(cover.members(w)) > 0][:max_covers]
    for w in occupied:
        W = cover.covers[w]
        rescaled = _rescaled_directions(W, family.directions[cover.members(w)])
        bottom = min(1.0, delta / rho)
        result = is_broad(DirectionMultiset(rescaled), BroadnessParams(beta=beta, delta=bottom, K=K))
        needed = max(needed, result.needed)
    return BroadScaleResult(
        "B", rho, float(rho_star), union_fraction, certificate, cover, needed, K, check.to_dict(), certificate_floor
    )


# -- regular shadings -------------------------------------------------------------------------


def _ball_counts(points: np.ndarray, tree: cKDTree, r: float) -> np.ndarray:
    return np.asarray(tree.query_ball_point(points, r, return_length=True), dtype=np.int64)


def regularity_violations(body, shading: Shading, delta: float, body_voxels: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask of shading voxels x with |Y ∩ B(x,r)| < (100 log 1/δ)⁻¹ |Y| |B(x,r) ∩ W| / |W| for some dyadic r."""
    grid = shading.grid
    if body_voxels is None:
        body_voxels = voxelize(body, grid).voxels
    if len(shading) == 0:
        return np.zeros(0, dtype=bool)
    points = shading.centers()
    y_tree = cKDTree(points)
    w_tree = cKDTree(grid.centers(body_voxels))
    factor = 1.0 / (100.0 * math.log(1.0 / delta))
    y_total, w_total = len(shading), len(body_voxels)
    bad = np.zeros(len(points), dtype=bool)
    for r in ladder(delta, 1.0):
        y_counts = _ball_counts(points, y_tree, r)
        w_counts = _ball_counts(points, w_tree, r)
        bad |= y_counts < factor * y_total * w_counts / w_total
    return bad


def is_regular(body, shading: Shading, delta: float) -> bool:
    return not regularity_violations(body, shading, delta).any()


def regularize_shading(body, shading: Shading, delta: float, max_rounds: int = 64) -> Shading:
    """Delete voxels violating the regularity inequality until none do.

    Raises:
        ContractViolation: If the deletion empties the shading, finds no
            fixpoint within `max_rounds`, or keeps less than half of it
    """
    if len(shading) == 0:
        raise ValidationError("Cannot regularize an empty shading")
    body_voxels = voxelize(body, shading.grid).voxels
    current = shading
    for _ in range(max_rounds):
        bad = regularity_violations(body, current, delta, body_voxels)
        if not bad.any():
            break
        current = current.restricted(~bad)
        if len(current) == 0:
            raise ContractViolation("Regularization emptied the shading")
    else:
        if regularity_violations(body, current, delta, body_voxels).any():
            raise ContractViolation(f"No regular sub-shading after {max_rounds} rounds")
    if len(current) < 0.5 * len(shading):
        raise ContractViolation(f"Regular sub-shading kept {len(current)}/{len(shading)} voxels, below half")
    logger.debug(f"Regular sub-shading kept {len(current)}/{len(shading)} voxels")
    return current
