"""Explicit candidate families standing in for "all convex sets" in Wolff suprema."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from .errors import EmptyCandidatesError, ValidationError
from .geometry import (
    BodyArray,
    ConvexBody,
    Hull,
    bounding_prism,
    complete_frame,
    normalize,
)

Candidate = Union[ConvexBody, Hull]

DEFAULTS = {
    "max_seeds": 256,
    "pair_seeds": 48,
    "grid_candidates": 2000,
    "grid_min_width": 0.125,
    "include_grid": True,
    "roll_steps": 12,
    "slack": 0.01,
}


@dataclass(eq=False)
class CandidateFamily:
    """Candidate sets W with the source that produced each one."""

    kind: str
    bodies: List[Candidate] = field(default_factory=list)
    sources: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("convex", "slab"):
            raise ValidationError(f"Unknown candidate kind: {self.kind}. Available: ['convex', 'slab']")

    def __len__(self) -> int:
        return len(self.bodies)

    def add(self, body: Candidate, source: str) -> None:
        self.bodies.append(body)
        self.sources.append(source)

    def extend(self, other: "CandidateFamily") -> "CandidateFamily":
        return CandidateFamily(self.kind, self.bodies + other.bodies, self.sources + other.sources)

    def counts(self) -> Dict[str, int]:
        summary: Dict[str, int] = {}
        for source in self.sources:
            summary[source] = summary.get(source, 0) + 1
        return summary


def dyadic_scales(delta: float, top: float) -> List[float]:
    """δ·2^k for k ≥ 0 up to and including `top`."""
    scales, r = [], delta
    while r <= top * (1 + 1e-12):
        scales.append(r)
        r *= 2.0
    return scales


def dyadic_ceil(value: float, delta: float, top: float) -> float:
    """Smallest δ·2^k ≥ value, clamped to [δ, top]."""
    if value <= delta:
        return delta
    k = int(np.ceil(np.log2(value / delta) - 1e-12))
    return float(min(delta * 2.0**k, top))


def hemisphere_net(spacing: float) -> np.ndarray:
    """Roughly equidistributed unit vectors with z ≥ 0 at the given angular spacing."""
    rows = max(1, int(round((np.pi / 2) / spacing)))
    points = []
    for m in range(rows):
        theta = (np.pi / 2) * (m + 0.5) / rows
        count = max(1, int(round(2.0 * np.pi * np.sin(theta) / spacing)))
        phi = 2.0 * np.pi * np.arange(count) / count
        points.append(
            np.stack(
                [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.full(count, np.cos(theta))],
                axis=1,
            )
        )
    return np.vstack(points)


def _orthogonal(half_axes: np.ndarray) -> bool:
    gram = half_axes @ half_axes.T
    off = gram - np.diag(np.diag(gram))
    return bool(np.abs(off).max() <= 1e-9 * max(1.0, np.abs(gram).max()))


def own_box(bodies: BodyArray, index: int) -> Candidate:
    """The bounding parallelepiped of one body, as a prism when its frame is orthogonal."""
    center, half_axes = bodies.centers[index], bodies.half_axes[index]
    if _orthogonal(half_axes):
        dims = np.linalg.norm(half_axes, axis=1)
        return ConvexBody(center=center, axes=half_axes / dims[:, None], dims=dims, kind="prism")
    volume = 8.0 * abs(np.linalg.det(half_axes))
    return Hull(center, half_axes, volume, "box")


def _seeds(n: int, limit: int, rng: np.random.Generator) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.sort(rng.choice(n, size=limit, replace=False))


def _body_dims(bodies: BodyArray, index: int) -> np.ndarray:
    return np.sort(np.linalg.norm(bodies.half_axes[index], axis=1))


def _aligned_frame(bodies: BodyArray, index: int) -> np.ndarray:
    lengths = np.linalg.norm(bodies.half_axes[index], axis=1)
    order = np.argsort(lengths, kind="stable")
    long_axis = normalize(bodies.half_axes[index][order[2]])
    if _orthogonal(bodies.half_axes[index]):
        rows = bodies.half_axes[index][order] / lengths[order][:, None]
        return rows
    return complete_frame(long_axis)


def cluster_member_sets(
    bodies: BodyArray,
    delta: float,
    seeds: np.ndarray,
    slack: float,
    tree: Optional[cKDTree] = None,
) -> List[tuple]:
    """Seeded boxes at dyadic widths and the bodies each one contains.

    Returns (box, member indices) pairs; member sets are deduplicated.
    """
    tree = tree or cKDTree(bodies.centers)
    seen = set()
    results = []
    for seed in seeds.tolist():
        frame = _aligned_frame(bodies, seed)
        dims = _body_dims(bodies, seed)
        for width in dyadic_scales(delta, 2.0):
            if width < dims[0]:
                continue
            for length in (dims[2] + width, 2.0 * dims[2] + width):
                box_dims = np.array([max(dims[0], width), max(dims[1], width), max(length, width)])
                box = ConvexBody(center=bodies.centers[seed], axes=frame, dims=box_dims, kind="prism")
                radius = float(np.linalg.norm(box_dims)) * (1.0 + slack)
                near = np.asarray(tree.query_ball_point(bodies.centers[seed], radius), dtype=np.int64)
                if len(near) == 0:
                    continue
                members = near[bodies.contained_in(box, slack, near)]
                if len(members) == 0:
                    continue
                key = tuple(np.sort(members).tolist())
                if key in seen:
                    continue
                seen.add(key)
                results.append((box, np.sort(members)))
    return results


def build_candidates(
    bodies: BodyArray,
    delta: float,
    kind: str = "convex",
    options: Optional[dict] = None,
    seed: int = 0,
) -> CandidateFamily:
    """Candidate family for a body collection.

    convex: own boxes of seed bodies, seeded aligned boxes and bounding
    prisms of their contents, the global bounding prism, and (optionally) a
    capped grid of dyadic prisms. slab: own slabs, slabs spanned by pairs of
    seed directions, principal-axis slabs of seeded clusters, and thick
    slabs through the origin.

    Raises:
        EmptyCandidatesError: If the body collection is empty
    """
    opts = dict(DEFAULTS)
    opts.update(options or {})
    if len(bodies) == 0:
        raise EmptyCandidatesError("Cannot build candidates for an empty family")
    rng = np.random.default_rng(seed)
    seeds = _seeds(len(bodies), int(opts["max_seeds"]), rng)
    tree = cKDTree(bodies.centers)
    slack = float(opts["slack"])
    clusters = cluster_member_sets(bodies, delta, seeds, slack, tree)

    if kind == "convex":
        family = _convex_candidates(bodies, delta, seeds, clusters, opts, rng)
    elif kind == "slab":
        family = _slab_candidates(bodies, delta, seeds, clusters, opts)
    else:
        raise ValidationError(f"Unknown candidate kind: {kind}. Available: ['convex', 'slab']")

    logger.debug(f"Built {len(family)} {kind} candidates from {len(bodies)} bodies: {family.counts()}")
    if len(family) == 0:
        raise EmptyCandidatesError(f"No {kind} candidates could be built")
    return family


def _convex_candidates(bodies, delta, seeds, clusters, opts, rng) -> CandidateFamily:
    family = CandidateFamily("convex")
    for index in seeds.tolist():
        family.add(own_box(bodies, index), "own")
    roll_steps = int(opts["roll_steps"])
    for box, members in clusters:
        family.add(box, "seeded")
        if len(members) >= 2:
            family.add(bounding_prism(bodies, members, roll_steps), "cluster")
    if len(bodies) > 1:
        family.add(bounding_prism(bodies, None, roll_steps), "global")
    if opts["include_grid"]:
        for body in _grid_prisms(bodies, delta, opts, rng):
            family.add(body, "grid")
    return _within_reach(family)


def _grid_prisms(bodies: BodyArray, delta: float, opts: dict, rng: np.random.Generator) -> List[ConvexBody]:
    """Dyadic (a, b) prisms on direction nets, positioned on occupied grid cells."""
    cap = int(opts["grid_candidates"])
    min_width = float(opts["grid_min_width"])
    half_length = float(np.max(np.linalg.norm(bodies.half_axes, axis=2))) if len(bodies) else 0.5
    prisms: List[ConvexBody] = []
    for b in reversed(dyadic_scales(delta, 1.0)):
        if b < min_width:
            break
        for a in [s for s in dyadic_scales(delta, b)][::-1][:2]:
            rolls = int(min(4, max(1, np.ceil((np.pi / 2) / max(a / b, 1e-9)))))
            for direction in hemisphere_net(b):
                base = complete_frame(direction)
                for r in range(rolls):
                    angle = (np.pi / 2) * r / rolls
                    u = np.cos(angle) * base[0] + np.sin(angle) * base[1]
                    axes = np.vstack([u, np.cross(direction, u), direction])
                    local = bodies.centers @ axes.T
                    cells = np.unique(
                        np.floor(local / np.array([a / 2, b / 2, half_length])).astype(np.int64), axis=0
                    )
                    for cell in cells:
                        center_local = (cell + 0.5) * np.array([a / 2, b / 2, half_length])
                        prisms.append(
                            ConvexBody(
                                center=center_local @ axes,
                                axes=axes,
                                dims=(a, b, half_length + b),
                                kind="prism",
                            )
                        )
                        if len(prisms) >= cap:
                            return prisms
    return prisms


def slab_radius(bodies: BodyArray, slack: float = 0.01) -> float:
    """Clipping radius for slab candidates: 1 when the family fits in B(0, 1), else 2."""
    mask = bodies.slab["mask"]
    reach = float(bodies.slab["radius"][mask].max()) if mask.any() else 0.0
    if not mask.all():
        reach = max(reach, float(np.linalg.norm(bodies.vertices(np.flatnonzero(~mask)), axis=2).max()))
    return 1.0 if reach <= 1.0 + slack else 2.0


def _slab_around(bodies: BodyArray, members: np.ndarray, normal: np.ndarray, delta: float, radius: float):
    normal = normalize(normal)
    upper = bodies.support(normal, members).max()
    lower = -bodies.support(-normal, members).max()
    offset = 0.5 * (upper + lower)
    thickness = dyadic_ceil(0.5 * (upper - lower), delta, radius)
    return ConvexBody.slab(normal, offset, thickness, radius)


def _slab_candidates(bodies, delta, seeds, clusters, opts) -> CandidateFamily:
    family = CandidateFamily("slab")
    radius = slab_radius(bodies, float(opts["slack"]))
    for index in seeds.tolist():
        thin_axis = bodies.half_axes[index][np.argmin(np.linalg.norm(bodies.half_axes[index], axis=1))]
        family.add(_slab_around(bodies, np.array([index]), thin_axis, delta, radius), "own-slab")

    directions = bodies.directions()
    pair_seeds = seeds[: int(opts["pair_seeds"])]
    for i, first in enumerate(pair_seeds.tolist()):
        for second in pair_seeds[i + 1 :].tolist():
            normal = np.cross(directions[first], directions[second])
            if np.linalg.norm(normal) < 1e-3:
                continue
            family.add(
                _slab_around(bodies, np.array([first, second]), normal, delta, radius), "pair-slab"
            )

    for _, members in clusters:
        if len(members) < 3:
            continue
        points = bodies.vertices(members).reshape(-1, 3)
        centered = points - points.mean(axis=0)
        _, vectors = np.linalg.eigh(centered.T @ centered)
        family.add(_slab_around(bodies, members, vectors[:, 0], delta, radius), "cluster-slab")

    everything = np.arange(len(bodies))
    for normal in hemisphere_net(0.5):
        for thickness in (0.25 * radius, 0.5 * radius, radius):
            family.add(ConvexBody.slab(normal, 0.0, thickness, radius), "thick-slab")
        family.add(_slab_around(bodies, everything, normal, delta, radius), "span-slab")
    return family


def _within_reach(family: CandidateFamily, reach: float = 2.0) -> CandidateFamily:
    """Drop candidates that cannot meet B(0, reach)."""
    kept = CandidateFamily(family.kind)
    for body, source in zip(family.bodies, family.sources):
        center, half_axes = body.frame()
        if np.linalg.norm(center) <= reach + np.linalg.norm(half_axes, axis=1).sum():
            kept.add(body, source)
    return kept


def explicit_candidates(bodies: Sequence[Candidate], kind: str = "convex", source: str = "explicit") -> CandidateFamily:
    family = CandidateFamily(kind)
    for body in bodies:
        family.add(body, source)
    if len(family) == 0:
        raise EmptyCandidatesError("Explicit candidate list is empty")
    return family
