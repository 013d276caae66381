"""Tube and slab arrangements with planted structure, and their shadings."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError as SchemaError, field_validator

from .candidates import hemisphere_net
from .errors import ReportIOError, ValidationError
from .family import CoverLevel, TubeFamily
from .geometry import BodyArray, ConvexBody, DeltaTube, complete_frame, complete_frames, normalize
from .voxels import Shading, VoxelGrid, voxelize
from ..utils.validators import validate_delta

TUBE_KINDS = (
    "direction_separated",
    "sticky",
    "well_spaced",
    "besicovitch",
    "prism_clustered",
    "random",
    "coplanar_clusters",
    "parallel_disjoint",
    "bush",
    "hairbrush",
    "two_level",
)
SLAB_KINDS = ("parallel_slabs", "random_slabs", "slab_bush")
SHADING_MODES = ("full", "random", "two_ends")

# Per-kind parameters and their defaults.
KIND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "direction_separated": {"spacing": 2.0, "offset_radius": 0.45},
    "sticky": {"gamma": 0.4},
    "well_spaced": {"s_exponent": 0.625, "offset_radius": 0.45},
    "besicovitch": {"spread": 1.5, "low": 0.25, "high": 0.9},
    "prism_clustered": {"prisms": 20, "a": 4.0, "b": 64.0, "per_prism": 50, "tilt": 0.1, "background": 0},
    "random": {"count": 256, "offset_radius": 0.45},
    "coplanar_clusters": {"clusters": 8, "per_cluster": 32, "radius": 0.35},
    "parallel_disjoint": {"count": 64, "spacing": 4.0},
    "bush": {"count": 128, "reach": 0.4},
    "hairbrush": {"count": 128, "min_angle": 0.25, "reach": 0.4},
    "two_level": {"rho": 0.125, "outer": 16, "inner": 16},
    "parallel_slabs": {"count": 16, "spacing": 4.0},
    "random_slabs": {"count": 32, "offset": 0.25},
    "slab_bush": {"count": 32},
}


class FamilySpec(BaseModel):
    """One generated arrangement: kind, δ, per-kind parameters and seed."""

    kind: str = Field(description="Arrangement kind")
    delta: float = Field(description="Tube half-width (or slab half-thickness)")
    seed: int = Field(default=0, description="Random seed")
    params: Dict[str, Any] = Field(default_factory=dict, description="Kind-specific parameters")

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        if value not in TUBE_KINDS + SLAB_KINDS:
            raise ValueError(f"Unknown family kind: {value}. Available: {list(TUBE_KINDS + SLAB_KINDS)}")
        return value

    @field_validator("delta")
    @classmethod
    def _delta_range(cls, value: float) -> float:
        if not validate_delta(value):
            raise ValueError(f"delta={value} outside [2^-12, 2^-3]")
        return value

    def resolved(self) -> Dict[str, Any]:
        """Parameters merged over the kind defaults; unknown keys are rejected."""
        defaults = KIND_DEFAULTS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValidationError(
                f"Unknown parameters for {self.kind}: {sorted(unknown)}",
                f"Allowed: {sorted(defaults)}",
            )
        return {**defaults, **self.params}


@dataclass(eq=False)
class SlabFamily:
    """Congruent δ-slabs clipped to B(0, 1)."""

    slabs: List[ConvexBody]
    delta: float
    shadings: Dict[int, Shading] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.slabs)

    def bodies(self) -> BodyArray:
        return BodyArray.from_bodies(self.slabs)

    def with_shadings(self, shadings: Dict[int, Shading]) -> "SlabFamily":
        return SlabFamily(self.slabs, self.delta, shadings, self.metadata)

    def shading_list(self) -> List[Shading]:
        return [self.shadings[i] for i in sorted(self.shadings)]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "slabs": [S.to_dict() for S in self.slabs],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SlabFamily":
        return cls([ConvexBody.from_dict(S) for S in data["slabs"]], float(data["delta"]), metadata=data.get("metadata", {}))


def as_spec(spec: Union[FamilySpec, dict]) -> FamilySpec:
    if isinstance(spec, FamilySpec):
        return spec
    try:
        return FamilySpec(**spec)
    except SchemaError as e:
        raise ValidationError(f"Invalid family spec: {e.errors()[0]['msg']}")


# -- sampling helpers ---------------------------------------------------------------


def _ball_points(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    g = rng.normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]


def _hemisphere(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * np.where(g[:, 2] < 0, -1.0, 1.0)[:, None]


def tubes_inside(
    centers: np.ndarray,
    axes: np.ndarray,
    dims: np.ndarray,
    count: int,
    delta: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """`count` random δ-tubes inside each prism (shared half-dims, per-prism frames).

    Tilts and offsets are drawn so that the tube's bounding box stays
    inside the prism.

    Raises:
        ValidationError: If the prism is too thin for a δ-tube
    """
    dims = np.asarray(dims, dtype=float)
    margin = math.sqrt(2.0) * delta
    if np.any(dims[:2] <= margin) or dims[2] < 0.5 + margin:
        raise ValidationError(f"Prism half-dims {dims.tolist()} cannot hold a {delta}-tube")
    m = len(centers)
    tilt_cap = 1.8 * (dims[:2] - margin)
    tilts = (2.0 * rng.random((m, count, 2)) - 1.0) * tilt_cap
    local_dir = np.concatenate([tilts, np.ones((m, count, 1))], axis=2)
    local_dir /= np.linalg.norm(local_dir, axis=2, keepdims=True)
    room = dims - 0.5 * np.abs(local_dir) - margin
    room = np.maximum(room, 0.0)
    local_off = (2.0 * rng.random((m, count, 3)) - 1.0) * room
    anchors = centers[:, None, :] + np.einsum("mck,mkj->mcj", local_off, axes)
    directions = np.einsum("mck,mkj->mcj", local_dir, axes)
    return anchors.reshape(-1, 3), directions.reshape(-1, 3)


# -- tube kinds ------------------------------------------------------------------------------


def _direction_separated(delta, p, rng):
    directions = hemisphere_net(p["spacing"] * delta)
    anchors = _ball_points(rng, len(directions), p["offset_radius"])
    return anchors, directions, [], {}


def _sticky(delta, p, rng):
    """Four children per tube per halving; endpoints move by γw in the xy plane."""
    levels = int(round(math.log2(1.0 / delta)))
    if not math.isclose(2.0**-levels, delta, rel_tol=1e-9):
        raise ValidationError(f"sticky needs a dyadic delta, got {delta}")
    gamma = p["gamma"]
    bottoms = np.array([[0.0, 0.0, -0.5]])
    tops = np.array([[0.0, 0.0, 0.5]])
    sigma = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    tau = np.stack([-sigma[:, 1], sigma[:, 0]], axis=1)

    covers = []
    width = 1.0
    for level in range(levels):
        covers.append(_sticky_level(bottoms, tops, width, levels - level))
        shift_b = np.zeros((4, 3))
        shift_t = np.zeros((4, 3))
        shift_b[:, :2] = gamma * width * sigma
        shift_t[:, :2] = gamma * width * tau
        bottoms = (bottoms[:, None, :] + shift_b[None]).reshape(-1, 3)
        tops = (tops[:, None, :] + shift_t[None]).reshape(-1, 3)
        width /= 2.0
    anchors = 0.5 * (bottoms + tops)
    directions = tops - bottoms
    return anchors, directions, covers, {"levels": levels}


def _sticky_level(bottoms: np.ndarray, tops: np.ndarray, width: float, depth: int) -> CoverLevel:
    covers = []
    for bottom, top in zip(bottoms, tops):
        d = normalize(top - bottom)
        u = normalize(np.array([1.0, 0.0, 0.0]) - d[0] * d)
        v = np.cross(d, u)
        covers.append(ConvexBody(0.5 * (bottom + top), np.vstack([u, v, d]), (width, width, 0.5 + width)))
    leaves = len(bottoms) * 4**depth
    assignment = np.arange(leaves) // 4**depth
    return CoverLevel(width, covers, assignment)


def _well_spaced(delta, p, rng):
    s = delta ** p["s_exponent"]
    directions = hemisphere_net(s)
    radius = p["offset_radius"]
    steps = np.arange(-radius, radius + 1e-12, 2.0 * s)
    gx, gy = np.meshgrid(steps, steps, indexing="ij")
    lattice = np.stack([gx.ravel(), gy.ravel()], axis=1)
    lattice = lattice[np.linalg.norm(lattice, axis=1) <= radius]

    frames = complete_frames(directions)
    centers = (lattice[None, :, 0, None] * frames[:, None, 0, :] + lattice[None, :, 1, None] * frames[:, None, 1, :]).reshape(-1, 3)
    axes = np.repeat(frames, len(lattice), axis=0)
    dims = np.array([s, s, 0.5 + s])
    anchors, tube_dirs = tubes_inside(centers, axes, dims, 1, delta, rng)
    cover = CoverLevel(s, [ConvexBody(c, a, dims) for c, a in zip(centers, axes)], np.arange(len(centers)))
    return anchors, tube_dirs, [cover], {"s": s, "s_tubes": len(centers)}


def _besicovitch(delta, p, rng):
    """Perron tree in the xz-plane, one δ-tube per thin triangle.

    The base of a triangle is cut into 2^k pieces. Piece ε = (ε_1..ε_k) keeps
    its median slope spread·(Σ ε_j 2^-j - 1/2) and is slid left by
    spread·Σ ε_j 2^-j c_j, where the j-th bisection makes the two halves
    overlap at height c_j, spaced evenly from `low` to `high`.
    """
    k = int(round(math.log2(1.0 / delta)))
    if not math.isclose(2.0**-k, delta, rel_tol=1e-9):
        raise ValidationError(f"besicovitch needs delta = 2^-k, got {delta}")
    spread, low, high = float(p["spread"]), float(p["low"]), float(p["high"])
    if not 0.0 < spread <= 2.0 or not 0.0 <= low <= high <= 1.0:
        raise ValidationError(f"besicovitch needs 0 < spread <= 2 and 0 <= low <= high <= 1, got {spread}, {low}, {high}")
    index = np.arange(2**k)
    bits = (index[:, None] >> (k - 1 - np.arange(k))[None, :]) & 1
    weights = 2.0 ** -(np.arange(k) + 1.0)
    heights = np.linspace(low, high, k)
    slopes = spread * (bits @ weights - 0.5)
    shifts = -spread * (bits * heights) @ weights
    directions = np.stack([slopes, np.zeros_like(slopes), np.ones_like(slopes)], axis=1)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    # Each tube is centred at mid-height of its triangle.
    x = shifts + 0.5 * slopes
    x -= 0.5 * (x.max() + x.min())
    anchors = np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=1)
    return anchors, directions, [], {"depth": k, "plane_normal": [0.0, 1.0, 0.0]}


def _prism_clustered(delta, p, rng):
    n = int(p["prisms"])
    dims = np.array([0.5 * p["a"] * delta, 0.5 * p["b"] * delta, 1.0])
    reach = float(np.hypot(dims[0], dims[1])) + p["tilt"]
    spacing = max(0.5, 2.0 * reach + 0.05)
    cols = int(math.ceil(math.sqrt(1.25 * n)))
    rows = int(math.ceil(n / cols))
    half = 0.5 * spacing * (max(cols, rows) - 1) + reach
    if half > 1.9:
        raise ValidationError(f"{n} prisms of width {2 * dims[1]:.3g} do not fit the grid")
    xs = (np.arange(cols) - 0.5 * (cols - 1)) * spacing
    ys = (np.arange(rows) - 0.5 * (rows - 1)) * spacing
    slots = np.array([[x, y, 0.0] for y in ys for x in xs])[:n]

    prisms = []
    for center in slots:
        tilt = p["tilt"] * rng.random()
        azimuth = 2.0 * np.pi * rng.random()
        long_axis = normalize([math.sin(tilt) * math.cos(azimuth), math.sin(tilt) * math.sin(azimuth), math.cos(tilt)])
        roll = 2.0 * np.pi * rng.random()
        frame = complete_frame(long_axis)
        u = math.cos(roll) * frame[0] + math.sin(roll) * frame[1]
        prisms.append(ConvexBody(center, np.vstack([u, np.cross(long_axis, u), long_axis]), dims))

    centers = np.array([P.center for P in prisms])
    axes = np.array([P.axes for P in prisms])
    anchors, directions = tubes_inside(centers, axes, dims, int(p["per_prism"]), delta, rng)
    assignment = np.repeat(np.arange(n), int(p["per_prism"]))
    background = int(p["background"])
    if background:
        anchors = np.vstack([anchors, _ball_points(rng, background, 0.45)])
        directions = np.vstack([directions, _hemisphere(rng, background)])
        assignment = np.concatenate([assignment, np.full(background, -1)])
    meta = {"planted_prisms": [P.to_dict() for P in prisms], "background": background}
    return anchors, directions, [CoverLevel(float(dims[1]), prisms, assignment)], meta


def _random(delta, p, rng):
    count = int(p["count"])
    return _ball_points(rng, count, p["offset_radius"]), _hemisphere(rng, count), [], {}


def _coplanar_clusters(delta, p, rng):
    anchors, directions, planes = [], [], []
    for _ in range(int(p["clusters"])):
        normal = _hemisphere(rng, 1)[0]
        offset = 0.6 * rng.random() - 0.3
        frame = complete_frame(normal)
        count = int(p["per_cluster"])
        phi = np.pi * rng.random(count)
        dirs = np.cos(phi)[:, None] * frame[0] + np.sin(phi)[:, None] * frame[1]
        r = p["radius"] * np.sqrt(rng.random(count))
        psi = 2.0 * np.pi * rng.random(count)
        points = offset * normal + (r * np.cos(psi))[:, None] * frame[0] + (r * np.sin(psi))[:, None] * frame[1]
        anchors.append(points)
        directions.append(dirs)
        planes.append({"normal": normal.tolist(), "offset": offset})
    return np.vstack(anchors), np.vstack(directions), [], {"planes": planes}


def _parallel_disjoint(delta, p, rng):
    count = int(p["count"])
    side = int(math.ceil(math.sqrt(count)))
    step = p["spacing"] * delta
    coords = (np.arange(side) - 0.5 * (side - 1)) * step
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    anchors = np.stack([gx.ravel(), gy.ravel(), np.zeros(side * side)], axis=1)[:count]
    if np.abs(anchors).max() + delta > 1.5:
        raise ValidationError(f"{count} parallel tubes at spacing {step:.3g} leave the grid")
    directions = np.tile([0.0, 0.0, 1.0], (count, 1))
    return anchors, directions, [], {}


def _bush(delta, p, rng):
    count = int(p["count"])
    directions = _hemisphere(rng, count)
    s = p["reach"] * (2.0 * rng.random(count) - 1.0)
    return -s[:, None] * directions, directions, [], {"center": [0.0, 0.0, 0.0]}


def _hairbrush(delta, p, rng):
    count = int(p["count"])
    cos_theta = math.cos(p["min_angle"]) * rng.random(count)
    sin_theta = np.sqrt(1.0 - cos_theta**2)
    phi = 2.0 * np.pi * rng.random(count)
    directions = np.stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta], axis=1)
    feet = np.zeros((count, 3))
    feet[:, 2] = p["reach"] * (2.0 * rng.random(count) - 1.0)
    s = p["reach"] * (2.0 * rng.random(count) - 1.0)
    anchors = feet - s[:, None] * directions
    anchors = np.vstack([[0.0, 0.0, 0.0], anchors])
    directions = np.vstack([[0.0, 0.0, 1.0], directions])
    return anchors, directions, [], {"stem": 0}


def _two_level(delta, p, rng):
    rho, outer, inner = float(p["rho"]), int(p["outer"]), int(p["inner"])
    if not 2.0 * delta <= rho <= 0.25:
        raise ValidationError(f"two_level needs 2*delta <= rho <= 1/4, got rho={rho}")
    centers = _ball_points(rng, outer, 0.35)
    axes = complete_frames(_hemisphere(rng, outer))
    dims = np.array([rho, rho, 0.5 + rho])
    anchors, directions = tubes_inside(centers, axes, dims, inner, delta, rng)
    covers = [ConvexBody(c, a, dims) for c, a in zip(centers, axes)]
    return anchors, directions, [CoverLevel(rho, covers, np.repeat(np.arange(outer), inner))], {}


TUBE_BUILDERS: Dict[str, Callable] = {
    "direction_separated": _direction_separated,
    "sticky": _sticky,
    "well_spaced": _well_spaced,
    "besicovitch": _besicovitch,
    "prism_clustered": _prism_clustered,
    "random": _random,
    "coplanar_clusters": _coplanar_clusters,
    "parallel_disjoint": _parallel_disjoint,
    "bush": _bush,
    "hairbrush": _hairbrush,
    "two_level": _two_level,
}


# -- slab kinds ---------------------------------------------------------------------------------


def _slab_family(spec: FamilySpec, p: dict, rng: np.random.Generator) -> SlabFamily:
    delta, count = spec.delta, int(p["count"])
    if spec.kind == "parallel_slabs":
        offsets = (np.arange(count) - 0.5 * (count - 1)) * p["spacing"] * delta
        if np.abs(offsets).max() + delta > 1.0:
            raise ValidationError(f"{count} parallel slabs do not fit in B(0, 1)")
        slabs = [ConvexBody.slab([0.0, 0.0, 1.0], o, delta) for o in offsets]
    elif spec.kind == "random_slabs":
        normals = _hemisphere(rng, count)
        offsets = p["offset"] * (2.0 * rng.random(count) - 1.0)
        slabs = [ConvexBody.slab(n, o, delta) for n, o in zip(normals, offsets)]
    else:
        phi = np.pi * rng.random(count)
        slabs = [ConvexBody.slab([math.cos(t), math.sin(t), 0.0], 0.0, delta) for t in phi]
    return SlabFamily(slabs, delta, metadata={"kind": spec.kind, "seed": spec.seed, "params": p})


def generate_family(spec: Union[FamilySpec, dict]) -> Union[TubeFamily, SlabFamily]:
    """Build the arrangement a spec describes; the seed fully determines it.

    Raises:
        ValidationError: If the FamilySpec or its parameters are out of range
    """
    spec = as_spec(spec)
    params = spec.resolved()
    rng = np.random.default_rng(spec.seed)
    logger.info(f"Generating {spec.kind} family at delta={spec.delta:.4g} (seed {spec.seed})")
    if spec.kind in SLAB_KINDS:
        family = _slab_family(spec, params, rng)
        logger.info(f"Generated {len(family)} slabs")
        return family

    anchors, directions, covers, extra = TUBE_BUILDERS[spec.kind](spec.delta, params, rng)
    metadata = {"kind": spec.kind, "seed": spec.seed, "params": params, **extra}
    family = TubeFamily(anchors, directions, spec.delta, covers=covers, metadata=metadata)
    logger.info(f"Generated {len(family)} tubes with {len(covers)} planted cover levels")
    return family


# -- shadings ------------------------------------------------------------------------------------


def _axial(body, centers: np.ndarray) -> Tuple[np.ndarray, float]:
    """Coordinate of voxel centers along the body's long direction, with its half-range."""
    if isinstance(body, DeltaTube):
        return (centers - body.anchor) @ body.direction, 0.5
    if body.kind == "slab":
        return (centers - body.center) @ body.axes[1], float(body.dims[1])
    return (centers - body.center) @ body.direction, float(body.dims[2])


def shade_body(body, grid: VoxelGrid, body_id: int, mode: str, lam: float, seed: int) -> Shading:
    full = voxelize(body, grid, body_id)
    if mode == "full":
        return full
    rng = np.random.default_rng([seed, body_id])
    if mode == "random":
        return full.restricted(rng.random(len(full)) < lam)
    t, half = _axial(body, full.centers())
    start = -half + (2.0 * half) * (1.0 - lam) * rng.random()
    return full.restricted((t >= start) & (t <= start + 2.0 * half * lam))


def shade_family(
    family: Union[TubeFamily, SlabFamily],
    mode: str = "full",
    lam: float = 1.0,
    seed: int = 0,
    grid: Optional[VoxelGrid] = None,
    cells_per_delta: float = 4.0,
) -> Dict[int, Shading]:
    """Shadings for every body: the full body, an i.i.d. λ-thinning, or a λ-long piece.

    Raises:
        ValidationError: If the mode is unknown or λ is outside (0, 1]
    """
    if mode not in SHADING_MODES:
        raise ValidationError(f"Unknown shading mode: {mode}. Available: {list(SHADING_MODES)}")
    if not 0.0 < lam <= 1.0:
        raise ValidationError(f"lambda={lam} outside (0, 1]")
    grid = grid or VoxelGrid.for_delta(family.delta, cells_per_delta)
    bodies = family.slabs if isinstance(family, SlabFamily) else list(family)
    shadings = {i: shade_body(body, grid, i, mode, lam, seed) for i, body in enumerate(bodies)}
    mass = sum(len(s) for s in shadings.values()) * grid.cell_volume
    logger.debug(f"Shaded {len(shadings)} bodies ({mode}, lambda={lam}): total mass {mass:.4g}")
    return shadings


# -- persistence ---------------------------------------------------------------------------------


def save_family(family: Union[TubeFamily, SlabFamily], path: Path) -> Path:
    """Write a tube or slab family as JSON; slab files carry a "slabs" key."""
    if isinstance(family, TubeFamily):
        return family.save(path)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(family.to_dict()))
    except OSError as e:
        raise ReportIOError(f"Could not write family ({e})", path)
    logger.info(f"Family with {len(family)} slabs saved to: {path}")
    return path


def load_family(path: Path) -> Union[TubeFamily, SlabFamily]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ReportIOError(f"Could not read family ({e})", path)
    if "slabs" in data:
        return SlabFamily.from_dict(data)
    return TubeFamily.from_dict(data)
