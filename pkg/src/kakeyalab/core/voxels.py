"""Voxel grid, shadings and the exact column rasterizer."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from .errors import ExtentError, GridMismatchError, ResolutionError
from .geometry import Body, ConvexBody, Hull, as_body

GRID_LOW = -2.0
GRID_HIGH = 2.0
BLOCK = 16


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Cubic grid with cells of side h; cell (i, j, k) has center origin + (idx + 1/2)h."""

    h: float
    origin: np.ndarray
    extent: int

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "extent", int(self.extent))

    @classmethod
    def for_delta(cls, delta: float, cells_per_delta: float = 4.0) -> "VoxelGrid":
        """Grid over [-2, 2]³ with h = δ / cells_per_delta."""
        h = delta / cells_per_delta
        extent = int(np.ceil((GRID_HIGH - GRID_LOW) / h - 1e-9))
        return cls(h=h, origin=np.full(3, GRID_LOW), extent=extent)

    @classmethod
    def from_dict(cls, data: dict) -> "VoxelGrid":
        return cls(h=data["h"], origin=data["origin"], extent=data["extent"])

    def to_dict(self) -> dict:
        return {"h": self.h, "origin": self.origin.tolist(), "extent": self.extent}

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.extent * self.h

    def same_as(self, other: "VoxelGrid") -> bool:
        return (
            self.extent == other.extent
            and abs(self.h - other.h) <= 1e-15 * max(1.0, self.h)
            and np.allclose(self.origin, other.origin, atol=1e-15)
        )

    def check_resolution(self, thickness: float) -> None:
        """Raise unless h ≤ thickness / 2."""
        if self.h > thickness / 2.0 * (1.0 + 1e-12):
            raise ResolutionError(
                f"Grid cell h={self.h:.3g} is coarser than thickness/2={thickness / 2:.3g}",
                "Use a finer grid (h <= delta/2)",
            )

    def unravel(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        e = np.int64(self.extent)
        return np.stack([indices // (e * e), (indices // e) % e, indices % e], axis=1)

    def centers(self, indices: np.ndarray) -> np.ndarray:
        return self.origin + (self.unravel(indices) + 0.5) * self.h

    def ravel(self, ijk: np.ndarray) -> np.ndarray:
        ijk = np.asarray(ijk, dtype=np.int64)
        e = np.int64(self.extent)
        return (ijk[:, 0] * e + ijk[:, 1]) * e + ijk[:, 2]

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Linear index of the cell containing each point (points must be inside)."""
        ijk = np.floor((np.asarray(points, dtype=float) - self.origin) / self.h).astype(np.int64)
        ijk = np.clip(ijk, 0, self.extent - 1)
        return self.ravel(ijk)


@dataclass(frozen=True, eq=False)
class Shading:
    """Voxel subset Y of a body: sorted unique cell indices on a grid."""

    body_id: int
    voxels: np.ndarray
    grid: VoxelGrid
    error_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "voxels", np.asarray(self.voxels, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.voxels)

    def measure(self) -> float:
        return self.grid.cell_volume * len(self.voxels)

    def restricted(self, keep: np.ndarray) -> "Shading":
        """Sub-shading from a boolean mask over the voxels."""
        return Shading(self.body_id, self.voxels[keep], self.grid)

    def centers(self) -> np.ndarray:
        return self.grid.centers(self.voxels)

    def to_dict(self) -> dict:
        return {"tube": int(self.body_id), "voxels": encode_runs(self.voxels)}


# -- rasterization -------------------------------------------------------------


def _body_model(body: Union[ConvexBody, Hull]) -> dict:
    if isinstance(body, ConvexBody) and body.kind == "slab":
        return {
            "kind": "slab",
            "normal": body.axes[0],
            "offset": body.offset,
            "thickness": float(body.dims[0]),
            "radius": float(body.dims[1]),
        }
    center, half_axes = body.frame()
    ellipsoid = (isinstance(body, ConvexBody) and body.kind == "ellipsoid") or (
        isinstance(body, Hull) and body.shape == "ellipsoid"
    )
    return {
        "kind": "ellipsoid" if ellipsoid else "box",
        "center": center,
        "inv": np.linalg.inv(half_axes),
    }


def _aabb(body: Union[ConvexBody, Hull]):
    center, half_axes = body.frame()
    half = np.abs(half_axes).sum(axis=0)
    lo, hi = center - half, center + half
    if isinstance(body, ConvexBody) and body.kind == "slab":
        radius = body.dims[1]
        lo, hi = np.maximum(lo, -radius), np.minimum(hi, radius)
    return lo, hi


def _intervals(model: dict, points: np.ndarray, s: int, widen: float = 0.0):
    """Exact [t_lo, t_hi] of the line points + t·e_s inside the body.

    `points` have their s-coordinate set to 0. With widen > 0 the body is
    enlarged enough to contain every line within `widen` (in the other two
    coordinates) of the given ones.
    """
    n = len(points)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    others = [k for k in range(3) if k != s]

    if model["kind"] == "slab":
        normal = model["normal"]
        base = points @ normal - model["offset"]
        bound = model["thickness"] + widen * np.abs(normal[others]).sum()
        g = normal[s]
        if abs(g) < 1e-14:
            ok = np.abs(base) <= bound
            lo[~ok], hi[~ok] = np.inf, -np.inf
        else:
            a, b = (-bound - base) / g, (bound - base) / g
            lo, hi = np.maximum(lo, np.minimum(a, b)), np.minimum(hi, np.maximum(a, b))
        radius = model["radius"] + widen * np.sqrt(2.0)
        rest = radius**2 - np.einsum("ij,ij->i", points, points)
        root = np.sqrt(np.maximum(rest, 0.0))
        empty = rest < 0
        lo, hi = np.maximum(lo, -root), np.minimum(hi, root)
        lo[empty], hi[empty] = np.inf, -np.inf
        return lo, hi

    inv = model["inv"]
    y0 = (points - model["center"]) @ inv
    g = inv[s]
    if model["kind"] == "ellipsoid":
        radius = 1.0 + widen * (np.linalg.norm(inv[others[0]]) + np.linalg.norm(inv[others[1]]))
        qa = float(g @ g)
        qb = 2.0 * (y0 @ g)
        qc = np.einsum("ij,ij->i", y0, y0) - radius**2
        disc = qb**2 - 4.0 * qa * qc
        root = np.sqrt(np.maximum(disc, 0.0))
        lo, hi = (-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)
        empty = disc < 0
        lo[empty], hi[empty] = np.inf, -np.inf
        return lo, hi

    bound = 1.0 + widen * (np.abs(inv[others[0]]) + np.abs(inv[others[1]]))
    for k in range(3):
        if abs(g[k]) < 1e-14:
            bad = np.abs(y0[:, k]) > bound[k]
            lo[bad], hi[bad] = np.inf, -np.inf
            continue
        a = (-bound[k] - y0[:, k]) / g[k]
        b = (bound[k] - y0[:, k]) / g[k]
        lo = np.maximum(lo, np.minimum(a, b))
        hi = np.minimum(hi, np.maximum(a, b))
    return lo, hi


def _surface_area(body: Union[ConvexBody, Hull]) -> float:
    if isinstance(body, ConvexBody):
        a, b, c = body.dims
        if body.kind == "prism":
            return float(8.0 * (a * b + b * c + a * c))
        if body.kind == "ellipsoid":
            p = 1.6075
            mean = ((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3.0
            return float(4.0 * np.pi * mean ** (1.0 / p))
        return float(4.0 * np.pi * b**2 + 4.0 * np.pi * b * a)
    h = body.half_axes
    return float(
        8.0
        * (
            np.linalg.norm(np.cross(h[0], h[1]))
            + np.linalg.norm(np.cross(h[1], h[2]))
            + np.linalg.norm(np.cross(h[0], h[2]))
        )
    )


def voxelize(body: Body, grid: VoxelGrid, body_id: int = -1) -> Shading:
    """Voxels whose centers lie in the body.

    Columns are swept along the axis of largest extent; each column gets an
    exact interval and contributes a run of cells.

    Raises:
        ExtentError: If the body leaves the grid
    """
    body = as_body(body)
    lo, hi = _aabb(body)
    tol = 1e-9
    if np.any(lo < grid.origin - tol) or np.any(hi > grid.upper + tol):
        raise ExtentError(
            f"Body with bounding box {lo.round(4).tolist()}..{hi.round(4).tolist()} leaves the grid",
            "Keep bodies inside [-2, 2]^3",
        )
    model = _body_model(body)
    h, o, e = grid.h, grid.origin, grid.extent
    first = np.clip(np.ceil((lo - o) / h - 0.5 - 1e-12).astype(np.int64), 0, e - 1)
    last = np.clip(np.floor((hi - o) / h - 0.5 + 1e-12).astype(np.int64), 0, e - 1)
    error = _surface_area(body) * h
    if np.any(last < first):
        return Shading(body_id, np.zeros(0, dtype=np.int64), grid, error)

    s = int(np.argmax(hi - lo))
    p, q = [k for k in range(3) if k != s]
    strides = np.array([e * e, e, 1], dtype=np.int64)

    # Coarse blocks of columns are culled against a widened body first.
    block_p = np.arange(first[p], last[p] + 1, BLOCK)
    block_q = np.arange(first[q], last[q] + 1, BLOCK)
    bp, bq = np.meshgrid(block_p, block_q, indexing="ij")
    bp, bq = bp.ravel(), bq.ravel()
    span = BLOCK * h
    centers = np.zeros((len(bp), 3))
    centers[:, p] = o[p] + (bp + 0.5) * h + 0.5 * (span - h)
    centers[:, q] = o[q] + (bq + 0.5) * h + 0.5 * (span - h)
    blo, bhi = _intervals(model, centers, s, widen=0.5 * span)
    alive = bhi >= blo
    bp, bq = bp[alive], bq[alive]

    offsets = np.arange(BLOCK)
    cp = (bp[:, None, None] + offsets[None, :, None] + 0 * offsets[None, None, :]).ravel()
    cq = (bq[:, None, None] + 0 * offsets[None, :, None] + offsets[None, None, :]).ravel()
    inside = (cp <= last[p]) & (cq <= last[q])
    cp, cq = cp[inside], cq[inside]

    points = np.zeros((len(cp), 3))
    points[:, p] = o[p] + (cp + 0.5) * h
    points[:, q] = o[q] + (cq + 0.5) * h
    t_lo, t_hi = _intervals(model, points, s)
    k_lo = np.ceil((t_lo - o[s]) / h - 0.5 - 1e-12)
    k_hi = np.floor((t_hi - o[s]) / h - 0.5 + 1e-12)
    valid = np.isfinite(k_lo) & np.isfinite(k_hi) & (k_hi >= k_lo)
    k_lo = np.clip(k_lo[valid], 0, e - 1).astype(np.int64)
    k_hi = np.clip(k_hi[valid], 0, e - 1).astype(np.int64)
    cp, cq = cp[valid], cq[valid]
    counts = k_hi - k_lo + 1
    keep = counts > 0
    counts, k_lo, cp, cq = counts[keep], k_lo[keep], cp[keep], cq[keep]

    base = cp * strides[p] + cq * strides[q]
    total = int(counts.sum())
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    steps = np.arange(total, dtype=np.int64) - starts + np.repeat(k_lo, counts)
    voxels = np.sort(np.repeat(base, counts) + steps * strides[s])
    return Shading(body_id, voxels, grid, error)


def voxelize_many(
    bodies: Sequence[Body], grid: VoxelGrid, workers: int = 1, ids: Optional[Sequence[int]] = None
) -> List[Shading]:
    """Voxelize several bodies, optionally on a thread pool."""
    ids = list(range(len(bodies))) if ids is None else list(ids)
    if workers <= 1 or len(bodies) < 2:
        return [voxelize(body, grid, i) for body, i in zip(bodies, ids)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pair: voxelize(pair[0], grid, pair[1]), zip(bodies, ids)))


def union_of_bodies(bodies: Sequence[Body], grid: VoxelGrid, workers: int = 1, chunk: int = 16) -> np.ndarray:
    """Union of the bodies' voxels; only `chunk` bodies are voxelized at a time."""
    result = np.zeros(0, dtype=np.int64)
    for start in range(0, len(bodies), chunk):
        shadings = voxelize_many(bodies[start : start + chunk], grid, workers=workers)
        result = union_indices([result] + [s.voxels for s in shadings])
    return result


# -- set operations --------------------------------------------------------------


def check_same_grid(shadings: Iterable[Shading]) -> Optional[VoxelGrid]:
    grid = None
    for shading in shadings:
        if grid is None:
            grid = shading.grid
        elif not grid.same_as(shading.grid):
            raise GridMismatchError("Shadings live on different voxel grids")
    return grid


def union_indices(arrays: Iterable[np.ndarray], batch: int = 64) -> np.ndarray:
    """Sorted union of many index arrays, merged in batches."""
    result = np.zeros(0, dtype=np.int64)
    pending: List[np.ndarray] = []
    for array in arrays:
        pending.append(np.asarray(array, dtype=np.int64))
        if len(pending) >= batch:
            result = np.unique(np.concatenate([result] + pending))
            pending = []
    if pending:
        result = np.unique(np.concatenate([result] + pending))
    return result


def multiplicities(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Per-occupied-voxel counts of how many arrays contain it."""
    if not arrays:
        return np.zeros(0, dtype=np.int64)
    _, counts = np.unique(np.concatenate(arrays), return_counts=True)
    return counts


def essentially_distinct(U: Body, V: Body, grid: VoxelGrid) -> bool:
    """|U ∩ V| ≤ max(|U|, |V|) / 2, measured on the grid.

    Raises:
        ResolutionError: If h exceeds half the thinner body's thickness
    """
    thickness = min(_thickness(U), _thickness(V))
    grid.check_resolution(thickness)
    a = voxelize(U, grid).voxels
    b = voxelize(V, grid).voxels
    overlap = len(np.intersect1d(a, b, assume_unique=True))
    logger.debug(f"essentially_distinct: |U|={len(a)} |V|={len(b)} overlap={overlap}")
    return overlap <= 0.5 * max(len(a), len(b))


def _thickness(body: Body) -> float:
    body = as_body(body)
    if isinstance(body, Hull):
        return float(body.extents()[0])
    return float(body.dims[0])


# -- run-length codec ------------------------------------------------------------


def encode_runs(voxels: np.ndarray) -> List[List[int]]:
    """Sorted indices as [[start, length], ...] runs of consecutive values."""
    voxels = np.asarray(voxels, dtype=np.int64)
    if len(voxels) == 0:
        return []
    breaks = np.flatnonzero(np.diff(voxels) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(voxels)]])
    return [[int(voxels[a]), int(b - a)] for a, b in zip(starts, ends)]


def decode_runs(runs: Sequence[Sequence[int]]) -> np.ndarray:
    if not runs:
        return np.zeros(0, dtype=np.int64)
    runs = np.asarray(runs, dtype=np.int64)
    starts, lengths = runs[:, 0], runs[:, 1]
    offsets = np.arange(lengths.sum(), dtype=np.int64) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.repeat(starts, lengths) + offsets
