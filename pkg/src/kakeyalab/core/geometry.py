"""Geometric primitives: tubes, convex bodies, rigid motions and containment.

All bodies are described by HALF-dimensions. A δ-tube is the box of
half-dimensions (δ, δ, 1/2) around its core segment, so |T| = 4δ².
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ValidationError

KINDS = ("prism", "ellipsoid", "slab")
MIN_DELTA = 2.0**-20
MAX_DELTA = 0.25
DEFAULT_SLACK = 0.01

# Sign patterns of the 8 vertices of a parallelepiped in frame coordinates.
VERTEX_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


def normalize(vector: Sequence[float]) -> np.ndarray:
    """Return the unit vector along `vector`.

    Raises:
        ValidationError: If the vector is (numerically) zero
    """
    v = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm < 1e-300:
        raise ValidationError(f"Cannot normalize vector {v.tolist()}")
    return v / norm


def complete_frame(direction: Sequence[float]) -> np.ndarray:
    """Deterministic orthonormal frame whose last row is `direction`.

    The first row is direction × e_k where e_k is the coordinate axis least
    aligned with the direction (first index on ties).
    """
    d = normalize(direction)
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(d)))] = 1.0
    e0 = normalize(np.cross(d, ref))
    e1 = np.cross(d, e0)
    return np.vstack([e0, e1, d])


def complete_frames(directions: np.ndarray) -> np.ndarray:
    """Vectorized `complete_frame` for an (N, 3) array of unit directions."""
    d = np.asarray(directions, dtype=float)
    ref = np.zeros_like(d)
    ref[np.arange(len(d)), np.argmin(np.abs(d), axis=1)] = 1.0
    e0 = np.cross(d, ref)
    e0 /= np.linalg.norm(e0, axis=1, keepdims=True)
    e1 = np.cross(d, e0)
    return np.stack([e0, e1, d], axis=1)


def plane_angle(normal_a: Sequence[float], normal_b: Sequence[float]) -> float:
    """Principal angle between two planes given by their unit normals."""
    c = abs(float(np.dot(normal_a, normal_b)))
    return float(np.arccos(min(1.0, c)))


def _sorted_frame(axes: np.ndarray, dims: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = sorted(range(3), key=lambda i: (dims[i], tuple(axes[i])))
    return axes[order], dims[order]


def _polish_rotation(axes: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(axes)
    return u @ vt


def clipped_slab_volume(offset: float, thickness: float, radius: float) -> float:
    """Exact volume of {|⟨x, n⟩ - offset| ≤ thickness} ∩ B(0, radius)."""
    lo = max(offset - thickness, -radius)
    hi = min(offset + thickness, radius)
    if hi <= lo:
        return 0.0
    primitive = lambda t: radius**2 * t - t**3 / 3.0  # noqa: E731
    return float(np.pi * (primitive(hi) - primitive(lo)))


def clipped_slab_support(
    normal: np.ndarray,
    offset: np.ndarray,
    thickness: np.ndarray,
    radius: np.ndarray,
    direction: np.ndarray,
) -> np.ndarray:
    """Support function max ⟨x, u⟩ over slab ∩ B(0, R), vectorized over slabs.

    Writing u = cos φ n + sin φ w with w ⊥ n, the maximum of
    t cos φ + sin φ √(R² - t²) over the admissible t-interval is attained at
    R cos φ clamped to that interval.
    """
    normal = np.atleast_2d(normal)
    u = np.broadcast_to(direction, normal.shape)
    cos_phi = np.clip(np.einsum("ij,ij->i", normal, u), -1.0, 1.0)
    sin_phi = np.sqrt(np.maximum(0.0, 1.0 - cos_phi**2))
    lo = np.maximum(offset - thickness, -radius)
    hi = np.minimum(offset + thickness, radius)
    t = np.clip(radius * cos_phi, lo, hi)
    return cos_phi * t + sin_phi * np.sqrt(np.maximum(0.0, radius**2 - t**2))


@dataclass(frozen=True, eq=False)
class DeltaTube:
    """δ-neighbourhood (square cross-section) of a unit segment.

    Attributes:
        anchor: Midpoint of the core segment
        direction: Unit direction of the core segment
        delta: Half-width of the square cross-section
    """

    anchor: np.ndarray
    direction: np.ndarray
    delta: float

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float).reshape(3)
        direction = normalize(self.direction)
        delta = float(self.delta)
        if not MIN_DELTA <= delta <= MAX_DELTA:
            raise ValidationError(
                f"delta={delta} outside [{MIN_DELTA}, {MAX_DELTA}]",
                "Tube thickness must lie in [2^-20, 1/4]",
            )
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "delta", delta)

    @property
    def endpoints(self) -> Tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.direction
        return self.anchor - half, self.anchor + half

    def volume(self) -> float:
        return 4.0 * self.delta**2

    def as_body(self) -> "ConvexBody":
        """The tube as a prism of half-dimensions (δ, δ, 1/2)."""
        return ConvexBody(
            center=self.anchor,
            axes=complete_frame(self.direction),
            dims=(self.delta, self.delta, 0.5),
            kind="prism",
        )

    def frame(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.as_body().frame()

    def to_dict(self) -> dict:
        return {"anchor": self.anchor.tolist(), "direction": self.direction.tolist()}


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Oriented prism, ellipsoid, or clipped slab.

    `axes` are rows, `dims` are half-dimensions sorted ascending. For a slab,
    axes[0] is the normal, dims = (a, R, R) and the body is
    {|⟨x - center, n⟩| ≤ a} ∩ B(0, R) with center the foot of the origin on
    the mid-plane.
    """

    center: np.ndarray
    axes: np.ndarray
    dims: np.ndarray
    kind: str = "prism"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"Unknown body kind: {self.kind}. Available: {list(KINDS)}")
        center = np.asarray(self.center, dtype=float).reshape(3)
        axes = np.asarray(self.axes, dtype=float).reshape(3, 3)
        dims = np.asarray(self.dims, dtype=float).reshape(3)
        if np.any(dims <= 0) or not np.all(np.isfinite(dims)):
            raise ValidationError(f"Body dimensions must be positive, got {dims.tolist()}")
        if np.abs(axes @ axes.T - np.eye(3)).max() > 1e-6:
            raise ValidationError("Body axes are not orthonormal")
        axes = _polish_rotation(axes)
        if self.kind == "slab":
            normal = axes[0]
            center = float(np.dot(center, normal)) * normal
            rest = complete_frame(normal)
            axes = np.vstack([normal, rest[0], rest[1]])
            dims = np.array([dims[0], dims[1], dims[1]])
        else:
            axes, dims = _sorted_frame(axes, dims)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def slab(
        cls, normal: Sequence[float], offset: float, thickness: float, radius: float = 1.0
    ) -> "ConvexBody":
        """N_thickness(H) ∩ B(0, radius) for the plane H = {⟨x, n⟩ = offset}."""
        n = normalize(normal)
        if thickness > radius:
            raise ValidationError("Slab thickness must not exceed its clipping radius")
        frame = complete_frame(n)
        return cls(
            center=offset * n,
            axes=np.vstack([n, frame[0], frame[1]]),
            dims=(thickness, radius, radius),
            kind="slab",
        )

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "ConvexBody":
        return cls(center=center, axes=np.eye(3), dims=(radius,) * 3, kind="ellipsoid")

    @property
    def direction(self) -> np.ndarray:
        """dir(W): the axis of the largest dimension."""
        return self.axes[2]

    @property
    def plane_normal(self) -> np.ndarray:
        """Normal of Π(W), the plane of the two longest axes."""
        return self.axes[0]

    @property
    def offset(self) -> float:
        return float(np.dot(self.center, self.axes[0]))

    def volume(self) -> float:
        a, b, c = self.dims
        if self.kind == "prism":
            return float(8.0 * a * b * c)
        if self.kind == "ellipsoid":
            return float(4.0 * np.pi / 3.0 * a * b * c)
        return clipped_slab_volume(self.offset, a, b)

    def frame(self) -> Tuple[np.ndarray, np.ndarray]:
        """Bounding parallelepiped as (center, half-axis rows)."""
        return self.center, self.dims[:, None] * self.axes

    def vertices(self) -> np.ndarray:
        center, half_axes = self.frame()
        return center + VERTEX_SIGNS @ half_axes

    def local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.center) @ self.axes.T

    def contains_points(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        """Membership of points in the (1 + slack)-dilate of the body."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        scale = 1.0 + slack
        if self.kind == "slab":
            dist = np.abs((points - self.center) @ self.axes[0])
            radius = np.linalg.norm(points, axis=1)
            return (dist <= self.dims[0] * scale) & (radius <= self.dims[1] * scale)
        loc = self.local(points) / self.dims
        if self.kind == "prism":
            return np.all(np.abs(loc) <= scale, axis=1)
        return np.einsum("ij,ij->i", loc, loc) <= scale**2

    def support(self, direction: Sequence[float]) -> float:
        """max ⟨x, u⟩ over the body."""
        u = np.asarray(direction, dtype=float)
        if self.kind == "slab":
            return float(
                clipped_slab_support(
                    self.axes[0][None, :],
                    np.array([self.offset]),
                    np.array([self.dims[0]]),
                    np.array([self.dims[1]]),
                    u,
                )[0]
            )
        proj = self.dims * (self.axes @ u)
        base = float(np.dot(self.center, u))
        if self.kind == "prism":
            return base + float(np.abs(proj).sum())
        return base + float(np.linalg.norm(proj))

    def dilate(self, factor: float) -> "ConvexBody":
        """R-fold dilate about the center (a slab keeps its clipping ball)."""
        if factor < 1.0:
            raise ValidationError(f"Dilation factor must be >= 1, got {factor}")
        if self.kind == "slab":
            return ConvexBody.slab(
                self.axes[0], self.offset, min(self.dims[0] * factor, self.dims[1]), self.dims[1]
            )
        return ConvexBody(self.center, self.axes, self.dims * factor, self.kind)

    def neighborhood(self, radius: float) -> "ConvexBody":
        """N_r: adds r to every half-dimension (an outer approximation for ellipsoids)."""
        if radius < 0:
            raise ValidationError(f"Neighbourhood radius must be >= 0, got {radius}")
        if self.kind == "slab":
            a, big = self.dims[0] + radius, self.dims[1] + radius
            return ConvexBody.slab(self.axes[0], self.offset, min(a, big), big)
        return ConvexBody(self.center, self.axes, self.dims + radius, self.kind)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "axes": self.axes.tolist(),
            "dims": self.dims.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexBody":
        return cls(
            center=data["center"], axes=data["axes"], dims=data["dims"], kind=data.get("kind", "prism")
        )


@dataclass(frozen=True, eq=False)
class Hull:
    """Affine image of a body: a parallelepiped (or ellipsoid) with explicit volume.

    Produced by rescale_phi; rows of `half_axes` need not be orthogonal.
    """

    center: np.ndarray
    half_axes: np.ndarray
    volume_value: float
    shape: str = "box"

    def volume(self) -> float:
        return float(self.volume_value)

    def frame(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.center, self.half_axes

    def vertices(self) -> np.ndarray:
        return self.center + VERTEX_SIGNS @ self.half_axes

    def extents(self) -> np.ndarray:
        """Sorted lengths of the half-axis rows."""
        return np.sort(np.linalg.norm(self.half_axes, axis=1))

    def contains_points(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        coords = (points - self.center) @ np.linalg.inv(self.half_axes)
        if self.shape == "ellipsoid":
            return np.einsum("ij,ij->i", coords, coords) <= (1.0 + slack) ** 2
        return np.all(np.abs(coords) <= 1.0 + slack, axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": f"hull-{self.shape}",
            "center": self.center.tolist(),
            "half_axes": self.half_axes.tolist(),
            "volume": self.volume_value,
        }


Body = Union[DeltaTube, ConvexBody, Hull]


def as_body(obj: Body) -> Union[ConvexBody, Hull]:
    return obj.as_body() if isinstance(obj, DeltaTube) else obj


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """x ↦ Rx + t, with the largest displacement over the corners of [-1, 1]³."""

    rotation: np.ndarray
    translation: np.ndarray
    displacement_bound: float = field(default=-1.0)

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(rotation @ rotation.T - np.eye(3)).max() > 1e-10:
            raise ValidationError("Rotation matrix is not orthogonal")
        if abs(np.linalg.det(rotation) - 1.0) > 1e-10:
            raise ValidationError("Rotation matrix must have determinant +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)
        measured = self.corner_displacement()
        if self.displacement_bound < measured - 1e-12:
            object.__setattr__(self, "displacement_bound", measured)

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls(np.eye(3), np.zeros(3), 0.0)

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float], translation: Sequence[float]) -> "RigidMotion":
        """exp of the skew matrix of `rotvec`, followed by a translation."""
        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix(), translation)

    def corner_displacement(self) -> float:
        corners = VERTEX_SIGNS
        moved = corners @ self.rotation.T + self.translation
        return float(np.linalg.norm(moved - corners, axis=1).max())

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def apply_directions(self, directions: np.ndarray) -> np.ndarray:
        return np.asarray(directions, dtype=float) @ self.rotation.T

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "displacement_bound": self.displacement_bound,
        }


# -- containment -------------------------------------------------------------


def _slab_params(body: ConvexBody) -> Tuple[np.ndarray, float, float, float]:
    return body.axes[0], body.offset, float(body.dims[0]), float(body.dims[1])


def contains_body(inner: Body, outer: Body, slack: float = DEFAULT_SLACK) -> bool:
    """Whether `inner` lies in `outer` dilated by (1 + slack).

    Every vertex of the inner bounding parallelepiped is tested, except for a
    slab inside a slab, where the exact support of the clipped slab is used.
    """
    if not 0.0 <= slack <= 0.1:
        raise ValidationError(f"slack={slack} outside [0, 0.1]")
    return bool(BodyArray.from_bodies([inner]).contained_in(as_body(outer), slack)[0])


class BodyArray:
    """Struct-of-arrays view of many bodies for vectorized containment."""

    def __init__(
        self,
        centers: np.ndarray,
        half_axes: np.ndarray,
        volumes: np.ndarray,
        slab: Optional[dict] = None,
    ):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        self.half_axes = np.asarray(half_axes, dtype=float).reshape(-1, 3, 3)
        self.volumes = np.asarray(volumes, dtype=float).reshape(-1)
        n = len(self.centers)
        self.slab = slab or {
            "mask": np.zeros(n, dtype=bool),
            "normal": np.zeros((n, 3)),
            "offset": np.zeros(n),
            "thickness": np.zeros(n),
            "radius": np.zeros(n),
        }

    def __len__(self) -> int:
        return len(self.centers)

    @classmethod
    def from_tubes(cls, anchors: np.ndarray, directions: np.ndarray, delta: float) -> "BodyArray":
        frames = complete_frames(np.asarray(directions, dtype=float))
        scale = np.array([delta, delta, 0.5])
        half_axes = frames * scale[None, :, None]
        volumes = np.full(len(frames), 4.0 * delta**2)
        return cls(anchors, half_axes, volumes)

    @classmethod
    def from_bodies(cls, bodies: Iterable[Body]) -> "BodyArray":
        bodies = [as_body(b) for b in bodies]
        n = len(bodies)
        centers = np.zeros((n, 3))
        half_axes = np.zeros((n, 3, 3))
        volumes = np.zeros(n)
        slab = {
            "mask": np.zeros(n, dtype=bool),
            "normal": np.zeros((n, 3)),
            "offset": np.zeros(n),
            "thickness": np.zeros(n),
            "radius": np.zeros(n),
        }
        for i, body in enumerate(bodies):
            centers[i], half_axes[i] = body.frame()
            volumes[i] = body.volume()
            if isinstance(body, ConvexBody) and body.kind == "slab":
                normal, offset, thickness, radius = _slab_params(body)
                slab["mask"][i] = True
                slab["normal"][i] = normal
                slab["offset"][i] = offset
                slab["thickness"][i] = thickness
                slab["radius"][i] = radius
        return cls(centers, half_axes, volumes, slab)

    def subset(self, idx: np.ndarray) -> "BodyArray":
        idx = np.asarray(idx)
        return BodyArray(
            self.centers[idx],
            self.half_axes[idx],
            self.volumes[idx],
            {key: value[idx] for key, value in self.slab.items()},
        )

    def vertices(self, idx: Optional[np.ndarray] = None) -> np.ndarray:
        """(N, 8, 3) vertex array of the bounding parallelepipeds."""
        centers = self.centers if idx is None else self.centers[idx]
        half_axes = self.half_axes if idx is None else self.half_axes[idx]
        return centers[:, None, :] + np.einsum("vj,njk->nvk", VERTEX_SIGNS, half_axes)

    def directions(self) -> np.ndarray:
        """Longest half-axis of each body, normalized."""
        lengths = np.linalg.norm(self.half_axes, axis=2)
        longest = self.half_axes[np.arange(len(self)), np.argmax(lengths, axis=1)]
        return longest / np.linalg.norm(longest, axis=1, keepdims=True)

    def support(self, direction: np.ndarray, idx: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-body max ⟨x, u⟩ over the bounding parallelepipeds."""
        centers = self.centers if idx is None else self.centers[idx]
        half_axes = self.half_axes if idx is None else self.half_axes[idx]
        return centers @ direction + np.abs(half_axes @ direction).sum(axis=1)

    def transformed(self, matrix: np.ndarray, origin: np.ndarray, volume_scale: float) -> "BodyArray":
        """Image under x ↦ M(x - origin); slab metadata is dropped."""
        return BodyArray(
            (self.centers - origin) @ matrix.T,
            self.half_axes @ matrix.T,
            self.volumes * volume_scale,
        )

    def contained_in(
        self, outer: Union[ConvexBody, Hull], slack: float = DEFAULT_SLACK, idx: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Boolean mask: which bodies (of `idx`, default all) lie in the (1+slack)-dilate of `outer`."""
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        if len(idx) == 0:
            return np.zeros(0, dtype=bool)
        scale = 1.0 + slack
        centers = self.centers[idx]
        half_axes = self.half_axes[idx]

        if isinstance(outer, ConvexBody) and outer.kind == "slab":
            return self._contained_in_slab(outer, idx, scale)

        out_center, out_half = outer.frame()
        inv = np.linalg.inv(out_half)
        ellipsoid = (isinstance(outer, ConvexBody) and outer.kind == "ellipsoid") or (
            isinstance(outer, Hull) and outer.shape == "ellipsoid"
        )
        if ellipsoid:
            coords = (self.vertices(idx) - out_center) @ inv
            return np.all(np.einsum("nvk,nvk->nv", coords, coords) <= scale**2, axis=1)

        t = (centers - out_center) @ inv
        spread = np.abs(half_axes @ inv).sum(axis=1)
        return np.all(np.abs(t) + spread <= scale, axis=1)

    def _contained_in_slab(self, outer: ConvexBody, idx: np.ndarray, scale: float) -> np.ndarray:
        normal, offset, thickness, radius = _slab_params(outer)
        result = np.zeros(len(idx), dtype=bool)
        is_slab = self.slab["mask"][idx]

        boxes = idx[~is_slab]
        if len(boxes):
            verts = self.vertices(boxes)
            dist = np.abs(verts @ normal - offset)
            norms = np.linalg.norm(verts, axis=2)
            result[~is_slab] = np.all(dist <= thickness * scale, axis=1) & np.all(
                norms <= radius * scale, axis=1
            )

        slabs = idx[is_slab]
        if len(slabs):
            args = (
                self.slab["normal"][slabs],
                self.slab["offset"][slabs],
                self.slab["thickness"][slabs],
                self.slab["radius"][slabs],
            )
            upper = clipped_slab_support(*args, normal)
            lower = -clipped_slab_support(*args, -normal)
            result[is_slab] = (
                (upper <= offset + thickness * scale)
                & (lower >= offset - thickness * scale)
                & (self.slab["radius"][slabs] <= radius * scale)
            )
        return result


# -- anisotropic rescaling ---------------------------------------------------


def phi_matrix(W: ConvexBody) -> Tuple[np.ndarray, np.ndarray]:
    """Linear part M and origin c of φ_W(x) = M(x - c).

    Prisms and slabs map their frame onto [-1/2, 1/2]³ (unit volume);
    ellipsoids map onto the unit ball. Axis i of W goes to coordinate i, so
    coordinates are ordered by axis length.
    """
    if W.dims[0] <= 0:
        raise ValidationError("Cannot rescale by a degenerate body")
    if W.kind == "ellipsoid":
        scale = 1.0 / W.dims
    else:
        scale = 1.0 / (2.0 * W.dims)
    return scale[:, None] * W.axes, W.center


def rescale_phi(W: ConvexBody, target: Union[Body, np.ndarray], inverse: bool = False):
    """Apply φ_W (or its inverse) to a point array or a body.

    Bodies come back as `Hull` objects carrying the exact image volume.
    """
    matrix, origin = phi_matrix(W)
    if inverse:
        inv = np.linalg.inv(matrix)
        if isinstance(target, np.ndarray):
            return np.asarray(target, dtype=float) @ inv.T + origin
        body = as_body(target)
        center, half_axes = body.frame()
        shape = "ellipsoid" if _is_ellipsoid(body) else "box"
        return Hull(center @ inv.T + origin, half_axes @ inv.T, body.volume() / abs(np.linalg.det(matrix)), shape)

    if isinstance(target, np.ndarray) or isinstance(target, (list, tuple)):
        return (np.asarray(target, dtype=float) - origin) @ matrix.T
    body = as_body(target)
    center, half_axes = body.frame()
    shape = "ellipsoid" if _is_ellipsoid(body) else "box"
    return Hull(
        (center - origin) @ matrix.T,
        half_axes @ matrix.T,
        body.volume() * abs(np.linalg.det(matrix)),
        shape,
    )


def _is_ellipsoid(body: Union[ConvexBody, Hull]) -> bool:
    if isinstance(body, Hull):
        return body.shape == "ellipsoid"
    return body.kind == "ellipsoid"


def rescale_array(W: ConvexBody, bodies: BodyArray) -> BodyArray:
    """φ_W applied to every body of an array."""
    matrix, origin = phi_matrix(W)
    return bodies.transformed(matrix, origin, abs(np.linalg.det(matrix)))


def dilate(body: Body, factor: float) -> ConvexBody:
    body = as_body(body)
    if isinstance(body, Hull):
        raise ValidationError("Dilation is defined for tubes and convex bodies only")
    return body.dilate(factor)


def neighborhood(body: Body, radius: float) -> ConvexBody:
    body = as_body(body)
    if isinstance(body, Hull):
        raise ValidationError("Neighbourhoods are defined for tubes and convex bodies only")
    return body.neighborhood(radius)


# -- bounding prisms ---------------------------------------------------------


def bounding_prism(bodies: BodyArray, idx: Optional[np.ndarray] = None, roll_steps: int = 24) -> ConvexBody:
    """Oriented bounding prism of a group of bodies.

    The long axis comes from the principal axis of the vertex cloud; the
    roll about it is chosen to minimise the cross-section area.
    """
    idx = np.arange(len(bodies)) if idx is None else np.asarray(idx)
    points = bodies.vertices(idx).reshape(-1, 3)
    centered = points - points.mean(axis=0)
    _, vectors = np.linalg.eigh(centered.T @ centered)
    long_axis = vectors[:, 2]
    base = complete_frame(long_axis)

    best = None
    for theta in np.linspace(0.0, np.pi / 2, roll_steps, endpoint=False):
        u = np.cos(theta) * base[0] + np.sin(theta) * base[1]
        v = np.cross(long_axis, u)
        axes = np.vstack([u, v, long_axis])
        hi = np.array([bodies.support(axis, idx).max() for axis in axes])
        lo = np.array([-bodies.support(-axis, idx).max() for axis in axes])
        area = (hi[0] - lo[0]) * (hi[1] - lo[1])
        if best is None or area < best[0] - 1e-15:
            best = (area, axes, hi, lo)

    _, axes, hi, lo = best
    half = np.maximum(0.5 * (hi - lo), 1e-12)
    center = (0.5 * (hi + lo)) @ axes
    return ConvexBody(center=center, axes=axes, dims=half, kind="prism")


def tube_prism(anchor: Sequence[float], direction: Sequence[float], half_width: float, half_length: float) -> ConvexBody:
    """Square prism around a segment: the shape of ρ-tubes used in covers."""
    return ConvexBody(
        center=anchor,
        axes=complete_frame(direction),
        dims=(half_width, half_width, half_length),
        kind="prism",
    )
