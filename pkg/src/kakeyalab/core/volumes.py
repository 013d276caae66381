"""Union volumes and the volume inequalities measured against them.

Every report carries its constants together with where each came from:
`measured` on the family, given in the `config`, or a fixed `calibrated`
desk constant.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from .errors import ValidationError
from .family import TubeFamily
from .geometry import DEFAULT_SLACK, BodyArray, ConvexBody, DeltaTube, plane_angle
from .voxels import Shading, check_same_grid, multiplicities, union_indices, union_of_bodies, voxelize
from .wolff import family_constant, members_of

FLAVORS = ("D", "E", "F")

VOLUME_DEFAULTS = {
    "kappa": 0.01,
    "hairbrush_epsilon": 0.1,
    "hypothesis_exponent": 0.1,
    "doubling_epsilon": 0.5,
    "max_prisms": 512,
    "workers": 1,
}


def constant(value: float, source: str) -> dict:
    return {"value": float(value), "source": source}


@dataclass(frozen=True)
class KakeyaEstimateParams:
    """σ, ω, ε, κ, η of the volume assertions."""

    sigma: float = 0.0
    omega: float = 0.0
    epsilon: float = 0.1
    kappa: float = 0.01
    eta: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 2.0 / 3.0:
            raise ValidationError(f"sigma={self.sigma} outside [0, 2/3]")
        if self.omega < 0:
            raise ValidationError(f"omega must be >= 0, got {self.omega}")
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kappa <= 0 or self.eta <= 0:
            raise ValidationError("kappa and eta must be positive")


@dataclass
class InequalityReport:
    """lhs against rhs, with the provenance of every constant used."""

    name: str
    delta: float
    lhs: float
    rhs: float
    passed: Optional[bool]
    threshold: str = "lhs >= rhs"
    constants: Dict[str, dict] = field(default_factory=dict)
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return math.inf
        return self.lhs / self.rhs

    def provenance(self) -> str:
        return ";".join(f"{k}={v['source']}" for k, v in sorted(self.constants.items()))

    def to_row(self) -> dict:
        return {
            "name": self.name,
            "delta": self.delta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "passed": self.passed,
            "provenance": self.provenance(),
        }

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "delta": self.delta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "threshold": self.threshold,
            "passed": self.passed,
            "constants": self.constants,
            "details": self.details,
        }


@dataclass
class UnionVolume:
    volume: float
    error_bound: float
    voxels: int
    mass: float

    def to_dict(self) -> dict:
        return {"volume": self.volume, "error_bound": self.error_bound, "voxels": self.voxels, "mass": self.mass}


def _shadings(obj: Union[TubeFamily, Sequence[Shading]]) -> List[Shading]:
    if isinstance(obj, TubeFamily):
        if not obj.shadings:
            raise ValidationError("Family carries no shadings", "Run shade_family first")
        return obj.shading_list()
    return list(obj)


def union_volume(shadings: Union[TubeFamily, Sequence[Shading]]) -> UnionVolume:
    """|∪Y| = h³ · #(union of voxel sets), exact on the grid.

    Raises:
        GridMismatchError: If the shadings live on different grids
    """
    shadings = _shadings(shadings)
    grid = check_same_grid(shadings)
    if grid is None:
        return UnionVolume(0.0, 0.0, 0, 0.0)
    union = union_indices(s.voxels for s in shadings)
    mass = grid.cell_volume * sum(len(s) for s in shadings)
    error = sum(s.error_bound for s in shadings)
    return UnionVolume(grid.cell_volume * len(union), float(error), int(len(union)), float(mass))


def l2_union_bound(shadings: Sequence[Shading]) -> float:
    """(Σ|Y|)² / ‖Σ χ_Y‖₂², the Cauchy-Schwarz lower bound on |∪Y|."""
    grid = check_same_grid(shadings)
    if grid is None:
        return 0.0
    counts = multiplicities([s.voxels for s in shadings]).astype(float)
    if len(counts) == 0:
        return 0.0
    mass = counts.sum() * grid.cell_volume
    return float(mass**2 / (grid.cell_volume * np.square(counts).sum()))


# -- slabs ----------------------------------------------------------------------------


def cordoba_check(
    slabs: Sequence[ConvexBody],
    shadings: Sequence[Shading],
    lam: Optional[float] = None,
    m: Optional[float] = None,
    options: Optional[dict] = None,
) -> InequalityReport:
    """|∪Y(S)| against (1/100)|log₂ δ|⁻¹ m⁻¹ λ² (#𝒮)|S| for congruent slabs.

    δ is the slab half-thickness; m defaults to the measured Katz-Tao
    constant over slab candidates and λ to the measured density.
    """
    opts = {**VOLUME_DEFAULTS, **(options or {})}
    if not slabs:
        raise ValidationError("cordoba_check needs at least one slab")
    if len(shadings) != len(slabs):
        raise ValidationError("One shading per slab is required")
    dims = np.array([S.dims for S in slabs])
    if np.abs(dims - dims[0]).max() > 1e-9 * dims[0].max():
        raise ValidationError("Slabs must be congruent")
    delta = float(dims[0, 0])
    volume = float(np.mean([S.volume() for S in slabs]))

    measured = union_volume(shadings)
    constants = {"kappa": constant(opts["kappa"], "calibrated")}
    if lam is None:
        lam = min(1.0, measured.mass / (volume * len(slabs)))
        constants["lambda"] = constant(lam, "measured")
    else:
        constants["lambda"] = constant(lam, "config")
    if m is None:
        m = family_constant(BodyArray.from_bodies(slabs), delta, "katz_tao", "slab", opts).constant
        m = max(m, 1.0)
        constants["m"] = constant(m, "measured")
    else:
        constants["m"] = constant(m, "config")

    rhs = opts["kappa"] / abs(math.log2(delta)) / m * lam**2 * len(slabs) * volume
    l2 = l2_union_bound(shadings)
    logger.debug(f"Cordoba: |∪Y|={measured.volume:.4g}, rhs={rhs:.4g}, L2 bound={l2:.4g}")
    return InequalityReport(
        "cordoba",
        delta,
        measured.volume,
        rhs,
        measured.volume >= rhs,
        constants=constants,
        details={"l2_bound": l2, "slabs": len(slabs), "slab_volume": volume, "union": measured.to_dict()},
    )


# -- assertions D / E / F -------------------------------------------------------------------


def _prism_dims(bodies: Sequence[ConvexBody]) -> np.ndarray:
    dims = np.array([P.dims for P in bodies])
    if np.abs(dims - dims[0]).max() > 1e-9 * dims[0].max():
        raise ValidationError("Flavor F needs congruent prisms")
    return dims[0]


def d_quantity(
    prisms: Sequence[ConvexBody],
    a: Optional[float] = None,
    b: Optional[float] = None,
    options: Optional[dict] = None,
) -> dict:
    """max over P, dyadic ρ ∈ [a, b] of |P|/|N_ρ(P)| · (#𝒫[N_ρ(P)])^{1/2}."""
    opts = {**VOLUME_DEFAULTS, **(options or {})}
    if not prisms:
        raise ValidationError("d_quantity needs at least one prism")
    dims = np.array([P.dims for P in prisms])
    a = float(dims[:, 0].min()) if a is None else a
    b = float(dims[:, 1].max()) if b is None else b
    if not 0 < a <= b:
        raise ValidationError(f"Need 0 < a <= b, got a={a}, b={b}")
    bodies = BodyArray.from_bodies(prisms)
    tree = cKDTree(bodies.centers)
    slack = float(opts.get("slack", DEFAULT_SLACK))

    n = len(prisms)
    limit = int(opts["max_prisms"])
    sample = np.arange(n)
    if n > limit:
        sample = np.sort(np.random.default_rng(int(opts.get("seed", 0))).choice(n, size=limit, replace=False))

    scales = []
    rho = a
    while rho <= b * (1 + 1e-12):
        scales.append(rho)
        rho *= 2.0
    best = {"D": 0.0, "prism": -1, "rho": a, "count": 0}
    for i in sample.tolist():
        P = prisms[i]
        for rho in scales:
            hood = P.neighborhood(rho)
            count = len(members_of(bodies, hood, slack, tree))
            value = P.volume() / hood.volume() * math.sqrt(count)
            if value > best["D"]:
                best = {"D": value, "prism": i, "rho": rho, "count": count}
    best["sampled"] = bool(n > limit)
    return best


def kakeya_bound_report(
    family: Union[TubeFamily, Sequence[ConvexBody]],
    params: KakeyaEstimateParams,
    flavor: str = "D",
    shadings: Optional[Sequence[Shading]] = None,
    m: Optional[float] = None,
    ell: Optional[float] = None,
    options: Optional[dict] = None,
) -> InequalityReport:
    """Right-hand sides of the D, E and F volume assertions against |∪Y|.

    Report-only: `passed` is always None.

    D: κ δ^{ω+ε} (#𝕋)|T| ((#𝕋)|T|^{1/2})^{-σ}
    E: κ δ^{ω+ε} m⁻¹ (#𝕋)|T| (m^{-3/2} ℓ (#𝕋)|T|^{1/2})^{-σ}
    F: κ a^ε b^ω m⁻¹ (#𝒫)|P| (m^{-3/2} ℓ (#𝒫)|P|^{1/2})^{-σ} D^{-σ}
    """
    if flavor not in FLAVORS:
        raise ValidationError(f"Unknown flavor: {flavor}. Available: {list(FLAVORS)}")
    opts = dict(options or {})
    if isinstance(family, TubeFamily):
        if flavor == "F":
            raise ValidationError("Flavor F needs a×b×1 prisms, not tubes")
        bodies = family.bodies()
        delta = family.delta
        shadings = family.shading_list() if shadings is None else list(shadings)
        count, unit = len(family), family.tube_volume
    else:
        prisms = list(family)
        bodies = BodyArray.from_bodies(prisms)
        dims = _prism_dims(prisms)
        delta = float(dims[0])
        count, unit = len(prisms), float(prisms[0].volume())
        if shadings is None:
            raise ValidationError("Prism families need explicit shadings")
    lhs = union_volume(shadings)

    constants = {
        "sigma": constant(params.sigma, "config"),
        "omega": constant(params.omega, "config"),
        "epsilon": constant(params.epsilon, "config"),
        "kappa": constant(params.kappa, "config"),
    }
    if m is None:
        m = family_constant(bodies, delta, "katz_tao", "convex", opts).constant
        constants["m"] = constant(m, "measured")
    else:
        constants["m"] = constant(m, "config")
    if ell is None:
        ell = family_constant(bodies, delta, "frostman", "slab", opts).constant
        constants["ell"] = constant(ell, "measured")
    else:
        constants["ell"] = constant(ell, "config")

    mass = count * unit
    sigma = params.sigma
    if flavor == "D":
        rhs = params.kappa * delta ** (params.omega + params.epsilon) * mass * (count * unit**0.5) ** (-sigma)
    elif flavor == "E":
        rhs = (
            params.kappa
            * delta ** (params.omega + params.epsilon)
            / m
            * mass
            * (m**-1.5 * ell * count * unit**0.5) ** (-sigma)
        )
    else:
        a, b = float(dims[0]), float(dims[1])
        D = d_quantity(prisms, a, b, opts)
        constants["D"] = constant(D["D"], "measured")
        rhs = (
            params.kappa
            * a**params.epsilon
            * b**params.omega
            / m
            * mass
            * (m**-1.5 * ell * count * unit**0.5) ** (-sigma)
            * D["D"] ** (-sigma)
        )
    logger.debug(f"Assertion {flavor}: |∪Y|={lhs.volume:.4g}, rhs={rhs:.4g}, m={m:.4g}, ell={ell:.4g}")
    return InequalityReport(
        f"kakeya_{flavor}",
        delta,
        lhs.volume,
        rhs,
        None,
        threshold="report only",
        constants=constants,
        details={"count": count, "body_volume": unit, "union": lhs.to_dict()},
    )


# -- hairbrush ------------------------------------------------------------------------------


def hairbrush_check(
    family: TubeFamily,
    m: Optional[float] = None,
    ell: Optional[float] = None,
    options: Optional[dict] = None,
) -> InequalityReport:
    """|∪Y| ≥ κ δ^{3/2+ε} (#𝕋)^{1/2} when both Wolff constants are ≤ δ^{-0.1}.

    Hypotheses that fail leave `passed` unset. The per-plank floor
    (1/100) δ (#𝕋)|T| / log(1/δ) is reported alongside.
    """
    opts = {**VOLUME_DEFAULTS, **(options or {})}
    delta = family.delta
    lhs = union_volume(family)
    constants = {
        "kappa": constant(opts["kappa"], "calibrated"),
        "epsilon": constant(opts["hairbrush_epsilon"], "calibrated"),
    }
    if m is None:
        m = family_constant(family, delta, "katz_tao", "convex", opts).constant
        constants["m"] = constant(m, "measured")
    else:
        constants["m"] = constant(m, "config")
    if ell is None:
        ell = family_constant(family, delta, "frostman", "slab", opts).constant
        constants["ell"] = constant(ell, "measured")
    else:
        constants["ell"] = constant(ell, "config")

    ceiling = delta ** -opts["hypothesis_exponent"]
    hypotheses = m <= ceiling and ell <= ceiling
    rhs = opts["kappa"] * delta ** (1.5 + opts["hairbrush_epsilon"]) * math.sqrt(len(family))
    plank_floor = opts["kappa"] * delta * len(family) * family.tube_volume / math.log(1.0 / delta)
    if not hypotheses:
        logger.warning(f"Hairbrush hypotheses unmet: m={m:.4g}, ell={ell:.4g}, ceiling={ceiling:.4g}")
    return InequalityReport(
        "hairbrush",
        delta,
        lhs.volume,
        rhs,
        (lhs.volume >= rhs) if hypotheses else None,
        threshold="lhs >= rhs" if hypotheses else "hypotheses unmet",
        constants=constants,
        details={"hypotheses": hypotheses, "ceiling": ceiling, "plank_floor": plank_floor, "union": lhs.to_dict()},
    )


# -- doubling --------------------------------------------------------------------------------


def doubling_ratio(family: TubeFamily, R: float = 2.0, options: Optional[dict] = None) -> InequalityReport:
    """|∪T_R| / (R³ |∪Y(T)|), passing when at most δ^{-ε}."""
    opts = {**VOLUME_DEFAULTS, **(options or {})}
    if R < 1:
        raise ValidationError(f"Dilation factor R must be >= 1, got {R}")
    base = union_volume(family)
    grid = family.grid
    dilates = [tube.as_body().dilate(R) for tube in family]
    top = grid.cell_volume * len(union_of_bodies(dilates, grid, workers=int(opts["workers"])))
    rhs = R**3 * base.volume
    threshold = family.delta ** -opts["doubling_epsilon"]
    report = InequalityReport(
        "doubling",
        family.delta,
        top,
        rhs,
        None,
        threshold=f"ratio <= delta^-{opts['doubling_epsilon']}",
        constants={
            "R": constant(R, "config"),
            "epsilon": constant(opts["doubling_epsilon"], "calibrated"),
        },
        details={
            "threshold": threshold,
            "gain": besicovitch_gain(family.delta),
            "union_gain": top / base.volume if base.volume else None,
        },
    )
    report.passed = report.ratio <= threshold
    logger.debug(f"Doubling at R={R}: ratio {report.ratio:.4g} (threshold {threshold:.4g})")
    return report


def besicovitch_gain(delta: float) -> float:
    """log(1/δ) / log log(1/δ), the classical compression rate."""
    if not 0 < delta < math.exp(-1):
        raise ValidationError(f"delta={delta} must lie in (0, 1/e)")
    L = math.log(1.0 / delta)
    return L / math.log(L)


# -- tangency --------------------------------------------------------------------------------


@dataclass
class TangencyStats:
    theta_min: float
    histogram: Dict[str, list]
    long_end_exit: Optional[np.ndarray] = None
    occupied: int = 0

    def to_dict(self) -> dict:
        return {
            "theta_min": self.theta_min,
            "histogram": self.histogram,
            "occupied": self.occupied,
            "long_end_exit": self.long_end_exit.tolist() if self.long_end_exit is not None else None,
        }


def _shared_ratio(prisms: Sequence[ConvexBody]) -> float:
    dims = np.array([P.dims for P in prisms])
    if np.abs(dims - dims[0]).max() > 1e-9 * dims[0].max():
        raise ValidationError("Prisms must share dimensions (a, b, c)")
    return float(dims[0, 0] / dims[0, 1])


def _angle_matrix(prisms: Sequence[ConvexBody]) -> np.ndarray:
    normals = np.array([P.plane_normal for P in prisms])
    cos = np.clip(np.abs(normals @ normals.T), 0.0, 1.0)
    return np.arccos(cos)


def _owners(shadings: Sequence[Shading]):
    """Voxels sorted with the ids of the shadings holding them, split per voxel."""
    voxels = np.concatenate([s.voxels for s in shadings])
    ids = np.concatenate([np.full(len(s), i) for i, s in enumerate(shadings)])
    if len(voxels) == 0:
        return voxels, []
    order = np.lexsort((ids, voxels))
    voxels, ids = voxels[order], ids[order]
    unique, starts = np.unique(voxels, return_index=True)
    return unique, np.split(ids, starts[1:])


def long_end_exit(tube: DeltaTube, prism: ConvexBody, tol: float = 1e-9) -> bool:
    """Whether the core segment of T crosses P entering and leaving through the two c-faces."""
    start, end = tube.endpoints
    p, q = prism.local(np.vstack([start, end]))
    step = q - p
    lo, hi = 0.0, 1.0
    for k in range(3):
        bound = prism.dims[k]
        if abs(step[k]) < 1e-15:
            if abs(p[k]) > bound + tol:
                return False
            continue
        t1, t2 = (-bound - p[k]) / step[k], (bound - p[k]) / step[k]
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    if hi < lo:
        return False
    c = prism.dims[2]
    ends = [p + lo * step, p + hi * step]
    return all(abs(abs(point[2]) - c) <= tol * max(1.0, c) for point in ends)


def tangency_stats(
    prisms: Sequence[ConvexBody],
    shadings: Sequence[Shading],
    tubes: Sequence[DeltaTube] = (),
    bins: int = 16,
) -> TangencyStats:
    """θ(x) = a/b + max pairwise ∠(Π(P), Π(P′)) over prisms whose shadings hold x.

    Voxels covered by a single prism get a/b. The long-end-exit matrix has
    one row per tube and one column per prism.
    """
    if len(prisms) != len(shadings):
        raise ValidationError("One shading per prism is required")
    ratio = _shared_ratio(prisms)
    check_same_grid(shadings)
    angles = _angle_matrix(prisms)
    unique, owners = _owners(shadings)

    cache: Dict[tuple, float] = {}
    theta = np.empty(len(unique))
    for i, ids in enumerate(owners):
        key = tuple(np.unique(ids).tolist())
        if key not in cache:
            cache[key] = float(angles[np.ix_(key, key)].max()) if len(key) > 1 else 0.0
        theta[i] = ratio + cache[key]

    counts, edges = np.histogram(theta, bins=bins) if len(theta) else (np.zeros(bins, dtype=int), np.zeros(bins + 1))
    exits = None
    if tubes:
        exits = np.array([[long_end_exit(T, P) for P in prisms] for T in tubes], dtype=bool)
    return TangencyStats(
        theta_min=float(theta.min()) if len(theta) else ratio,
        histogram={"counts": counts.tolist(), "edges": edges.tolist()},
        long_end_exit=exits,
        occupied=int(len(unique)),
    )


def theta_min_at(prisms: Sequence[ConvexBody], shadings: Sequence[Shading], index: int = 0) -> float:
    """a/b + inf over x ∈ Y(P₀) of sup over the other prisms P with x ∈ Y(P) of ∠(Π(P₀), Π(P))."""
    ratio = _shared_ratio(prisms)
    base = shadings[index].voxels
    best = np.zeros(len(base))
    for j, (P, Y) in enumerate(zip(prisms, shadings)):
        if j == index:
            continue
        hit = np.isin(base, Y.voxels, assume_unique=True)
        angle = plane_angle(prisms[index].plane_normal, P.plane_normal)
        best[hit] = np.maximum(best[hit], angle)
    return ratio + float(best.min()) if len(base) else ratio


def tangency_experiment(
    prisms: Sequence[ConvexBody],
    shadings: Sequence[Shading],
    lam: float,
    index: int = 0,
    theta: Optional[float] = None,
    options: Optional[dict] = None,
) -> InequalityReport:
    """|N_{bθ}(P₀) ∩ ∪Y(P)| against (1/100) λ⁴ |N_{bθ}(P₀)|, θ = θ_min by default."""
    opts = {**VOLUME_DEFAULTS, **(options or {})}
    if not 0 < lam <= 1:
        raise ValidationError(f"lambda={lam} outside (0, 1]")
    grid = check_same_grid(shadings)
    P0 = prisms[index]
    theta_min = theta_min_at(prisms, shadings, index)
    theta = theta_min if theta is None else theta
    if theta > theta_min * (1 + 1e-9):
        raise ValidationError(f"theta={theta:.4g} exceeds theta_min={theta_min:.4g}")
    hood = voxelize(P0.neighborhood(P0.dims[1] * theta), grid).voxels
    others = union_indices(s.voxels for j, s in enumerate(shadings) if j != index)
    lhs = grid.cell_volume * len(np.intersect1d(hood, others, assume_unique=True))
    measure = grid.cell_volume * len(hood)
    rhs = opts["kappa"] * lam**4 * measure
    return InequalityReport(
        "tangency",
        float(P0.dims[0]),
        lhs,
        rhs,
        lhs >= rhs,
        constants={
            "kappa": constant(opts["kappa"], "calibrated"),
            "lambda": constant(lam, "config"),
            "theta": constant(theta, "measured" if theta == theta_min else "config"),
        },
        details={"theta_min": theta_min, "neighbourhood": measure},
    )
