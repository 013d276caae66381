"""Constructive factoring: graph pruning, convex and slab factoring, Brunn envelopes,
and randomized rigid-motion factorization."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from loguru import logger

from .candidates import build_candidates
from .errors import (
    ContractViolation,
    EmptyCandidatesError,
    StatisticalFailure,
    ValidationError,
    VerificationError,
)
from .family import TubeFamily
from .geometry import (
    DEFAULT_SLACK,
    BodyArray,
    ConvexBody,
    RigidMotion,
    normalize,
    rescale_array,
)
from .voxels import Shading, VoxelGrid, voxelize
from .wolff import (
    as_body_array,
    cover_report,
    family_constant,
    members_of,
    score_candidates,
)

FACTOR_DEFAULTS = {
    "chain_steps": 8,
    "tolerance": 8.0,
    "peel_fraction": 0.125,
    "multiplicity_cap": 16,
    "k_cap": 1e4,
    "include_grid": False,
    "max_seeds": 256,
    "slack": DEFAULT_SLACK,
}

SLAB_DEFAULTS = {
    "epsilon": 0.1,
    "kappa": 0.01,
    "log_power": 3.0,
    "lambda_exponent": 0.1,
    "max_groups": 64,
    "max_seeds": 128,
    "pair_seeds": 48,
    "slack": DEFAULT_SLACK,
}


# -- bipartite pruning -------------------------------------------------------------


@dataclass
class BipartiteGraph:
    """Bipartite graph on [0, left_count) × [0, right_count).

    After pruning, `left_kept`/`right_kept` record the surviving vertices;
    indices keep their original meaning.
    """

    left_count: int
    right_count: int
    edges: np.ndarray
    left_kept: Optional[np.ndarray] = None
    right_kept: Optional[np.ndarray] = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if edges[:, 0].min() < 0 or edges[:, 0].max() >= self.left_count:
                raise ValidationError("Left edge endpoint out of range")
            if edges[:, 1].min() < 0 or edges[:, 1].max() >= self.right_count:
                raise ValidationError("Right edge endpoint out of range")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise ValidationError("Duplicate edges in bipartite graph")
        self.edges = edges
        if self.left_kept is None:
            self.left_kept = np.unique(edges[:, 0]) if len(edges) else np.zeros(0, dtype=np.int64)
        if self.right_kept is None:
            self.right_kept = np.unique(edges[:, 1]) if len(edges) else np.zeros(0, dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def left_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.left_count)

    def right_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.right_count)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from((("L", int(i)) for i in self.left_kept), bipartite=0)
        graph.add_nodes_from((("R", int(j)) for j in self.right_kept), bipartite=1)
        graph.add_edges_from((("L", int(i)), ("R", int(j))) for i, j in self.edges)
        return graph


def prune_bipartite(graph: BipartiteGraph) -> BipartiteGraph:
    """Iteratively delete vertices of degree below #E/(4|A|) (left) or #E/(4|B|) (right).

    Thresholds are fixed from the input graph. The fixpoint is the largest
    induced subgraph meeting both degree floors and keeps at least #E/2 edges.
    """
    if graph.edge_count < 1:
        raise ValidationError("prune_bipartite needs at least one edge")
    total = graph.edge_count
    left_floor = total / (4.0 * graph.left_count)
    right_floor = total / (4.0 * graph.right_count)
    g = graph.to_networkx()

    while True:
        deficient = [
            node
            for node, degree in g.degree()
            if degree < (left_floor if node[0] == "L" else right_floor)
        ]
        if not deficient:
            break
        g.remove_nodes_from(deficient)

    edges = sorted(
        (a[1], b[1]) if a[0] == "L" else (b[1], a[1]) for a, b in g.edges()
    )
    left = np.array(sorted(n[1] for n in g.nodes if n[0] == "L"), dtype=np.int64)
    right = np.array(sorted(n[1] for n in g.nodes if n[0] == "R"), dtype=np.int64)
    pruned = BipartiteGraph(graph.left_count, graph.right_count, np.array(edges, dtype=np.int64).reshape(-1, 2), left, right)
    if 2 * pruned.edge_count < total:
        raise ContractViolation(f"Pruning kept {pruned.edge_count} of {total} edges")
    logger.debug(f"Pruned bipartite graph: {total} -> {pruned.edge_count} edges")
    return pruned


# -- convex factoring ---------------------------------------------------------------


@dataclass
class FactoringResult:
    kept: np.ndarray
    covers: List[ConvexBody]
    assignment: np.ndarray
    achieved_K: float
    conclusions: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    trace: List[Dict[str, Any]] = field(default_factory=list)

    def cover_members(self, cover_id: int) -> np.ndarray:
        return self.kept[self.assignment == cover_id]

    def to_dict(self) -> dict:
        return {
            "kept": self.kept.tolist(),
            "covers": [W.to_dict() for W in self.covers],
            "assignment": self.assignment.tolist(),
            "achieved_K": self.achieved_K,
            "conclusions": self.conclusions,
            "trace": self.trace,
        }


def _chain_step(bodies: BodyArray, delta: float, opts: dict) -> Tuple[np.ndarray, float, List[dict]]:
    """Nested chain 𝒰 ⊃ 𝒰₁ ⊃ …, each step deleting the current witness contents.

    Returns the member of the chain minimising exp((log #𝒰/#𝒰ᵢ)²)·C_KT(𝒰ᵢ).
    """
    n = len(bodies)
    current = np.arange(n)
    best = None
    trace = []
    for step in range(int(opts["chain_steps"])):
        if len(current) == 0:
            break
        report = family_constant(bodies.subset(current), delta, "katz_tao", "convex", opts)
        objective = math.exp(math.log(n / len(current)) ** 2) * report.constant
        trace.append({"step": step, "size": int(len(current)), "constant": report.constant, "objective": objective})
        if best is None or objective < best[1]:
            best = (current, objective, report.constant)
        inside = members_of(bodies.subset(current), report.witness, float(opts["slack"]))
        current = np.delete(current, inside)
    return best[0], best[2], trace


def _greedy_covers(
    bodies: BodyArray, pool: np.ndarray, delta: float, opts: dict
) -> Tuple[List[ConvexBody], List[np.ndarray], List[dict]]:
    """Peel covers: among candidates within `tolerance` of the best ratio take the fullest."""
    sub = bodies.subset(pool)
    candidates = build_candidates(sub, delta, "convex", opts, seed=int(opts.get("seed", 0)))
    scores = score_candidates(sub, candidates, float(opts["slack"]), int(opts.get("workers", 1)))
    keep = [i for i, W in enumerate(candidates.bodies) if isinstance(W, ConvexBody)]
    bodies_of = [scores.members[i] for i in keep]
    shapes = [candidates.bodies[i] for i in keep]
    sources = [candidates.sources[i] for i in keep]
    volumes = scores.volumes[keep]
    sums = scores.sums[keep].copy()
    counts = scores.counts[keep].astype(float)
    owner = np.repeat(np.arange(len(keep)), [len(m) for m in bodies_of])
    flat = np.concatenate(bodies_of) if bodies_of else np.zeros(0, dtype=np.int64)

    remaining = np.ones(len(pool), dtype=bool)
    covers, groups, trace = [], [], []
    floor = float(opts["peel_fraction"]) * len(pool)
    while remaining.sum() >= max(floor, 1):
        ratios = sums / volumes
        top = ratios.max()
        if top <= 1e-300:
            break
        eligible = np.flatnonzero(ratios >= top / float(opts["tolerance"]))
        choice = int(eligible[np.lexsort((eligible, -ratios[eligible], -counts[eligible]))[0]])
        taken = bodies_of[choice][remaining[bodies_of[choice]]]
        covers.append(shapes[choice])
        groups.append(pool[taken])
        remaining[taken] = False
        hit = np.isin(flat, taken)
        np.subtract.at(sums, owner[hit], sub.volumes[flat[hit]])
        np.subtract.at(counts, owner[hit], 1.0)
        sums[counts < 0.5] = 0.0
        trace.append(
            {
                "cover": len(covers) - 1,
                "source": sources[choice],
                "ratio": float(ratios[choice]),
                "members": int(len(taken)),
            }
        )
        logger.debug(f"Cover {len(covers) - 1}: {len(taken)} bodies, ratio {ratios[choice]:.3g}")
    return covers, groups, trace


def _comparable(x: np.ndarray, y: np.ndarray, factor: float = 2.0) -> bool:
    return bool(np.all(x <= factor * y) and np.all(y <= factor * x))


def _pigeonhole(covers: List[ConvexBody], groups: List[np.ndarray], bodies: BodyArray) -> List[int]:
    """Keep the heaviest class of covers with comparable dims and comparable density."""
    masses = np.array([bodies.volumes[g].sum() for g in groups])
    density = masses / np.array([W.volume() for W in covers])
    best, best_mass = [], -1.0
    for ref in range(len(covers)):
        cls = [
            w
            for w in range(len(covers))
            if _comparable(covers[w].dims, covers[ref].dims)
            and _comparable(np.array([density[w]]), np.array([density[ref]]))
        ]
        mass = masses[cls].sum()
        if mass > best_mass:
            best, best_mass = cls, mass
    return best


def factor_convex(
    family: Union[TubeFamily, BodyArray, Sequence],
    delta: float,
    options: Optional[dict] = None,
) -> FactoringResult:
    """Factor a congruent family from above by convex covers, then verify.

    Steps: nested-chain subset choice, greedy cover peeling, pigeonholing to
    a congruent class of covers, incidence pruning, and verification of the
    four conclusions through Wolff-constant calls. achieved_K is the largest
    constant any conclusion needed.

    Raises:
        VerificationError: If a conclusion needs K above `k_cap`
    """
    opts = dict(FACTOR_DEFAULTS)
    opts.update(options or {})
    bodies = as_body_array(family)
    n = len(bodies)
    if n == 0:
        raise ValidationError("Cannot factor an empty family")
    slack = float(opts["slack"])
    logger.info(f"Factoring {n} bodies by convex covers")

    pool, _, chain = _chain_step(bodies, delta, opts)
    covers, groups, peel = _greedy_covers(bodies, np.sort(pool), delta, opts)
    if not covers:
        raise EmptyCandidatesError("Greedy peeling produced no covers")
    keep = _pigeonhole(covers, groups, bodies)
    covers = [covers[w] for w in keep]
    candidates_u = np.unique(np.concatenate([groups[w] for w in keep]))

    edges = []
    sub = bodies.subset(candidates_u)
    for w, W in enumerate(covers):
        for local in members_of(sub, W, slack):
            edges.append((int(local), w))
    graph = BipartiteGraph(len(candidates_u), len(covers), np.array(edges, dtype=np.int64))
    degrees = graph.left_degrees()
    capped = graph.edges[degrees[graph.edges[:, 0]] <= int(opts["multiplicity_cap"])]
    if len(capped) == 0:
        raise ContractViolation("Every body exceeded the cover multiplicity cap")
    pruned = prune_bipartite(BipartiteGraph(len(candidates_u), len(covers), capped))

    kept_covers = pruned.right_kept
    remap = {int(w): i for i, w in enumerate(kept_covers)}
    first = {}
    for i, w in pruned.edges:
        first.setdefault(int(i), remap[int(w)])
    local_kept = np.array(sorted(first), dtype=np.int64)
    kept = candidates_u[local_kept]
    assignment = np.array([first[int(i)] for i in local_kept], dtype=np.int64)
    covers = [covers[int(w)] for w in kept_covers]

    result = FactoringResult(kept, covers, assignment, 0.0, {}, chain + peel)
    _verify_convex(bodies, result, delta, opts, n)
    logger.info(
        f"Convex factoring kept {len(kept)}/{n} bodies in {len(covers)} covers, achieved K={result.achieved_K:.3g}"
    )
    return result


def _verify_convex(bodies: BodyArray, result: FactoringResult, delta: float, opts: dict, n: int) -> None:
    slack = float(opts["slack"])
    kept_bodies = bodies.subset(result.kept)
    conclusions: Dict[str, Dict[str, Any]] = {}

    conclusions["i_size"] = {"value": n / max(len(result.kept), 1), "witness": None}

    check = cover_report(kept_bodies, result.covers, float(opts["k_cap"]), result.assignment, slack)
    kt_kept = family_constant(kept_bodies, delta, "katz_tao", "convex", opts, extra=result.covers)
    unit = float(kept_bodies.volumes.max())
    worst, worst_w = 0.0, None
    for w, W in enumerate(result.covers):
        count = len(members_of(kept_bodies, W, slack))
        need = kt_kept.constant * W.volume() / (unit * max(count, 1))
        if need > worst:
            worst, worst_w = need, w
    conclusions["ii_balance"] = {
        "value": max(check.balance, float(check.multiplicity), worst, 1.0),
        "balance": check.balance,
        "multiplicity": check.multiplicity,
        "count": worst,
        "witness": result.covers[worst_w].to_dict() if worst_w is not None else None,
    }

    kt_covers = family_constant(BodyArray.from_bodies(result.covers), delta, "katz_tao", "convex", opts)
    conclusions["iii_covers"] = {
        "value": kt_covers.constant,
        "witness": kt_covers.witness.to_dict() if kt_covers.witness is not None else None,
    }

    worst, worst_w = 0.0, None
    for w, W in enumerate(result.covers):
        members = np.flatnonzero(result.assignment == w)
        if len(members) == 0:
            continue
        if len(members) == 1:
            value = W.volume() / kept_bodies.volumes[members[0]]
        else:
            rescaled = rescale_array(W, kept_bodies.subset(members))
            thinnest = float(np.linalg.norm(rescaled.half_axes, axis=2).min())
            value = family_constant(rescaled, max(thinnest, 1e-6), "frostman", "convex", opts).constant
        if value > worst:
            worst, worst_w = value, w
    conclusions["iv_rescaled"] = {
        "value": worst,
        "witness": result.covers[worst_w].to_dict() if worst_w is not None else None,
    }

    result.conclusions = conclusions
    result.achieved_K = float(max(c["value"] for c in conclusions.values()))
    cap = float(opts["k_cap"])
    for name, entry in conclusions.items():
        if entry["value"] > cap:
            raise VerificationError(name, entry["value"], cap, entry.get("witness"))


# -- slab factoring --------------------------------------------------------------------


@dataclass
class SlabGroup:
    slab: ConvexBody
    members: np.ndarray
    shadings: Dict[int, Shading]
    thickness: float
    frostman_slab: float = 0.0

    def mass(self) -> float:
        return float(sum(s.measure() for s in self.shadings.values()))

    def to_dict(self) -> dict:
        return {
            "slab": self.slab.to_dict(),
            "members": self.members.tolist(),
            "thickness": self.thickness,
            "mass": self.mass(),
            "frostman_slab": self.frostman_slab,
        }


@dataclass
class SlabFactoring:
    groups: List[SlabGroup]
    retention: float
    floor: float
    lam: float

    @property
    def passed(self) -> bool:
        return self.retention >= self.floor

    def to_dict(self) -> dict:
        return {
            "groups": [g.to_dict() for g in self.groups],
            "retention": self.retention,
            "floor": self.floor,
            "lambda": self.lam,
            "passed": self.passed,
        }


def factor_slab(family: TubeFamily, options: Optional[dict] = None) -> SlabFactoring:
    """Greedy slab factoring of a shaded family.

    Each round takes the candidate slab N_s(H) maximising s⁻¹ Σ_{U⊂S}|U| over
    the live bodies, peels its bodies with their shadings cut to S, removes
    S from every other shading, and drops bodies whose density fell below
    λ/2. A thick slab (s ≥ δ^ε R) ends the loop with one final group.

    Raises:
        ValidationError: If shadings are missing or too sparse
        EmptyCandidatesError: If the slab net is empty
    """
    opts = dict(SLAB_DEFAULTS)
    opts.update(options or {})
    delta = family.delta
    n = len(family)
    if len(family.shadings) != n:
        raise ValidationError("factor_slab needs a shading for every body")
    bodies = family.bodies()
    tube_volume = family.tube_volume
    shadings = [family.shadings[i] for i in range(n)]
    density = np.array([s.measure() / tube_volume for s in shadings])
    lam = float(density.min())
    lam_min = delta ** float(opts["lambda_exponent"])
    # A full shading may undercount its tube by at most its rasterization error.
    credited = np.array([(s.measure() + s.error_bound) / tube_volume for s in shadings])
    if credited.min() < lam_min:
        raise ValidationError(f"Shading density {lam:.3g} below lambda_min {lam_min:.3g}")

    candidates = build_candidates(bodies, delta, "slab", opts, seed=int(opts.get("seed", 0)))
    if len(candidates) == 0:
        raise EmptyCandidatesError("Slab candidate net is empty")
    scores = score_candidates(bodies, candidates, float(opts["slack"]), int(opts.get("workers", 1)))
    thickness = np.array([W.dims[0] for W in candidates.bodies])
    radius = np.array([W.dims[1] for W in candidates.bodies])
    thick_floor = delta ** float(opts["epsilon"])

    voxels = {i: family.shadings[i].voxels for i in range(n)}
    grid = family.grid
    alive = np.ones(n, dtype=bool)
    initial = family.shading_mass()
    groups: List[SlabGroup] = []

    while alive.any() and len(groups) < int(opts["max_groups"]):
        live = [m[alive[m]] for m in scores.members]
        value = np.array([bodies.volumes[m].sum() for m in live]) / thickness
        choice = int(np.argmax(value))
        if value[choice] <= 0:
            break
        slab = candidates.bodies[choice]
        relative = thickness[choice] / radius[choice]
        if relative >= thick_floor:
            members = np.flatnonzero(alive)
            shadings = {int(i): Shading(int(i), voxels[i], grid) for i in members}
            groups.append(SlabGroup(slab, members, shadings, float(relative)))
            logger.debug(f"Thick slab ends slab factoring with {len(members)} bodies")
            break
        members = live[choice]
        shadings = {}
        for i in members.tolist():
            inside = slab.contains_points(grid.centers(voxels[i]))
            shadings[i] = Shading(i, voxels[i][inside], grid)
        alive[members] = False
        groups.append(SlabGroup(slab, members, shadings, float(relative)))
        for i in np.flatnonzero(alive).tolist():
            if len(voxels[i]) == 0:
                alive[i] = False
                continue
            outside = ~slab.contains_points(grid.centers(voxels[i]))
            voxels[i] = voxels[i][outside]
            if grid.cell_volume * len(voxels[i]) < 0.5 * lam * tube_volume:
                alive[i] = False
        logger.debug(
            f"Slab group {len(groups) - 1}: {len(members)} bodies, thickness {thickness[choice]:.3g}, "
            f"{int(alive.sum())} bodies left"
        )

    for group in groups:
        group.frostman_slab = _group_frostman_slab(bodies, group, delta, opts)
    retained = sum(g.mass() for g in groups)
    retention = retained / initial if initial > 0 else 0.0
    floor = float(opts["kappa"]) * thick_floor * math.log(max(n, 2)) ** (-float(opts["log_power"]))
    logger.info(f"Slab factoring: {len(groups)} groups, retention {retention:.3f} (floor {floor:.3g})")
    return SlabFactoring(groups, float(retention), float(floor), lam)


def _group_frostman_slab(bodies: BodyArray, group: SlabGroup, delta: float, opts: dict) -> float:
    sub = bodies.subset(group.members)
    try:
        return family_constant(sub, delta, "frostman", "slab", opts, extra=[group.slab]).constant
    except EmptyCandidatesError:
        return 0.0


def voxel_disjoint(groups: Sequence[SlabGroup]) -> bool:
    """Whether the voxel sets of different groups are pairwise disjoint."""
    seen = np.zeros(0, dtype=np.int64)
    for group in groups:
        arrays = [s.voxels for s in group.shadings.values()]
        mine = np.unique(np.concatenate(arrays)) if arrays else np.zeros(0, dtype=np.int64)
        if len(np.intersect1d(seen, mine, assume_unique=True)):
            return False
        seen = np.union1d(seen, mine)
    return True


# -- Brunn envelope --------------------------------------------------------------------


@dataclass
class BrunnReport:
    t: float
    s: float
    reach: float
    envelope: float
    K3: float

    @property
    def holds(self) -> bool:
        return self.reach <= self.envelope * (1.0 + 1e-9)

    def to_dict(self) -> dict:
        return {"t": self.t, "s": self.s, "reach": self.reach, "envelope": self.envelope, "K3": self.K3, "holds": self.holds}


def brunn_envelope(
    U: ConvexBody,
    normal: Sequence[float],
    offset: float,
    s: float,
    K3: float = 10.0,
    max_voxels: int = 2_000_000,
) -> BrunnReport:
    """t = |U ∩ N_s(H)|/|U| on a grid of side min(a, s)/4, and whether U ⊂ N_{K₃s/t}(H).

    Raises:
        ValidationError: If U misses N_s(H)
    """
    n = normalize(normal)
    h = min(float(U.dims[0]), s) / 4.0
    h = max(h, (U.volume() / max_voxels) ** (1.0 / 3.0))
    grid = VoxelGrid(h=h, origin=np.full(3, -2.0), extent=int(math.ceil(4.0 / h - 1e-9)))
    shading = voxelize(U, grid)
    if len(shading) == 0:
        raise ValidationError("Body too small for the measuring grid")
    dist = np.abs(shading.centers() @ n - offset)
    t = float(np.count_nonzero(dist <= s) / len(shading))
    if t == 0:
        raise ValidationError("Body does not meet the slab N_s(H)")
    reach = max(U.support(n) - offset, offset + U.support(-n))
    return BrunnReport(t, float(s), float(reach), float(K3 * s / t), float(K3))


# -- randomized rigid factorization -------------------------------------------------------


@dataclass
class RigidFactorResult:
    motions: List[RigidMotion]
    rounds: int
    bounds: List[Dict[str, float]]

    @property
    def count(self) -> int:
        return len(self.motions)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "rounds": self.rounds,
            "bounds": self.bounds,
            "max_displacement": max(m.displacement_bound for m in self.motions),
        }


def sample_motion(rng: np.random.Generator, rho: float) -> RigidMotion:
    """Rotation by angle ≤ ρ/(2√3) and translation in the ρ/2-ball: corners move ≤ ρ."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, rho / (2.0 * math.sqrt(3.0)))
    shift = rng.normal(size=3)
    shift *= (rho / 2.0) * rng.uniform() ** (1.0 / 3.0) / np.linalg.norm(shift)
    return RigidMotion.from_rotvec(axis * angle, shift)


def motion_count(rho: float, delta: float, largest: int) -> int:
    return max(1, math.ceil(rho**2 / (largest * delta**2) - 1e-9))


def random_rigid_factor(
    families: Sequence[TubeFamily],
    rho: float,
    seed: int = 0,
    options: Optional[dict] = None,
) -> RigidFactorResult:
    """Draw ⌈ρ²/(Mδ²)⌉ rigid motions such that every union ⊔_A A(𝕋_j) keeps
    C_KT ≤ K_cal·log(2 + K)·C_KT(𝕋_j).

    Raises:
        StatisticalFailure: If no round verifies within the round budget
    """
    opts = {"k_cal": 100.0, "rounds": 8, "include_grid": False, "max_seeds": 128}
    opts.update(options or {})
    if not families:
        raise ValidationError("random_rigid_factor needs at least one family")
    delta = families[0].delta
    largest = max(len(f) for f in families)
    count = motion_count(rho, delta, largest)
    factor = float(opts["k_cal"]) * math.log(2.0 + len(families))
    base = [family_constant(f, delta, "katz_tao", "convex", opts).constant for f in families]

    if count == 1:
        bounds = [{"union": c, "base": c, "limit": factor * c} for c in base]
        return RigidFactorResult([RigidMotion.identity()], 0, bounds)

    rounds = int(opts["rounds"])
    for round_index in range(rounds):
        rng = np.random.default_rng([seed, round_index])
        motions = [sample_motion(rng, rho) for _ in range(count)]
        for motion in motions:
            if motion.displacement_bound > rho * (1 + 1e-12):
                raise ContractViolation(f"Motion displaces corners by {motion.displacement_bound:.4g} > {rho}")
        bounds, ok = [], True
        for family, c in zip(families, base):
            union = _union_family(family, motions)
            value = family_constant(union, delta, "katz_tao", "convex", opts).constant
            bounds.append({"union": value, "base": c, "limit": factor * c})
            ok = ok and value <= factor * c
        if ok:
            logger.info(f"Rigid factorization: {count} motions verified in round {round_index + 1}")
            return RigidFactorResult(motions, round_index + 1, bounds)
        logger.warning(f"Rigid factorization round {round_index + 1} failed: {bounds}")
    raise StatisticalFailure(
        f"No set of {count} rigid motions verified in {rounds} rounds",
        rounds,
        "Increase the round budget or K_cal",
    )


def _union_family(family: TubeFamily, motions: Sequence[RigidMotion]) -> TubeFamily:
    anchors = np.vstack([m.apply(family.anchors) for m in motions])
    directions = np.vstack([m.apply_directions(family.directions) for m in motions])
    return TubeFamily(anchors, directions, family.delta)
