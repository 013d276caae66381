"""Array-backed tube families with optional shadings and planted covers."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
from loguru import logger

from .errors import ReportIOError, ValidationError
from .geometry import BodyArray, ConvexBody, DeltaTube, MAX_DELTA, MIN_DELTA
from .voxels import Shading, VoxelGrid, decode_runs, voxelize_many


@dataclass(eq=False)
class CoverLevel:
    """A cover of the family by ρ-tubes: cover bodies plus tube → cover assignment."""

    scale: float
    covers: List[ConvexBody]
    assignment: np.ndarray

    def members(self, cover_id: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cover_id)

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "bodies": [body.to_dict() for body in self.covers],
            "assignment": self.assignment.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoverLevel":
        return cls(
            scale=float(data["scale"]),
            covers=[ConvexBody.from_dict(body) for body in data["bodies"]],
            assignment=np.asarray(data["assignment"], dtype=np.int64),
        )


@dataclass(eq=False)
class TubeFamily:
    """A multiset of δ-tubes stored as anchor and direction arrays."""

    anchors: np.ndarray
    directions: np.ndarray
    delta: float
    shadings: Dict[int, Shading] = field(default_factory=dict)
    covers: List[CoverLevel] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 3)
        directions = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        if len(directions) != len(self.anchors):
            raise ValidationError("anchors and directions must have the same length")
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise ValidationError("Tube directions must be nonzero")
        self.directions = directions / norms
        self.delta = float(self.delta)
        if not MIN_DELTA <= self.delta <= MAX_DELTA:
            raise ValidationError(f"delta={self.delta} outside [{MIN_DELTA}, {MAX_DELTA}]")
        self._bodies: Optional[BodyArray] = None

    def __len__(self) -> int:
        return len(self.anchors)

    def __getitem__(self, index: int) -> DeltaTube:
        return DeltaTube(self.anchors[index], self.directions[index], self.delta)

    def __iter__(self) -> Iterator[DeltaTube]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_tubes(cls, tubes: Sequence[DeltaTube], **kwargs) -> "TubeFamily":
        if not tubes:
            raise ValidationError("A tube family needs at least one tube")
        return cls(
            anchors=np.array([t.anchor for t in tubes]),
            directions=np.array([t.direction for t in tubes]),
            delta=tubes[0].delta,
            **kwargs,
        )

    @property
    def tube_volume(self) -> float:
        return 4.0 * self.delta**2

    def total_volume(self) -> float:
        return self.tube_volume * len(self)

    def bodies(self) -> BodyArray:
        if self._bodies is None:
            self._bodies = BodyArray.from_tubes(self.anchors, self.directions, self.delta)
        return self._bodies

    @property
    def grid(self) -> Optional[VoxelGrid]:
        for shading in self.shadings.values():
            return shading.grid
        return None

    def subset(self, idx: Sequence[int]) -> "TubeFamily":
        """Sub-family; shadings are re-keyed and covers are dropped."""
        idx = np.asarray(idx, dtype=np.int64)
        shadings = {}
        for new, old in enumerate(idx.tolist()):
            if old in self.shadings:
                shadings[new] = Shading(new, self.shadings[old].voxels, self.shadings[old].grid)
        return TubeFamily(
            self.anchors[idx], self.directions[idx], self.delta, shadings, [], dict(self.metadata)
        )

    def with_shadings(self, shadings: Dict[int, Shading]) -> "TubeFamily":
        return TubeFamily(self.anchors, self.directions, self.delta, shadings, self.covers, self.metadata)

    def shading_list(self) -> List[Shading]:
        return [self.shadings[i] for i in sorted(self.shadings)]

    def full_shadings(self, grid: VoxelGrid, workers: int = 1) -> Dict[int, Shading]:
        shadings = voxelize_many(list(self), grid, workers=workers)
        return {s.body_id: s for s in shadings}

    def shading_mass(self) -> float:
        return float(sum(s.measure() for s in self.shadings.values()))

    def cover_near(self, scale: float, factor: float) -> Optional[CoverLevel]:
        """A planted cover with scale in [scale, factor·scale), smallest first."""
        for level in sorted(self.covers, key=lambda lv: lv.scale):
            if scale * (1 - 1e-9) <= level.scale < factor * scale:
                return level
        return None

    def to_dict(self) -> dict:
        grid = self.grid
        return {
            "delta": self.delta,
            "tubes": [
                {"anchor": a.tolist(), "direction": d.tolist()}
                for a, d in zip(self.anchors, self.directions)
            ],
            "shadings": [self.shadings[i].to_dict() for i in sorted(self.shadings)],
            "grid": grid.to_dict() if grid is not None else None,
            "covers": [level.to_dict() for level in self.covers],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TubeFamily":
        tubes = data["tubes"]
        grid = VoxelGrid.from_dict(data["grid"]) if data.get("grid") else None
        shadings = {}
        for entry in data.get("shadings", []):
            if grid is None:
                raise ValidationError("Shadings given without a grid")
            shadings[int(entry["tube"])] = Shading(int(entry["tube"]), decode_runs(entry["voxels"]), grid)
        return cls(
            anchors=np.array([t["anchor"] for t in tubes], dtype=float),
            directions=np.array([t["direction"] for t in tubes], dtype=float),
            delta=data["delta"],
            shadings=shadings,
            covers=[CoverLevel.from_dict(c) for c in data.get("covers", [])],
            metadata=data.get("metadata", {}),
        )

    def save(self, path: Path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.to_dict()))
        except OSError as e:
            raise ReportIOError(f"Could not write family ({e})", path)
        logger.info(f"Family with {len(self)} tubes saved to: {path}")
        return path

    @classmethod
    def load(cls, path: Path) -> "TubeFamily":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ReportIOError(f"Could not read family ({e})", path)
        return cls.from_dict(data)
