"""Generators for the fractal and calibration point sets.

Corner-Cantor families (four similitudes per generation), segment and
square calibration clouds, and the Garnett displacement homeomorphism
sampled on square centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_CLOUD_CAP = 10 ** 7

# Corner order NW, NE, SW, SE (unit offsets before scaling).
_CORNERS = np.array([-1 + 1j, 1 + 1j, -1 - 1j, 1 - 1j], dtype=np.complex128)
_ANTIDIAG = (1 + 1j) / math.sqrt(2)


@dataclass(frozen=True)
class PointCloud:
    """Finite planar sample of a set, with free-form provenance label."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).ravel()
        if pts.size and not np.all(np.isfinite(pts.view(np.float64))):
            raise ValueError("cloud points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class CantorSpec:
    """Four-corner self-similar construction inside a square.

    generation: number of subdivision levels (>= 0).
    contraction: side ratio rho in (0, 1/2]; rho = 1/4 is the
        quarter-Cantor set.
    anchor center/side place the starting square (default unit square
    centered at the origin).
    """

    generation: int
    contraction: float = 0.25
    center: complex = 0j
    side: float = 1.0

    def __post_init__(self):
        if self.generation < 0 or self.generation != int(self.generation):
            raise ValueError(f"generation must be a nonnegative integer, got {self.generation}")
        if not (0 < self.contraction <= 0.5):
            raise ValueError(f"contraction must lie in (0, 1/2], got {self.contraction}")
        if 4 ** self.generation > _CLOUD_CAP:
            raise ValueError(f"4^{self.generation} exceeds the {_CLOUD_CAP} point cap")
        if not (self.side > 0):
            raise ValueError("side must be positive")


def cantor_cloud(spec: CantorSpec) -> PointCloud:
    """Centers of the generation-N squares, depth-first, corners NW/NE/SW/SE."""
    pts = np.array([complex(spec.center)], dtype=np.complex128)
    side = spec.side
    for _ in range(spec.generation):
        offset = side * (0.5 - spec.contraction / 2.0)
        pts = (pts[:, None] + offset * _CORNERS[None, :]).ravel()
        side *= spec.contraction
    label = f"cantor(rho={spec.contraction},gen={spec.generation})"
    return PointCloud(pts, label)


def similarity_dimension(spec: CantorSpec) -> float:
    """log 4 / log(1/rho) for the four-similitude construction."""
    return math.log(4.0) / math.log(1.0 / spec.contraction)


def segment_cloud(count: int) -> PointCloud:
    """Uniform samples of the segment [-1/2, 1/2] on the real axis."""
    if count < 2:
        raise ValueError("count must be >= 2")
    return PointCloud(np.linspace(-0.5, 0.5, count).astype(np.complex128),
                      label=f"segment(n={count})")


def square_cloud(count: int) -> PointCloud:
    """Uniform m x m cell-center samples of the unit square, m = round(sqrt(count))."""
    m = int(round(math.sqrt(count)))
    if m < 2:
        raise ValueError("count must be >= 4")
    if m * m > _CLOUD_CAP:
        raise ValueError(f"count exceeds the {_CLOUD_CAP} point cap")
    axis = -0.5 + (np.arange(m) + 0.5) / m
    pts = (axis[:, None] + 1j * axis[None, :]).ravel()
    return PointCloud(pts, label=f"square(n={m * m})")


def default_garnett_displacements(generation: int) -> list[float]:
    """The summable default d'_k = (1/10) 2^-k (sum over all k equals 1/10)."""
    return [0.1 * 2.0 ** (-k) for k in range(1, generation + 1)]


def garnett_map(spec: CantorSpec, displacements: Sequence[float] | None = None) -> PointCloud:
    """Image of the quarter-Cantor cloud under the level-wise displacement map.

    At each level the NE and SW children (Q2, Q3) slide along the SW-NE
    diagonal toward the line through the NW and SE children by d'_k; the
    other two stay fixed.  A level whose displacement makes the moved
    sibling centers collide is rejected.
    """
    if abs(spec.contraction - 0.25) > 1e-12:
        raise ValueError("garnett_map requires the quarter construction (rho = 1/4)")
    if displacements is None:
        displacements = default_garnett_displacements(spec.generation)
    d = [float(v) for v in displacements]
    if len(d) != spec.generation:
        raise ValueError(f"need {spec.generation} displacements, got {len(d)}")
    if any(v < 0 for v in d):
        raise ValueError("displacements must be nonnegative")

    side = spec.side
    for k, dk in enumerate(d, start=1):
        # moved sibling centers coincide when sqrt(2) d' hits 3*side/4
        if abs(0.75 * side - math.sqrt(2.0) * dk) <= 1e-12 * max(side, 1.0):
            raise ValueError(
                f"displacement {dk} at level {k} collapses the translated squares "
                f"(sibling centers coincide)")
        side *= spec.contraction

    pts = np.array([complex(spec.center)], dtype=np.complex128)
    side = spec.side
    moves = np.zeros(4, dtype=np.complex128)
    for k in range(spec.generation):
        offset = side * (0.5 - spec.contraction / 2.0)
        moves[1] = -d[k] * _ANTIDIAG   # Q2 (NE) toward the NW-SE line
        moves[2] = +d[k] * _ANTIDIAG   # Q3 (SW) toward the NW-SE line
        pts = (pts[:, None] + offset * _CORNERS[None, :] + moves[None, :]).ravel()
        side *= spec.contraction
    label = f"garnett(gen={spec.generation})"
    return PointCloud(pts, label)


def map_cloud(sol, cloud: PointCloud) -> PointCloud:
    """Transport a cloud through a solved map (delegates to the solver)."""
    from . import solver  # deferred import; solver depends on this module
    return solver.evaluate_map(sol, cloud)
