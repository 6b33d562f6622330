"""Static geometry of the Sinai billiard cell and its periodic Lorentz gas.

A cell is the square ``[0, L] x [0, L]`` with a reflecting disk of radius
``R`` at its centre.  For ``R < L/2`` the disk lies strictly inside the
cell.  For ``L/2 <= R < L/sqrt(2)`` it cuts the four walls and the
accessible table splits into four corner pieces; areas and perimeters are
then the ones of the region actually reachable by a particle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

SQRT2 = math.sqrt(2.0)


class GeometryError(ValueError):
    """Raised for an invalid (L, R) pair."""


class HorizonClass(enum.Enum):
    INFINITE_ALL_CORRIDORS = "infinite-all-corridors"
    INFINITE_NONDIAGONAL_ONLY = "infinite-nondiagonal-only"
    FINITE = "finite"


def crossover_radii(L: float = 1.0) -> tuple[float, float]:
    """Radii at which the diagonal and then all corridors close."""
    return SQRT2 * L / 4.0, L / 2.0


def _segment_half_chord(L: float, R: float) -> float:
    # half length of the wall chord cut off by the disk, zero for R <= L/2
    return math.sqrt(max(R * R - 0.25 * L * L, 0.0))


def _overlap_angle(L: float, R: float) -> float:
    # half-angle of each arc of the disk that lies outside the square
    if R <= 0.5 * L:
        return 0.0
    return math.acos(0.5 * L / R)


@dataclass(frozen=True)
class BilliardConfig:
    """Geometric parameters and derived mean collision times.

    ``tau_disk`` is ``math.inf`` when there is no scatterer (``R == 0``),
    so the square billiard runs through the same code paths.
    """

    L: float
    R: float
    area: float = field(init=False)
    wall_perimeter: float = field(init=False)
    disk_perimeter: float = field(init=False)
    tau_wall: float = field(init=False)
    tau_disk: float = field(init=False)
    tau_total: float = field(init=False)

    def __post_init__(self) -> None:
        L, R = float(self.L), float(self.R)
        if not (math.isfinite(L) and L > 0.0):
            raise GeometryError(f"cell side must be positive, got L={self.L!r}")
        if not (math.isfinite(R) and R >= 0.0):
            raise GeometryError(f"disk radius must be non-negative, got R={self.R!r}")
        if R >= L / SQRT2:
            raise GeometryError(
                f"R={R} >= L/sqrt(2)={L / SQRT2:.6f}: the disk covers the cell corners"
            )
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)

        h = _segment_half_chord(L, R)
        phi = _overlap_angle(L, R)
        # circular segment beyond one wall: R^2 acos(d/R) - d sqrt(R^2 - d^2), d = L/2
        segment = R * R * phi - 0.5 * L * h
        area = L * L - math.pi * R * R + 4.0 * segment
        p_wall = 4.0 * (L - 2.0 * h)
        p_disk = 2.0 * R * (math.pi - 4.0 * phi)
        if not (area > 0.0 and p_wall > 0.0):
            raise GeometryError(f"R={R} is too close to L/sqrt(2): accessible area rounds to zero")

        tau_wall = math.pi * area / p_wall
        tau_disk = math.pi * area / p_disk if p_disk > 0.0 else math.inf
        tau_total = math.pi * area / (p_wall + p_disk)

        object.__setattr__(self, "area", area)
        object.__setattr__(self, "wall_perimeter", p_wall)
        object.__setattr__(self, "disk_perimeter", p_disk)
        object.__setattr__(self, "tau_wall", tau_wall)
        object.__setattr__(self, "tau_disk", tau_disk)
        object.__setattr__(self, "tau_total", tau_total)

    @property
    def reduced_radius(self) -> float:
        return self.R / self.L

    @property
    def has_scatterer(self) -> bool:
        return self.R > 0.0

    @property
    def overlaps_walls(self) -> bool:
        """True when the disk reaches into the edge-adjacent cells."""
        return self.R > 0.5 * self.L

    @property
    def horizon(self) -> HorizonClass:
        return classify_horizon(self)

    def tau(self, kind: str) -> float:
        """Mean collision time by name: ``wall``, ``disk`` or ``total``."""
        try:
            return {"wall": self.tau_wall, "disk": self.tau_disk, "total": self.tau_total}[kind]
        except KeyError:
            raise ValueError(f"unknown collision kind {kind!r}") from None

    def is_accessible(self, x, y):
        """Whether in-cell point(s) ``(x, y)`` lie outside every lattice disk.

        Works on scalars and numpy arrays alike.  Only the own disk and the
        four edge-adjacent disks can reach into a cell.
        """
        L, R = self.L, self.R
        r2 = R * R
        cx = x - 0.5 * L
        cy = y - 0.5 * L
        ok = cx * cx + cy * cy >= r2
        if self.overlaps_walls:
            for ox, oy in ((L, 0.0), (-L, 0.0), (0.0, L), (0.0, -L)):
                ex = cx - ox
                ey = cy - oy
                ok = ok & (ex * ex + ey * ey >= r2)
        return ok


def build_config(L: float, R: float) -> BilliardConfig:
    return BilliardConfig(L, R)


def classify_horizon(cfg: BilliardConfig) -> HorizonClass:
    """Boundary radii fall into the more closed regime."""
    r1, r2 = crossover_radii(cfg.L)
    if cfg.R < r1:
        return HorizonClass.INFINITE_ALL_CORRIDORS
    if cfg.R < r2:
        return HorizonClass.INFINITE_NONDIAGONAL_ONLY
    return HorizonClass.FINITE


def relative_collision_ratio(cfg: BilliardConfig) -> float:
    """Mean wall-to-disk collision number ratio, ``tau_disk / tau_wall``."""
    if not cfg.has_scatterer:
        raise GeometryError("no scatterer: the wall/disk collision ratio is undefined for R = 0")
    return cfg.tau_disk / cfg.tau_wall


def naive_collision_ratio(cfg: BilliardConfig) -> float:
    """``2L / (pi R)``; exact only while the disk stays inside the cell."""
    if not cfg.has_scatterer:
        raise GeometryError("no scatterer: the wall/disk collision ratio is undefined for R = 0")
    return 2.0 * cfg.L / (math.pi * cfg.R)
