"""Event-driven propagation in the unfolded periodic Lorentz gas.

Particles fly straight at unit speed through a square lattice of cells.
Each cell holds one disk at its centre.  Two kinds of events happen:

* crossing a cell boundary, which is a wall reflection of the folded
  Sinai-billiard orbit (the direction is unchanged in the lattice frame);
* specular reflection from a disk.

Positions are stored as in-cell coordinates plus an integer cell index,
so the unfolded displacement never loses precision to large offsets.
The kernel works on a struct-of-arrays :class:`Swarm`.  A single
trajectory is a swarm of size one, so the scalar API and the ensemble
runner share every line of the dynamics.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BilliardConfig

TANGENCY_TOL = 1e-12
CORNER_TOL = 1e-12
CORNER_NUDGE = 1e-10
DEFAULT_EVENT_BUDGET = 10**8

# step counter columns
SX_PLUS, SX_MINUS, SY_PLUS, SY_MINUS = range(4)


class EventKind(enum.IntEnum):
    WALL_CROSSING = 0
    DISK_REFLECTION = 1


class EventBudgetExceeded(RuntimeError):
    """A trajectory needed more events than allowed before its last probe."""

    def __init__(self, message: str, particles=(), seed=None):
        super().__init__(message)
        self.particles = list(particles)
        self.seed = seed


@dataclass
class ParticleState:
    """One particle in the unfolded lattice.

    ``local`` is the position inside cell ``cell``; the unfolded plane
    position is ``cell * L + local``.  ``step_counts`` holds the numbers of
    boundary crossings towards +x, -x, +y and -y.
    """

    local: np.ndarray
    direction: np.ndarray
    cell: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    time: float = 0.0
    step_counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    disk_count: int = 0

    def __post_init__(self) -> None:
        self.local = np.asarray(self.local, dtype=float).reshape(2)
        self.direction = np.asarray(self.direction, dtype=float).reshape(2)
        self.cell = np.asarray(self.cell, dtype=np.int64).reshape(2)
        self.step_counts = np.asarray(self.step_counts, dtype=np.int64).reshape(4)

    @classmethod
    def at(cls, x: float, y: float, theta: float, L: float = 1.0) -> "ParticleState":
        """State at unfolded point ``(x, y)`` moving at angle ``theta``."""
        cell = np.floor(np.array([x, y]) / L).astype(np.int64)
        local = np.array([x, y]) - cell * L
        return cls(local, [math.cos(theta), math.sin(theta)], cell)

    def position(self, L: float) -> np.ndarray:
        return self.cell * L + self.local

    @property
    def wall_count(self) -> int:
        return int(self.step_counts.sum())

    def copy(self) -> "ParticleState":
        return ParticleState(
            self.local.copy(), self.direction.copy(), self.cell.copy(), self.time,
            self.step_counts.copy(), self.disk_count,
        )


@dataclass
class Plan:
    """Next event of every swarm member, not yet applied."""

    dt: np.ndarray
    disk: np.ndarray  # bool: disk reflection, otherwise a wall crossing
    x_wall: np.ndarray  # bool: wall crossing through an x boundary
    corner: np.ndarray  # bool: crossing lands within CORNER_TOL of a cell corner
    which: np.ndarray  # index into the candidate disk centres


class Swarm:
    """Struct-of-arrays particle batch with an exact event kernel."""

    def __init__(self, lx, ly, vx, vy, ix=None, iy=None, steps=None, ndisk=None,
                 t=None, ids=None):
        n = len(lx)
        self.lx = np.array(lx, dtype=float)
        self.ly = np.array(ly, dtype=float)
        self.vx = np.array(vx, dtype=float)
        self.vy = np.array(vy, dtype=float)
        self.ix = np.zeros(n, np.int64) if ix is None else np.array(ix, dtype=np.int64)
        self.iy = np.zeros(n, np.int64) if iy is None else np.array(iy, dtype=np.int64)
        self.steps = np.zeros((n, 4), np.int64) if steps is None else np.array(steps, dtype=np.int64)
        self.ndisk = np.zeros(n, np.int64) if ndisk is None else np.array(ndisk, dtype=np.int64)
        self.t = np.zeros(n) if t is None else np.array(t, dtype=float)
        self.tc = np.zeros(n)  # Kahan compensation for t
        self.events = np.zeros(n, np.int64)
        self.ids = np.arange(n) if ids is None else np.array(ids)
        self.corner_hits = 0

    def __len__(self) -> int:
        return self.lx.size

    @classmethod
    def from_states(cls, states) -> "Swarm":
        states = list(states)
        return cls(
            [s.local[0] for s in states], [s.local[1] for s in states],
            [s.direction[0] for s in states], [s.direction[1] for s in states],
            [s.cell[0] for s in states], [s.cell[1] for s in states],
            np.array([s.step_counts for s in states]).reshape(-1, 4),
            [s.disk_count for s in states], [s.time for s in states],
        )

    def state(self, i: int) -> ParticleState:
        return ParticleState(
            [self.lx[i], self.ly[i]], [self.vx[i], self.vy[i]], [self.ix[i], self.iy[i]],
            float(self.t[i]), self.steps[i].copy(), int(self.ndisk[i]),
        )

    def compress(self, keep: np.ndarray) -> None:
        for name in ("lx", "ly", "vx", "vy", "ix", "iy", "steps", "ndisk", "t", "tc",
                     "events", "ids"):
            setattr(self, name, getattr(self, name)[keep])

    @property
    def wall_counts(self) -> np.ndarray:
        return self.steps.sum(axis=1)

    # -- kernel -----------------------------------------------------------

    def plan(self, cfg: BilliardConfig) -> Plan:
        L, R = cfg.L, cfg.R
        lx, ly, vx, vy = self.lx, self.ly, self.vx, self.vy
        inf = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(vx > 0.0, (L - lx) / vx, np.where(vx < 0.0, -lx / vx, inf))
            ty = np.where(vy > 0.0, (L - ly) / vy, np.where(vy < 0.0, -ly / vy, inf))
        np.maximum(tx, 0.0, out=tx)
        np.maximum(ty, 0.0, out=ty)

        td = np.full(lx.shape, inf)
        which = np.zeros(lx.shape, np.int8)
        if R > 0.0:
            r2 = R * R
            for k, (ox, oy) in enumerate(disk_offsets(cfg)):
                ex = lx - (0.5 * L + ox)
                ey = ly - (0.5 * L + oy)
                b = ex * vx + ey * vy
                c = ex * ex + ey * ey - r2
                disc = b * b - c
                hit = (b < 0.0) & (disc > TANGENCY_TOL)
                if not hit.any():
                    continue
                # stable root of t^2 + 2bt + c = 0 nearest the particle
                with np.errstate(invalid="ignore", divide="ignore"):
                    tk = np.where(hit, c / (np.sqrt(np.where(hit, disc, 0.0)) - b), inf)
                np.maximum(tk, 0.0, out=tk)
                better = tk < td
                td = np.where(better, tk, td)
                which = np.where(better, k, which).astype(np.int8)

        twall = np.minimum(tx, ty)
        disk = td <= twall
        dt = np.where(disk, td, twall)
        x_wall = ~disk & (tx <= ty)
        with np.errstate(invalid="ignore"):
            gap = np.where(x_wall, np.abs(vy) * (ty - tx), np.abs(vx) * (tx - ty))
        corner = ~disk & (gap <= CORNER_TOL)
        return Plan(dt, disk, x_wall, corner, which)

    def apply(self, plan: Plan, cfg: BilliardConfig, mask: np.ndarray | None = None) -> None:
        """Advance every member (or those in ``mask``) through its planned event."""
        L, R = cfg.L, cfg.R
        dt = plan.dt if mask is None else np.where(mask, plan.dt, 0.0)
        disk = plan.disk if mask is None else plan.disk & mask
        wall = ~plan.disk if mask is None else ~plan.disk & mask
        xw = wall & plan.x_wall
        yw = wall & ~plan.x_wall
        corner = plan.corner & wall

        self.lx += self.vx * dt
        self.ly += self.vy * dt

        if xw.any():
            right = xw & (self.vx > 0.0)
            left = xw & ~right
            self.ix += right.astype(np.int64) - left.astype(np.int64)
            self.lx = np.where(right, 0.0, np.where(left, L, self.lx))
            self.steps[:, SX_PLUS] += right
            self.steps[:, SX_MINUS] += left
            cx = corner & xw
            if cx.any():
                self.ly = np.where(cx & (self.vy > 0.0), np.minimum(self.ly, L - CORNER_NUDGE), self.ly)
                self.ly = np.where(cx & (self.vy < 0.0), np.maximum(self.ly, CORNER_NUDGE), self.ly)
        if yw.any():
            up = yw & (self.vy > 0.0)
            down = yw & ~up
            self.iy += up.astype(np.int64) - down.astype(np.int64)
            self.ly = np.where(up, 0.0, np.where(down, L, self.ly))
            self.steps[:, SY_PLUS] += up
            self.steps[:, SY_MINUS] += down
            cy = corner & yw
            if cy.any():
                self.lx = np.where(cy & (self.vx > 0.0), np.minimum(self.lx, L - CORNER_NUDGE), self.lx)
                self.lx = np.where(cy & (self.vx < 0.0), np.maximum(self.lx, CORNER_NUDGE), self.lx)
        self.corner_hits += int(corner.sum())

        if disk.any():
            offs = np.asarray(disk_offsets(cfg))
            ox = offs[plan.which, 0]
            oy = offs[plan.which, 1]
            ex = self.lx - (0.5 * L + ox)
            ey = self.ly - (0.5 * L + oy)
            norm = np.hypot(ex, ey)
            norm = np.where(disk, norm, 1.0)
            nx = ex / norm
            ny = ey / norm
            vn = self.vx * nx + self.vy * ny
            wx = self.vx - 2.0 * vn * nx
            wy = self.vy - 2.0 * vn * ny
            speed = np.sqrt(wx * wx + wy * wy)
            self.vx = np.where(disk, wx / speed, self.vx)
            self.vy = np.where(disk, wy / speed, self.vy)
            self.ndisk += disk

        np.clip(self.lx, 0.0, L, out=self.lx)
        np.clip(self.ly, 0.0, L, out=self.ly)

        # Kahan-compensated clock
        y = dt - self.tc
        s = self.t + y
        self.tc = (s - self.t) - y
        self.t = s
        self.events += (disk | wall)

    # -- observables --------------------------------------------------------

    def displacement_at(self, rows, tp, cfg, x0, y0):
        """Unfolded displacement of ``rows`` at absolute times ``tp``."""
        L = cfg.L
        s = tp - self.t[rows]
        dx = (self.ix[rows] * L - x0) + (self.lx[rows] + self.vx[rows] * s)
        dy = (self.iy[rows] * L - y0) + (self.ly[rows] + self.vy[rows] * s)
        return dx, dy

    def folded_at(self, rows, tp, cfg):
        L = cfg.L
        s = tp - self.t[rows]
        x = np.clip(self.lx[rows] + self.vx[rows] * s, 0.0, L)
        y = np.clip(self.ly[rows] + self.vy[rows] * s, 0.0, L)
        x = np.where(self.ix[rows] & 1, L - x, x)
        y = np.where(self.iy[rows] & 1, L - y, y)
        return x, y


def disk_offsets(cfg: BilliardConfig) -> list[tuple[float, float]]:
    """Centres of candidate disks relative to the own cell's disk."""
    if cfg.overlaps_walls:
        L = cfg.L
        return [(0.0, 0.0), (L, 0.0), (-L, 0.0), (0.0, L), (0.0, -L)]
    return [(0.0, 0.0)]


# -- scalar API ---------------------------------------------------------------


def next_event(state: ParticleState, cfg: BilliardConfig):
    """Return ``(kind, flight_time, new_state)``; ``kind`` is None if nothing is ever hit."""
    sw = Swarm.from_states([state])
    plan = sw.plan(cfg)
    dt = float(plan.dt[0])
    if not math.isfinite(dt):
        return None, math.inf, state.copy()
    sw.apply(plan, cfg)
    kind = EventKind.DISK_REFLECTION if plan.disk[0] else EventKind.WALL_CROSSING
    return kind, dt, sw.state(0)


def fold_to_cell(state: ParticleState, cfg: BilliardConfig):
    """Folded Sinai-billiard coordinates ``(position, direction)`` of a lattice state.

    Every crossed wall is a mirror, so an odd cell index along an axis flips
    that coordinate and the matching velocity component.
    """
    L = cfg.L
    pos = state.local.copy()
    vel = state.direction.copy()
    for a in range(2):
        if state.cell[a] & 1:
            pos[a] = L - pos[a]
            vel[a] = -vel[a]
    return pos, vel


@dataclass
class Event:
    kind: EventKind
    time: float
    folded_point: tuple[float, float]
    incidence: float  # cosine between incoming direction and the surface normal


@dataclass
class CollisionRecord:
    """Event log of one trajectory and the probe samples taken along it."""

    events: list[Event]
    probe_times: np.ndarray
    wall_counts: np.ndarray
    disk_counts: np.ndarray
    displacements: np.ndarray  # (n_probes, 2)
    final_state: ParticleState
    corner_hits: int = 0

    def kinds(self) -> list[EventKind]:
        return [e.kind for e in self.events]

    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["event_index", "kind", "t", "x_folded", "y_folded"])
            for i, e in enumerate(self.events):
                w.writerow([i, e.kind.name.lower(), repr(e.time), repr(e.folded_point[0]),
                            repr(e.folded_point[1])])


def simulate_until(initial: ParticleState, cfg: BilliardConfig, t_end: float, probes=(),
                   event_budget: int = DEFAULT_EVENT_BUDGET, log_events: bool = True) -> CollisionRecord:
    """Run one trajectory to ``t_end`` and sample it at ``probes``.

    Counts at a probe include the events strictly before it; the
    displacement is interpolated along the free flight in progress.
    """
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    probes = np.asarray(sorted(probes), dtype=float)
    if probes.size and probes[-1] > t_end:
        raise ValueError("probe times must not exceed t_end")

    sw = Swarm.from_states([initial])
    x0 = initial.cell[0] * cfg.L + initial.local[0]
    y0 = initial.cell[1] * cfg.L + initial.local[1]
    row = np.array([0])
    events: list[Event] = []
    nw = np.zeros(probes.size, np.int64)
    ns = np.zeros(probes.size, np.int64)
    disp = np.zeros((probes.size, 2))
    k = 0
    while True:
        plan = sw.plan(cfg)
        t_now = float(sw.t[0])
        end = t_now + float(plan.dt[0])
        while k < probes.size and probes[k] <= end:
            dx, dy = sw.displacement_at(row, probes[k], cfg, x0, y0)
            nw[k] = sw.steps[0].sum()
            ns[k] = sw.ndisk[0]
            disp[k] = dx[0], dy[0]
            k += 1
        if end > t_end:
            break
        if sw.events[0] >= event_budget:
            raise EventBudgetExceeded(
                f"trajectory exceeded {event_budget} events before t={t_end}", particles=[0]
            )
        vin = np.array([sw.vx[0], sw.vy[0]])
        sw.apply(plan, cfg)
        if log_events:
            events.append(_make_event(sw, plan, vin, cfg))
    state = sw.state(0)
    return CollisionRecord(events, probes, nw, ns, disp, state, sw.corner_hits)


def _make_event(sw: Swarm, plan: Plan, vin: np.ndarray, cfg: BilliardConfig) -> Event:
    st = sw.state(0)
    # a wall crossing lands on the boundary shared with the previous cell,
    # which folds to the wall the billiard orbit reflected from
    pos, _ = fold_to_cell(st, cfg)
    if plan.disk[0]:
        kind = EventKind.DISK_REFLECTION
        off = disk_offsets(cfg)[int(plan.which[0])]
        n = st.local - (0.5 * cfg.L + np.asarray(off))
        n = n / np.hypot(*n)
        cos_inc = float(-vin @ n)
    else:
        kind = EventKind.WALL_CROSSING
        cos_inc = float(abs(vin[0] if plan.x_wall[0] else vin[1]))
    return Event(kind, float(sw.t[0]), (float(pos[0]), float(pos[1])), cos_inc)
