"""Reference Sinai-billiard integrator working in the folded table.

Walls reflect, there is a single disk, and everything is plain scalar
``math``.  It shares no code with :mod:`lorentz_gas.engine` and exists to
check the lattice unfolding event for event.
"""

from __future__ import annotations

import math

from .engine import Event, EventKind
from .geometry import BilliardConfig


def simulate_sinai(x: float, y: float, vx: float, vy: float, cfg: BilliardConfig,
                   t_end: float, max_events: int = 10**6) -> list[Event]:
    L, R = cfg.L, cfg.R
    c = 0.5 * L
    t = 0.0
    out: list[Event] = []
    for _ in range(max_events):
        tx = (L - x) / vx if vx > 0 else (-x / vx if vx < 0 else math.inf)
        ty = (L - y) / vy if vy > 0 else (-y / vy if vy < 0 else math.inf)
        td = math.inf
        if R > 0:
            ex, ey = x - c, y - c
            b = ex * vx + ey * vy
            q = ex * ex + ey * ey - R * R
            disc = b * b - q
            if b < 0 and disc > 1e-12:
                td = max(q / (math.sqrt(disc) - b), 0.0)
        dt = min(tx, ty, td)
        if t + dt > t_end:
            break
        t += dt
        x += vx * dt
        y += vy * dt
        if td <= min(tx, ty):
            nx, ny = x - c, y - c
            h = math.hypot(nx, ny)
            nx, ny = nx / h, ny / h
            vn = vx * nx + vy * ny
            vx, vy = vx - 2 * vn * nx, vy - 2 * vn * ny
            s = math.hypot(vx, vy)
            vx, vy = vx / s, vy / s
            out.append(Event(EventKind.DISK_REFLECTION, t, (x, y), -vn))
        elif tx <= ty:
            x = L if vx > 0 else 0.0
            out.append(Event(EventKind.WALL_CROSSING, t, (x, y), abs(vx)))
            vx = -vx
        else:
            y = L if vy > 0 else 0.0
            out.append(Event(EventKind.WALL_CROSSING, t, (x, y), abs(vy)))
            vy = -vy
    return out
