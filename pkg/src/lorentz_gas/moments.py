"""Mergeable moment accumulators for collision counts and displacements.

Count power sums are Python integers, so merging partial accumulators in
any grouping gives exactly the single-pass result and central moments
are computed without cancellation.  Displacement sums are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

KINDS = ("wall", "disk")
MAX_ORDER = 4


def _int_power_sums(values: np.ndarray) -> list[int]:
    vals, cnts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    out = [0] * MAX_ORDER
    for v, c in zip(vals.tolist(), cnts.tolist()):
        p = 1
        for k in range(MAX_ORDER):
            p *= v
            out[k] += c * p
    return out


@dataclass
class EnsembleMoments:
    """Per-probe raw sums.

    ``counts[p]`` is the number of particles at probe ``p``; ``power_sums[kind][p][k]``
    is the sum of ``n**(k+1)``; ``disp_sums[p]`` holds the sums of ``dx``, ``dy``
    and ``dx**2 + dy**2``.
    """

    times: np.ndarray
    counts: list[int]
    power_sums: dict[str, list[list[int]]]
    disp_sums: np.ndarray

    @classmethod
    def empty(cls, times) -> "EnsembleMoments":
        times = np.asarray(times, dtype=float)
        P = times.size
        return cls(times, [0] * P, {k: [[0] * MAX_ORDER for _ in range(P)] for k in KINDS},
                   np.zeros((P, 3)))

    @classmethod
    def from_samples(cls, times, n_wall, n_disk, dx=None, dy=None) -> "EnsembleMoments":
        """Accumulate ``(N, P)`` sample arrays, one column per probe time."""
        times = np.asarray(times, dtype=float)
        n_wall = np.asarray(n_wall).reshape(-1, times.size)
        n_disk = np.asarray(n_disk).reshape(-1, times.size)
        m = cls.empty(times)
        N = n_wall.shape[0]
        for p in range(times.size):
            m.counts[p] = N
            m.power_sums["wall"][p] = _int_power_sums(n_wall[:, p])
            m.power_sums["disk"][p] = _int_power_sums(n_disk[:, p])
        if dx is not None:
            dx = np.asarray(dx, dtype=float).reshape(-1, times.size)
            dy = np.asarray(dy, dtype=float).reshape(-1, times.size)
            for p in range(times.size):
                m.disp_sums[p] = (
                    math.fsum(dx[:, p]),
                    math.fsum(dy[:, p]),
                    math.fsum(dx[:, p] ** 2 + dy[:, p] ** 2),
                )
        return m

    def merge(self, other: "EnsembleMoments") -> "EnsembleMoments":
        if not np.array_equal(self.times, other.times):
            raise ValueError("cannot merge accumulators with different probe times")
        P = self.times.size
        return EnsembleMoments(
            self.times.copy(),
            [a + b for a, b in zip(self.counts, other.counts)],
            {k: [[a + b for a, b in zip(self.power_sums[k][p], other.power_sums[k][p])]
                 for p in range(P)] for k in KINDS},
            self.disp_sums + other.disp_sums,
        )

    __add__ = merge

    # -- derived quantities ---------------------------------------------------

    def _raw(self, kind: str, p: int) -> tuple[int, list[Fraction]]:
        N = self.counts[p]
        if N == 0:
            raise ValueError(f"no samples at probe {p}")
        return N, [Fraction(s, N) for s in self.power_sums[kind][p]]

    def mean(self, kind: str, p: int) -> float:
        _, r = self._raw(kind, p)
        return float(r[0])

    def central_moment(self, kind: str, order: int, p: int) -> float:
        """Population central moment of order 2, 3 or 4 (exact, then rounded)."""
        _, (r1, r2, r3, r4) = self._raw(kind, p)
        mu = r1
        if order == 1:
            return 0.0
        if order == 2:
            c = r2 - mu * mu
        elif order == 3:
            c = r3 - 3 * mu * r2 + 2 * mu**3
        elif order == 4:
            c = r4 - 4 * mu * r3 + 6 * mu * mu * r2 - 3 * mu**4
        else:
            raise ValueError("order must be 1..4")
        return float(c)

    def variance(self, kind: str, p: int) -> float:
        return self.central_moment(kind, 2, p)

    def std_errors(self, kind: str, p: int) -> tuple[float, float]:
        """Standard errors of the sample mean and of the sample variance."""
        N = self.counts[p]
        m2 = self.central_moment(kind, 2, p)
        m4 = self.central_moment(kind, 4, p)
        return math.sqrt(m2 / N), math.sqrt(max(m4 - m2 * m2, 0.0) / N)

    def displacement_mean(self, p: int) -> tuple[float, float]:
        N = self.counts[p]
        return self.disp_sums[p, 0] / N, self.disp_sums[p, 1] / N

    def displacement_variance(self, p: int) -> float:
        """``<|dr|^2> - |<dr>|^2``."""
        N = self.counts[p]
        mx, my = self.displacement_mean(p)
        return self.disp_sums[p, 2] / N - mx * mx - my * my

    def series(self, kind: str, what: str = "variance") -> np.ndarray:
        f = {"mean": self.mean, "variance": self.variance}[what]
        return np.array([f(kind, p) for p in range(self.times.size)])

    def table(self) -> list[dict]:
        """One row per probe: means, variances, fourth moments, displacement variance."""
        rows = []
        for p, t in enumerate(self.times):
            row = {"t": float(t), "N": self.counts[p]}
            for k in KINDS:
                row[f"mean_{k}"] = self.mean(k, p)
                row[f"var_{k}"] = self.variance(k, p)
                row[f"m4_{k}"] = self.central_moment(k, 4, p)
            row["var_disp"] = self.displacement_variance(p)
            rows.append(row)
        return rows
