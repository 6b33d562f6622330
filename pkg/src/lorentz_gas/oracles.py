"""Closed-form reference curves for collision statistics.

Everything here is a pure function of its arguments.  Densities that are
compared with simulated histograms also come as :class:`ReducedOracle`
objects carrying both pdf and cdf in the reduced collision number
``(n - mean) / std``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

SIGMA0 = 0.29  # square-billiard dispersion parameter
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ReducedOracle:
    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float] = (-math.inf, math.inf)


# -- square billiard ---------------------------------------------------------------


def wall_collision_count(theta, t, L: float = 1.0):
    """Wall collisions of a straight orbit at launch angle ``theta`` by time ``t``.

    Any angle is accepted; it is folded onto ``[0, pi/4]`` by the lattice
    symmetry, i.e. ``|cos| + |sin|`` is used.
    """
    theta = np.asarray(theta, dtype=float)
    return t / L * (np.abs(np.cos(theta)) + np.abs(np.sin(theta)))


def characteristic_rate(theta, L: float = 1.0):
    """Inverse characteristic wall time ``(cos + sin) / L`` of one orbit."""
    theta = np.asarray(theta, dtype=float)
    return (np.abs(np.cos(theta)) + np.abs(np.sin(theta))) / L


KAPPA = math.pi**2 / 16.0 + math.pi / 8.0 - 1.0


@dataclass(frozen=True)
class SquareBilliardOracle:
    """Deterministic wall-collision statistics of the empty square (R = 0).

    The orbit with angle ``theta`` makes ``u t / L`` collisions with
    ``u = cos + sin`` in ``[1, sqrt 2]``.  Uniform ``theta`` on ``[0, pi/4]``
    then gives the density

        D0(n) = (4/pi) |d theta/dn| = 16 / (pi^2 n_c0 sqrt(2 - u^2)),
        u = (4/pi) n / n_c0,

    on ``pi/4 < n/n_c0 < pi sqrt(2)/4``.  Since ``sqrt(2 - u^2) =
    sqrt(2) sin(pi/4 - theta)`` this is the cosecant form of the printed
    result.  The density diverges like ``(n_max - n)^(-1/2)`` at the upper
    end, where the diagonal orbits accumulate.
    """

    L: float = 1.0

    @property
    def tau_c0(self) -> float:
        return math.pi * self.L / 4.0

    kappa = KAPPA

    def mean(self, t):
        return 4.0 * np.asarray(t, dtype=float) / (math.pi * self.L)

    def variance(self, t):
        return self.kappa * self.mean(t) ** 2

    def support(self, t) -> tuple[float, float]:
        nc = self.mean(t)
        return float(nc * math.pi / 4.0), float(nc * math.pi * SQRT2 / 4.0)

    def density(self, n, t):
        n = np.asarray(n, dtype=float)
        nc = self.mean(t)
        u = 4.0 / math.pi * n / nc
        inside = (u > 1.0) & (u < SQRT2)
        with np.errstate(invalid="ignore", divide="ignore"):
            d = 16.0 / (math.pi**2 * nc * np.sqrt(2.0 - u * u))
        return np.where(inside, d, 0.0)

    def density_printed(self, n, t):
        """The published cosecant form, evaluated literally."""
        n = np.asarray(n, dtype=float)
        nc = self.mean(t)
        arg = (4.0 / math.pi * n / nc) ** 2 - 1.0
        inside = (arg > 0.0) & (arg < 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = 0.5 * np.arcsin(np.clip(arg, -1.0, 1.0))
            d = 16.0 / (math.pi**2 * nc * SQRT2) / np.sin(math.pi / 4.0 - theta)
        return np.where(inside, d, 0.0)

    def cdf(self, n, t):
        n = np.asarray(n, dtype=float)
        u = np.clip(4.0 / math.pi * n / self.mean(t), 1.0, SQRT2)
        return 2.0 / math.pi * np.arcsin(np.clip(u * u - 1.0, -1.0, 1.0))

    def quadrature_moments(self, t) -> tuple[float, float, float]:
        """``(integral, mean, variance)`` of the density by adaptive quadrature.

        The inverse square-root singularity at the upper edge is handled
        with an algebraic weight, so the integrand passed to QUADPACK is smooth.
        """
        nc = float(self.mean(t))
        k = 4.0 / (math.pi * nc)
        a, b = self.support(t)
        pre = 16.0 / (math.pi**2 * nc)

        def smooth(n, p):
            return pre / math.sqrt(k * (SQRT2 + k * n)) * n**p

        opts = dict(weight="alg", wvar=(0.0, -0.5), epsabs=0.0, epsrel=1e-12, limit=200)
        m0 = integrate.quad(smooth, a, b, args=(0,), **opts)[0]
        m1 = integrate.quad(smooth, a, b, args=(1,), **opts)[0]
        m2 = integrate.quad(smooth, a, b, args=(2,), **opts)[0]
        mean = m1 / m0
        return m0, mean, m2 / m0 - mean * mean

    def lattice_pmf(self, t, n_theta: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
        """Exact distribution of the integer wall count under the Liouville measure.

        The continuous density ignores that counts are whole numbers.  With a
        uniform start in the cell, the crossings along x number
        ``floor(X) + B`` where ``X = t |cos theta| / L`` and ``B`` is Bernoulli
        with success probability ``frac(X)``; likewise along y.  The result
        averages the resulting three-point law over ``theta`` with a midpoint
        rule.  Returns ``(m, P(n = m))``.
        """
        th = (np.arange(n_theta) + 0.5) * (0.5 * math.pi / n_theta)
        X = t * np.cos(th) / self.L
        Y = t * np.sin(th) / self.L
        base = (np.floor(X) + np.floor(Y)).astype(np.int64)
        px, py = X - np.floor(X), Y - np.floor(Y)
        lo = int(base.min())
        size = int(base.max()) + 3 - lo
        pmf = np.zeros(size)
        for shift, w in ((0, (1 - px) * (1 - py)), (1, px * (1 - py) + (1 - px) * py), (2, px * py)):
            pmf += np.bincount(base - lo + shift, weights=w, minlength=size)
        pmf /= n_theta
        return np.arange(lo, lo + size), pmf

    def reduced(self) -> ReducedOracle:
        """D0 in ``(n - n_c0) / sqrt(kappa n_c0^2)``; independent of ``t``."""
        s = math.sqrt(self.kappa)
        t = self.tau_c0  # n_c0 = 1 here; the reduced curve does not depend on t
        lo = (math.pi / 4.0 - 1.0) / s
        hi = (math.pi * SQRT2 / 4.0 - 1.0) / s
        return ReducedOracle(
            "square",
            lambda x: s * self.density(1.0 + s * np.asarray(x, dtype=float), t),
            lambda x: self.cdf(1.0 + s * np.asarray(x, dtype=float), t),
            (lo, hi),
        )


def square_distribution(n, t, L: float = 1.0):
    return SquareBilliardOracle(L).density(n, t)


# -- Gaussian regime ---------------------------------------------------------------


def gaussian_distribution(n, n_c, var):
    if not var > 0:
        raise ValueError("variance must be positive")
    n = np.asarray(n, dtype=float)
    return np.exp(-((n - n_c) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _norm_cdf(x):
    return special.ndtr(np.asarray(x, dtype=float))


GAUSSIAN = ReducedOracle("gaussian", _norm_pdf, _norm_cdf)


# -- Levy jumps --------------------------------------------------------------------


def levy_exponent(z: float) -> float:
    """Power of the jump-length tail, ``2/z - 5``."""
    return 2.0 / z - 5.0


def implied_z(exponent: float) -> float:
    return 2.0 / (exponent + 5.0)


@dataclass(frozen=True)
class LevyJumps:
    """Jump-length density ``Lambda(r) ~ r^(2/z - 5)`` normalised on ``[r_min, inf)``.

    The waiting-time density couples jump length and flight time through
    ``delta(r - t)`` at unit speed; :meth:`waiting_time` returns the weight
    of that delta, i.e. ``Lambda(r)`` on the ballistic line and 0 elsewhere.
    """

    z: float
    r_min: float = 1.0

    def __post_init__(self) -> None:
        if not 1.0 < self.z < 2.0:
            raise ValueError(f"z must lie in (1, 2), got {self.z}")
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")

    @property
    def exponent(self) -> float:
        return levy_exponent(self.z)

    def jump_density(self, r):
        r = np.asarray(r, dtype=float)
        a = -self.exponent  # > 3
        c = (a - 1.0) * self.r_min ** (a - 1.0)
        with np.errstate(divide="ignore"):
            return np.where(r >= self.r_min, c * r ** (-a), 0.0)

    def waiting_time(self, r, t, rtol: float = 1e-12):
        r = np.asarray(r, dtype=float)
        on_line = np.isclose(r, t, rtol=rtol, atol=0.0)
        return np.where(on_line, self.jump_density(r), 0.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-transform draws from the jump-length density."""
        a = -self.exponent
        u = rng.random(size)
        return self.r_min * (1.0 - u) ** (-1.0 / (a - 1.0))


def levy_densities(r, t, z: float, r_min: float = 1.0):
    """``(Psi(r, t), Lambda(r))``; ``Psi`` as the weight of its ``delta(r - t)``."""
    jumps = LevyJumps(z, r_min)
    return jumps.waiting_time(r, t), jumps.jump_density(r)


# -- velocity dispersion ------------------------------------------------------------


class SigmaVariant(enum.Enum):
    QUASI_CHAOTIC = "quasi-chaotic"
    BOUNCING_BALL = "bouncing-ball"
    BOUNCING_BALL_APPROX = "bouncing-ball-approx"


def dispersion_sigma(R, L: float = 1.0, variant=SigmaVariant.BOUNCING_BALL, sigma0: float = SIGMA0):
    """Velocity dispersion parameter for ``0 <= R < L/2``; zero beyond (out of domain)."""
    variant = SigmaVariant(variant)
    rho = np.asarray(R, dtype=float) / L
    if np.any(rho < 0):
        raise ValueError("R must be non-negative")
    x = np.clip(1.0 - 2.0 * rho, 0.0, None)
    if variant is SigmaVariant.QUASI_CHAOTIC:
        # R2 = L/2, so (R2/L)^2 = 1/4
        out = np.sqrt(x) / (12.0 * math.sqrt(5.0) * 0.25)
    elif variant is SigmaVariant.BOUNCING_BALL:
        out = sigma0 * np.sqrt(4.0 / math.pi * np.arcsin(x / np.sqrt(1.0 + x * x)) / (1.0 - math.pi * rho**2))
    else:
        out = sigma0 * np.sqrt(x / (1.0 - math.pi * rho**2))
    out = np.where(rho < 0.5, out, 0.0)
    return float(out) if out.ndim == 0 else out


def sigma_in_domain(R, L: float = 1.0) -> bool:
    return 0.0 <= R < 0.5 * L


def pseudo_gaussian_velocity_density(v, sigma: float):
    """Normal density centred at 1/2, truncated to ``[0, 1]``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    v = np.asarray(v, dtype=float)
    g = np.exp(-((v - 0.5) ** 2) / (2.0 * sigma**2)) / (sigma * math.sqrt(2.0 * math.pi))
    g = g / special.erf(1.0 / (2.0 * SQRT2 * sigma))
    return np.where((v >= 0.0) & (v <= 1.0), g, 0.0)


# -- registry for the CLI --------------------------------------------------------------

ORACLES = {
    "square": "square-billiard density D0 against n/n_c0",
    "square-reduced": "square-billiard density in reduced coordinates",
    "gaussian": "unit normal density in reduced coordinates",
    "levy": "jump-length density Lambda(r) (param z, r_min)",
    "sigma-quasi-chaotic": "dispersion sigma(R/L), quasi-chaotic form",
    "sigma-bouncing-ball": "dispersion sigma(R/L), bouncing-ball form",
    "sigma-bouncing-ball-approx": "dispersion sigma(R/L), bouncing-ball approximation",
    "pseudo-gaussian": "truncated normal velocity density g_sigma(v) (param sigma)",
}


def sample_oracle(name: str, grid, **params) -> np.ndarray:
    """Evaluate a named oracle on ``grid``; returns the curve values."""
    grid = np.asarray(grid, dtype=float)
    if name == "square":
        sq = SquareBilliardOracle(params.get("L", 1.0))
        t = sq.tau_c0 * params.get("t_over_tau", 100.0)
        nc = float(sq.mean(t))
        return nc * sq.density(grid * nc, t)
    if name == "square-reduced":
        return SquareBilliardOracle(params.get("L", 1.0)).reduced().pdf(grid)
    if name == "gaussian":
        return GAUSSIAN.pdf(grid)
    if name == "levy":
        return LevyJumps(params.get("z", 1.5), params.get("r_min", 1.0)).jump_density(grid)
    if name.startswith("sigma-"):
        return dispersion_sigma(grid, 1.0, name[len("sigma-"):])
    if name == "pseudo-gaussian":
        return pseudo_gaussian_velocity_density(grid, params.get("sigma", 0.14))
    raise KeyError(f"unknown oracle {name!r}; available: {', '.join(sorted(ORACLES))}")
