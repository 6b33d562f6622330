"""Observables derived from ensemble counts.

Distributions in reduced coordinates, power-law fits for the diffusion
exponent, the fourth-moment ratio, tail fits and goodness-of-fit
against the closed-form oracles.

Collision counts are integers, so a histogram or a KS statistic taken
against a continuous density has to respect the lattice.  Histogram
edges sit on half-integers and the empirical CDF at count ``m`` is
compared with the oracle CDF at ``m + 1/2`` (continuity correction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .moments import EnsembleMoments
from .oracles import ReducedOracle, implied_z

DEFAULT_FALLBACK_WIDTH = 0.1  # reduced units
TAIL_START = 2.0


class NoScalingRegime(ValueError):
    """Variance does not grow over the fit window."""


class InsufficientTail(ValueError):
    """Too few populated bins beyond the tail cut-off."""


@dataclass
class DistributionEstimate:
    time: float
    kind: str
    samples: np.ndarray
    mean: float
    variance: float
    m4: float
    lattice: bool
    edges: np.ndarray | None = None
    density: np.ndarray | None = None
    reduced_edges: np.ndarray | None = None
    reduced_density: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def point_mass(self) -> bool:
        return self.variance <= 0.0

    @property
    def reduced_samples(self) -> np.ndarray:
        if self.point_mass:
            raise ValueError("degenerate variance: reduced coordinates undefined (point mass)")
        return (self.samples - self.mean) / self.std

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def reduced_centers(self) -> np.ndarray:
        return 0.5 * (self.reduced_edges[1:] + self.reduced_edges[:-1])

    @property
    def kurtosis(self) -> float:
        return self.m4 / self.variance**2


def _is_lattice(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(x == np.round(x)))


def estimate_distribution(samples, time: float = math.nan, kind: str = "wall") -> DistributionEstimate:
    """Histogram of collision numbers and its reduced-coordinate version.

    Freedman-Diaconis width on the reduced variable, rounded to a whole
    number of counts for integer data; 0.1 reduced units when the
    interquartile range vanishes.  Constant input gives a point mass with
    no reduced histogram.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    lattice = _is_lattice(x)
    mean = float(np.mean(x))
    d = x - mean
    var = float(np.mean(d * d))
    m4 = float(np.mean(d**4))
    est = DistributionEstimate(time, kind, x, mean, var, m4, lattice)
    if est.point_mass:
        est.edges = np.array([x[0] - 0.5, x[0] + 0.5])
        est.density = np.array([1.0])
        return est

    sd = math.sqrt(var)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) / x.size ** (1.0 / 3.0) / sd
    if width <= 0.0:
        width = DEFAULT_FALLBACK_WIDTH
    if lattice:
        step = max(1, int(round(width * sd)))
        lo = math.floor(x.min()) - 0.5
        nb = int(math.ceil((x.max() + 0.5 - lo) / step))
        edges = lo + step * np.arange(nb + 1)
    else:
        w = width * sd
        nb = max(1, int(math.ceil((x.max() - x.min()) / w)))
        edges = x.min() + w * np.arange(nb + 1)
        edges[-1] = max(edges[-1], x.max())
    dens, edges = np.histogram(x, bins=edges, density=True)
    est.edges = edges
    est.density = dens
    est.reduced_edges = (edges - mean) / sd
    est.reduced_density = dens * sd
    return est


# -- goodness of fit ----------------------------------------------------------------


@dataclass
class GoodnessOfFit:
    ks: float
    ks_pvalue: float
    ks_critical_5: float
    ks_critical_1: float
    chi2: float
    chi2_dof: int
    chi2_pvalue: float
    n: int

    def passes_ks(self, alpha: float = 0.05) -> bool:
        crit = {0.05: self.ks_critical_5, 0.01: self.ks_critical_1}.get(alpha)
        if crit is None:
            crit = float(sps.kstwo.isf(alpha, self.n))
        return self.ks < crit


def ks_distance(dist: DistributionEstimate, oracle: ReducedOracle) -> float:
    z = dist.reduced_samples
    if dist.lattice:
        vals, cnt = np.unique(dist.samples, return_counts=True)
        f_emp = np.cumsum(cnt) / dist.n
        f_lo = np.concatenate([[0.0], f_emp[:-1]])
        f0_hi = oracle.cdf((vals + 0.5 - dist.mean) / dist.std)
        f0_lo = oracle.cdf((vals - 0.5 - dist.mean) / dist.std)
        return float(max(np.max(np.abs(f_emp - f0_hi)), np.max(np.abs(f_lo - f0_lo))))
    return float(sps.kstest(z, oracle.cdf).statistic)


def _chi_square(dist: DistributionEstimate, oracle: ReducedOracle, min_expected: float = 5.0):
    edges = dist.reduced_edges
    obs = np.histogram(dist.reduced_samples, bins=edges)[0].astype(float)
    cdf = oracle.cdf(edges)
    exp_ = np.diff(cdf) * dist.n
    # fold the oracle mass beyond the histogram range into the end bins
    exp_[0] += cdf[0] * dist.n
    exp_[-1] += (1.0 - cdf[-1]) * dist.n
    o_m, e_m = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs, exp_):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            o_m.append(o_acc)
            e_m.append(e_acc)
            o_acc = e_acc = 0.0
    if o_acc or e_acc:
        if e_m:
            o_m[-1] += o_acc
            e_m[-1] += e_acc
        else:
            o_m.append(o_acc)
            e_m.append(e_acc)
    o_m = np.array(o_m)
    e_m = np.array(e_m)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(e_m > 0, (o_m - e_m) ** 2 / e_m, np.where(o_m > 0, np.inf, 0.0))
    chi2 = float(terms.sum())
    dof = max(len(o_m) - 1, 1)
    return chi2, dof, float(sps.chi2.sf(chi2, dof))


def compare_to_oracle(dist: DistributionEstimate, oracle: ReducedOracle) -> GoodnessOfFit:
    """KS distance and binned chi-squared of the reduced distribution against ``oracle``."""
    ks = ks_distance(dist, oracle)
    n = dist.n
    chi2, dof, chi2_p = _chi_square(dist, oracle)
    return GoodnessOfFit(
        ks=ks,
        ks_pvalue=float(sps.kstwo.sf(ks, n)),
        ks_critical_5=float(sps.kstwo.isf(0.05, n)),
        ks_critical_1=float(sps.kstwo.isf(0.01, n)),
        chi2=chi2,
        chi2_dof=dof,
        chi2_pvalue=chi2_p,
        n=n,
    )


# -- diffusion exponent -----------------------------------------------------------------


@dataclass
class PowerLawFit:
    slope: float
    slope_stderr: float
    intercept: float
    r_squared: float
    n_points: int


def fit_power_law(t, y) -> PowerLawFit:
    """Least-squares line through ``(log t, log y)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(t <= 0):
        raise NoScalingRegime("power-law fit needs positive data")
    lt, ly = np.log(t), np.log(y)
    if t.size == 2:
        slope = (ly[1] - ly[0]) / (lt[1] - lt[0])
        return PowerLawFit(slope, 0.0, ly[0] - slope * lt[0], 1.0, 2)
    res = sps.linregress(lt, ly)
    r2 = res.rvalue**2 if np.isfinite(res.rvalue) else 1.0
    return PowerLawFit(float(res.slope), float(res.stderr), float(res.intercept), float(r2), t.size)


@dataclass
class DiffusionFit:
    z: float
    stderr: float
    window: tuple[float, float]
    slope: float
    r_squared: float
    normalization: str
    kind: str
    n_probes: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "z": self.z, "stderr": self.stderr, "window": list(self.window), "slope": self.slope,
            "r_squared": self.r_squared, "normalization": self.normalization, "kind": self.kind,
            "n_probes": self.n_probes, **self.extras,
        }


def z_from_variances(t_over_tau, variances) -> tuple[float, float, PowerLawFit]:
    fit = fit_power_law(t_over_tau, variances)
    if not fit.slope > 0:
        raise NoScalingRegime(f"variance slope {fit.slope:.4g} is not positive")
    z = 2.0 / fit.slope
    return z, 2.0 * fit.slope_stderr / fit.slope**2, fit


def fit_diffusion_exponent(moments: EnsembleMoments, tau: float, window=(50.0, None),
                           kind: str = "wall", normalization: str = "wall",
                           min_probes: int = 5) -> DiffusionFit:
    """``z`` from ``Var n(t) ~ (t/tau)^(2/z)`` over probes inside ``window`` (units of tau).

    Alongside the headline fit the result carries the disk-count and
    displacement-variance exponents (when defined) and the per-probe ratio
    ``Var n / ((2/tau^2) <dr^2>)``.
    """
    x = moments.times / tau
    lo, hi = window
    hi = math.inf if hi is None else hi
    sel = np.nonzero((x >= lo * (1 - 1e-9)) & (x <= hi * (1 + 1e-9)))[0]
    if sel.size < min_probes:
        raise ValueError(f"need >= {min_probes} probes in window [{lo}, {hi}], got {sel.size}")
    var = np.array([moments.variance(kind, p) for p in sel])
    z, zerr, fit = z_from_variances(x[sel], var)
    extras: dict = {}
    other = "disk" if kind == "wall" else "wall"
    ovar = np.array([moments.variance(other, p) for p in sel])
    if np.all(ovar > 0):
        try:
            extras[f"z_{other}"], extras[f"z_{other}_stderr"], _ = z_from_variances(x[sel], ovar)
        except NoScalingRegime:
            extras[f"z_{other}"] = None
    dvar = np.array([moments.displacement_variance(p) for p in sel])
    if np.all(dvar > 0):
        try:
            extras["z_displacement"], extras["z_displacement_stderr"], _ = z_from_variances(x[sel], dvar)
        except NoScalingRegime:
            extras["z_displacement"] = None
        extras["variance_displacement_ratio"] = (var / (2.0 / tau**2 * dvar)).tolist()
    t_sel = x[sel]
    return DiffusionFit(z, zerr, (float(t_sel[0]), float(t_sel[-1])), fit.slope, fit.r_squared,
                        normalization, kind, int(sel.size), extras)


def jackknife_diffusion_exponent(blocks, tau: float, window=(50.0, None), kind: str = "wall",
                                 normalization: str = "wall") -> DiffusionFit:
    """Headline fit on the merged blocks with a leave-one-block-out standard error.

    Probe variances share their particles, so the regression error of the
    slope understates the sampling uncertainty; the jackknife does not.
    """
    blocks = list(blocks)
    if len(blocks) < 2:
        raise ValueError("jackknife needs at least two blocks")
    total = blocks[0]
    for b in blocks[1:]:
        total = total.merge(b)
    full = fit_diffusion_exponent(total, tau, window, kind, normalization)
    zs = []
    for i in range(len(blocks)):
        rest = [b for j, b in enumerate(blocks) if j != i]
        acc = rest[0]
        for b in rest[1:]:
            acc = acc.merge(b)
        zs.append(fit_diffusion_exponent(acc, tau, window, kind, normalization).z)
    zs = np.array(zs)
    B = zs.size
    se = float(math.sqrt((B - 1) / B * np.sum((zs - zs.mean()) ** 2)))
    full.extras["regression_stderr"] = full.stderr
    full.extras["stderr_method"] = f"jackknife over {B} particle blocks"
    full.stderr = se
    return full


def kurtosis_ratio(moments: EnsembleMoments, p: int, kind: str = "wall", standardized: bool = True) -> float:
    """Fourth central moment over the squared variance (Gaussian value 3).

    ``standardized=False`` returns the literal fourth-over-second ratio.
    """
    m2 = moments.variance(kind, p)
    if not m2 > 0:
        raise ValueError("degenerate variance: kurtosis undefined")
    m4 = moments.central_moment(kind, 4, p)
    return m4 / m2**2 if standardized else m4 / m2


# -- Levy tail ---------------------------------------------------------------------------


@dataclass
class LevyTailFit:
    exponent: float
    stderr: float
    amplitude: float
    implied_z: float
    n_bins: int
    side: str
    centers: np.ndarray
    densities: np.ndarray


def _tail_bins(dist: DistributionEstimate, lo: float, sign: int, nbins: int):
    z = dist.reduced_samples * sign
    z = z[z >= lo]
    if z.size == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    hi = z.max() * (1 + 1e-12)
    edges = np.geomspace(lo, hi, nbins + 1) if hi > lo else np.array([lo, lo * 1.01])
    if dist.lattice:
        # snap edges to half-integer counts so every bin holds whole lattice values
        n_edges = np.round(dist.mean + sign * edges * dist.std - 0.5 * sign) + 0.5 * sign
        n_edges = np.unique(n_edges)
        edges = np.sort(sign * (n_edges - dist.mean) / dist.std)
        edges = edges[edges >= lo - 1.0 / dist.std]
    counts = np.histogram(z, bins=edges)[0].astype(float)
    widths = np.diff(edges)
    centers = np.sqrt(np.clip(edges[:-1], 1e-300, None) * edges[1:])
    return centers, counts, widths


def fit_levy_tail(dist: DistributionEstimate, tail_start: float = TAIL_START, side: str = "both",
                  nbins: int = 12, min_count: int = 3, min_bins: int = 5) -> LevyTailFit:
    """Power-law fit ``D(n~) = A |n~|^p`` over ``|n~| >= tail_start``.

    Log-spaced bins (snapped to the count lattice for integer data), weighted
    least squares on ``log D`` with Poisson weights.  ``side`` picks the
    lower tail, the upper tail, or both folded together.
    """
    if dist.point_mass:
        raise InsufficientTail("point mass has no tail")
    sides = {"both": (-1, 1), "lower": (-1,), "upper": (1,)}[side]
    cs, ds, ws = [], [], []
    for s in sides:
        c, k, w = _tail_bins(dist, tail_start, s, nbins)
        ok = k >= min_count
        cs.append(c[ok])
        ds.append(k[ok] / (dist.n * w[ok] * len(sides)))
        ws.append(k[ok])
    c = np.concatenate(cs)
    d = np.concatenate(ds)
    w = np.concatenate(ws)
    if c.size < min_bins:
        raise InsufficientTail(f"only {c.size} populated tail bins beyond |n~| = {tail_start}")
    X = np.column_stack([np.ones_like(c), np.log(c)])
    W = w
    A = X.T @ (W[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (W * np.log(d)))
    resid = np.log(d) - X @ coef
    dof = max(c.size - 2, 1)
    s2 = float((W * resid**2).sum() / dof)
    cov = np.linalg.inv(A) * s2
    p = float(coef[1])
    return LevyTailFit(p, float(math.sqrt(cov[1, 1])), float(math.exp(coef[0])), implied_z(p),
                       int(c.size), side, c, d)
