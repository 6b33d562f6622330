"""Liouville-distributed ensembles run in deterministic parallel chunks.

Every particle draws its initial condition from its own Philox stream,
keyed by ``(master_seed, particle_index)``.  Particles are simulated in
fixed-size chunks whose results are concatenated in chunk order, so the
output does not depend on how many worker processes are used.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import DEFAULT_EVENT_BUDGET, EventBudgetExceeded, ParticleState, Swarm
from .geometry import BilliardConfig
from .moments import EnsembleMoments

log = logging.getLogger(__name__)

CHUNK_SIZE = 2048
STEADY_ONSET = 50.0  # in mean collision times
MAX_REJECTIONS = 10**6
_BLOCK = 64


class Normalization(enum.Enum):
    WALL = "wall"
    DISK = "disk"
    TOTAL = "total"


def default_probes(t_min: float = 10.0, t_max: float = 200.0, n: int = 16) -> list[float]:
    """Log-spaced probe schedule in units of the mean collision time."""
    return [float(x) for x in np.geomspace(t_min, t_max, n)]


@dataclass
class EnsembleSpec:
    """What to simulate.  ``t_obs`` and ``probes`` are multiples of the chosen tau."""

    config: BilliardConfig
    n_particles: int
    t_obs: float = 200.0
    probes: list[float] = field(default_factory=default_probes)
    master_seed: int = 0
    normalization: Normalization = Normalization.WALL
    event_budget: int = DEFAULT_EVENT_BUDGET

    def __post_init__(self) -> None:
        self.normalization = Normalization(self.normalization)
        self.probes = sorted(float(p) for p in self.probes)
        if self.n_particles < 1:
            raise ValueError("n_particles must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if not self.probes:
            raise ValueError("at least one probe time is required")
        if self.probes[0] <= 0 or self.probes[-1] > self.t_obs:
            raise ValueError("probe times must lie in (0, t_obs]")
        if self.probes[-1] < STEADY_ONSET:
            raise ValueError(
                f"probe schedule must reach the steady window t >= {STEADY_ONSET:g} tau_c"
            )
        if not math.isfinite(self.tau):
            raise ValueError(f"{self.normalization.value} collision time is infinite for R=0")

    @property
    def tau(self) -> float:
        return self.config.tau(self.normalization.value)

    @property
    def probe_times(self) -> np.ndarray:
        return np.asarray(self.probes) * self.tau


def particle_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based substream for one particle; a pure function of its arguments."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def draw_position(cfg: BilliardConfig, rng: np.random.Generator) -> tuple[float, float, int]:
    """Uniform point of the accessible cell region, plus the number of candidates tried."""
    tried = 0
    while tried < MAX_REJECTIONS:
        xy = rng.random((_BLOCK, 2)) * cfg.L
        ok = cfg.is_accessible(xy[:, 0], xy[:, 1])
        if ok.any():
            j = int(np.argmax(ok))
            return float(xy[j, 0]), float(xy[j, 1]), tried + j + 1
        tried += _BLOCK
    raise RuntimeError(f"rejection sampling failed after {tried} attempts; geometry {cfg}")


def sample_initial_state(cfg: BilliardConfig, rng: np.random.Generator) -> ParticleState:
    """Draw ``(x, y, theta)`` from the Liouville measure of cell (0, 0)."""
    x, y, _ = draw_position(cfg, rng)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return ParticleState([x, y], [math.cos(theta), math.sin(theta)])


def sample_swarm(cfg: BilliardConfig, master_seed: int, start: int, stop: int) -> tuple[Swarm, int]:
    n = stop - start
    lx = np.empty(n)
    ly = np.empty(n)
    vx = np.empty(n)
    vy = np.empty(n)
    tried = 0
    for i in range(n):
        rng = particle_rng(master_seed, start + i)
        x, y, k = draw_position(cfg, rng)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        lx[i], ly[i] = x, y
        vx[i], vy[i] = math.cos(theta), math.sin(theta)
        tried += k
    return Swarm(lx, ly, vx, vy, ids=np.arange(start, stop)), tried


@dataclass
class ProbeSamples:
    """Per-particle observables at each probe, arrays of shape ``(N, P)``."""

    n_wall: np.ndarray
    n_disk: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    fold_x: np.ndarray
    fold_y: np.ndarray
    aborted: np.ndarray  # particle ids that ran out of event budget
    corner_hits: int = 0
    events: int = 0

    @classmethod
    def concat(cls, parts) -> "ProbeSamples":
        parts = list(parts)
        return cls(
            *(np.concatenate([getattr(p, f) for p in parts]) for f in
              ("n_wall", "n_disk", "dx", "dy", "fold_x", "fold_y", "aborted")),
            corner_hits=sum(p.corner_hits for p in parts),
            events=sum(p.events for p in parts),
        )


def propagate(sw: Swarm, cfg: BilliardConfig, probe_times, event_budget: int = DEFAULT_EVENT_BUDGET) -> ProbeSamples:
    """Run a swarm until each member has passed every probe time."""
    probe_times = np.asarray(probe_times, dtype=float)
    P = probe_times.size
    N = len(sw)
    first = int(sw.ids[0]) if N else 0
    out = {f: np.zeros((N, P), dtype=np.int64) for f in ("n_wall", "n_disk")}
    out.update({f: np.full((N, P), np.nan) for f in ("dx", "dy", "fold_x", "fold_y")})
    x0 = sw.ix * cfg.L + sw.lx
    y0 = sw.iy * cfg.L + sw.ly
    nxt = np.zeros(N, np.int64)
    ext = np.append(probe_times, np.inf)
    aborted = []
    total_events = 0

    while len(sw):
        plan = sw.plan(cfg)
        end = sw.t + plan.dt
        while True:
            due = ext[nxt] <= end
            if not due.any():
                break
            rows = np.nonzero(due)[0]
            gid = sw.ids[rows] - first
            k = nxt[rows]
            tp = probe_times[k]
            dx, dy = sw.displacement_at(rows, tp, cfg, x0[rows], y0[rows])
            fx, fy = sw.folded_at(rows, tp, cfg)
            out["n_wall"][gid, k] = sw.steps[rows].sum(axis=1)
            out["n_disk"][gid, k] = sw.ndisk[rows]
            out["dx"][gid, k] = dx
            out["dy"][gid, k] = dy
            out["fold_x"][gid, k] = fx
            out["fold_y"][gid, k] = fy
            nxt[rows] += 1
        sw.apply(plan, cfg)
        over = sw.events > event_budget
        if over.any():
            aborted.extend(sw.ids[over & (nxt < P)].tolist())
        keep = (nxt < P) & ~over
        if not keep.all():
            total_events += int(sw.events[~keep].sum())
            sw.compress(keep)
            nxt = nxt[keep]
            x0 = x0[keep]
            y0 = y0[keep]
    return ProbeSamples(**out, aborted=np.asarray(aborted, dtype=np.int64),
                        corner_hits=sw.corner_hits, events=total_events)


def _run_chunk(args) -> tuple[ProbeSamples, int]:
    L, R, seed, start, stop, probe_times, budget = args
    cfg = BilliardConfig(L, R)
    sw, tried = sample_swarm(cfg, seed, start, stop)
    return propagate(sw, cfg, probe_times, budget), tried


@dataclass
class EnsembleResult:
    spec: EnsembleSpec
    probe_times: np.ndarray
    samples: ProbeSamples
    moments: EnsembleMoments
    acceptance_rate: float

    @property
    def aborted(self) -> list[int]:
        return self.samples.aborted.tolist()

    @property
    def valid(self) -> np.ndarray:
        """Mask of particles that finished within their event budget."""
        mask = np.ones(self.samples.n_wall.shape[0], dtype=bool)
        mask[self.samples.aborted] = False
        return mask

    def counts(self, kind: str) -> np.ndarray:
        arr = self.samples.n_wall if kind == "wall" else self.samples.n_disk
        return arr[self.valid]

    def block_moments(self, n_blocks: int = 20) -> list[EnsembleMoments]:
        """Accumulators over contiguous particle blocks; they merge to ``self.moments``."""
        s = self.samples
        keep = self.valid
        parts = np.array_split(np.nonzero(keep)[0], n_blocks)
        return [EnsembleMoments.from_samples(self.probe_times, s.n_wall[ix], s.n_disk[ix],
                                             s.dx[ix], s.dy[ix]) for ix in parts if ix.size]

    def probe_index(self, t: float, rtol: float = 1e-9) -> int:
        hit = np.nonzero(np.isclose(self.probe_times, t, rtol=rtol, atol=0.0))[0]
        if not hit.size:
            raise KeyError(f"no probe at t={t}; available: {self.probe_times.tolist()}")
        return int(hit[0])


def run_ensemble(spec: EnsembleSpec, workers: int = 1, allow_partial: bool = False,
                 chunk_size: int = CHUNK_SIZE) -> EnsembleResult:
    """Simulate ``spec.n_particles`` trajectories and accumulate probe statistics.

    The result is bit-identical for a given spec whatever ``workers`` is.
    Particles exceeding the event budget raise :class:`EventBudgetExceeded`
    unless ``allow_partial`` is set, in which case they are dropped from
    the moments and listed in ``result.aborted``.
    """
    cfg = spec.config
    times = spec.probe_times
    bounds = [(s, min(s + chunk_size, spec.n_particles))
              for s in range(0, spec.n_particles, chunk_size)]
    jobs = [(cfg.L, cfg.R, spec.master_seed, a, b, times, spec.event_budget) for a, b in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    samples = ProbeSamples.concat(r[0] for r in results)
    tried = sum(r[1] for r in results)
    if samples.aborted.size and not allow_partial:
        raise EventBudgetExceeded(
            f"{samples.aborted.size} particle(s) exceeded {spec.event_budget} events "
            f"(seed {spec.master_seed}): {samples.aborted[:10].tolist()}",
            particles=samples.aborted.tolist(), seed=spec.master_seed,
        )
    if samples.corner_hits:
        log.info("%d corner crossings nudged", samples.corner_hits)

    keep = np.ones(spec.n_particles, dtype=bool)
    keep[samples.aborted] = False
    moments = EnsembleMoments.from_samples(
        times, samples.n_wall[keep], samples.n_disk[keep], samples.dx[keep], samples.dy[keep]
    )
    result = EnsembleResult(spec, times, samples, moments, spec.n_particles / tried)
    _check_mean_rates(result)
    return result


def _check_mean_rates(res: EnsembleResult, nsigma: float = 5.0) -> None:
    cfg = res.spec.config
    m = res.moments
    for p, t in enumerate(res.probe_times):
        if m.counts[p] < 2:
            continue
        for kind, tau in (("wall", cfg.tau_wall), ("disk", cfg.tau_disk)):
            expected = t / tau
            se, _ = m.std_errors(kind, p)
            dev = abs(m.mean(kind, p) - expected)
            if dev > nsigma * max(se, 1e-12) and dev > 1e-9:
                warnings.warn(
                    f"mean {kind} count {m.mean(kind, p):.4f} at t={t:.4g} deviates from "
                    f"t/tau={expected:.4f} by {dev / max(se, 1e-12):.1f} sigma",
                    RuntimeWarning, stacklevel=3,
                )
