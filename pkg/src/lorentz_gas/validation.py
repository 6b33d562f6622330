"""Self-consistency checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`Check`; nothing here raises on a failed
comparison, so a caller can report every result before deciding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .direct import simulate_sinai
from .engine import ParticleState, simulate_until
from .ensemble import EnsembleSpec, run_ensemble
from .geometry import BilliardConfig
from .oracles import GAUSSIAN, KAPPA, LevyJumps, SquareBilliardOracle, pseudo_gaussian_velocity_density


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_oracle_normalization(tol: float = 1e-6) -> list[Check]:
    out = []
    sq = SquareBilliardOracle()
    t = 100.0 * sq.tau_c0
    m0, mean, var = sq.quadrature_moments(t)
    nc = float(sq.mean(t))
    out.append(Check("square density integrates to 1", abs(m0 - 1.0) < tol, f"|I - 1| = {abs(m0 - 1):.2e}"))
    out.append(Check("square density mean is n_c0", abs(mean / nc - 1.0) < tol,
                     f"rel err {abs(mean / nc - 1):.2e}"))
    out.append(Check("square density variance is kappa n_c0^2", abs(var / (KAPPA * nc**2) - 1.0) < tol,
                     f"rel err {abs(var / (KAPPA * nc**2) - 1):.2e}"))
    g = integrate.quad(GAUSSIAN.pdf, -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0]
    out.append(Check("gaussian integrates to 1", abs(g - 1.0) < tol, f"|I - 1| = {abs(g - 1):.2e}"))
    for z in (1.2, 1.5, 1.9):
        lj = LevyJumps(z, 1.0)
        v = integrate.quad(lj.jump_density, 1.0, np.inf, epsabs=0, epsrel=1e-12)[0]
        out.append(Check(f"levy jump density z={z} integrates to 1", abs(v - 1.0) < tol,
                         f"|I - 1| = {abs(v - 1):.2e}"))
    for s in (0.05, 0.14, 0.29):
        v = integrate.quad(pseudo_gaussian_velocity_density, 0.0, 1.0, args=(s,), epsabs=0, epsrel=1e-12)[0]
        out.append(Check(f"velocity density sigma={s} integrates to 1", abs(v - 1.0) < tol,
                         f"|I - 1| = {abs(v - 1):.2e}"))
    return out


def random_start(cfg: BilliardConfig, rng: np.random.Generator) -> ParticleState:
    while True:
        x, y = rng.random(2) * cfg.L
        if cfg.is_accessible(x, y):
            return ParticleState.at(x, y, rng.uniform(0, 2 * math.pi), cfg.L)


def compare_with_direct(state: ParticleState, cfg: BilliardConfig, t_end: float):
    """Largest time and position mismatch between the two integrators, or None if the logs differ in kind."""
    rec = simulate_until(state, cfg, t_end)
    ref = simulate_sinai(state.local[0], state.local[1], state.direction[0], state.direction[1], cfg, t_end)
    if len(rec.events) != len(ref) or any(a.kind != b.kind for a, b in zip(rec.events, ref)):
        return None
    if not ref:
        return 0.0, 0.0
    dt = max(abs(a.time - b.time) for a, b in zip(rec.events, ref))
    dp = max(math.hypot(a.folded_point[0] - b.folded_point[0], a.folded_point[1] - b.folded_point[1])
             for a, b in zip(rec.events, ref))
    return dt, dp


def check_folding_equivalence(n: int = 100, seed: int = 12345, tol: float = 1e-9,
                              span: float = 10.0) -> Check:
    """Unfolded lattice runs against the folded table, ``span`` mean free times each."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    mismatched = []
    for i in range(n):
        R = float(rng.uniform(0.0, 0.68))
        cfg = BilliardConfig(1.0, R)
        st = random_start(cfg, rng)
        res = compare_with_direct(st, cfg, span * cfg.tau_total)
        if res is None:
            mismatched.append(i)
            continue
        worst = max(worst, res[0])
    ok = not mismatched and worst < tol
    return Check("unfolded vs folded engine, event for event", ok,
                 f"{n} trajectories, kind mismatches {mismatched[:5]}, max |dt| = {worst:.2e}")


def check_determinism(n_particles: int = 2048, chunk_size: int = 256, worker_counts=(1, 4, 8),
                      R: float = 0.3, seed: int = 99) -> Check:
    spec = EnsembleSpec(BilliardConfig(1.0, R), n_particles, t_obs=60.0,
                        probes=[10.0, 30.0, 50.0, 60.0], master_seed=seed)
    blobs = []
    for w in worker_counts:
        res = run_ensemble(spec, workers=w, chunk_size=chunk_size)
        s = res.samples
        blob = b"".join(np.ascontiguousarray(a).tobytes() for a in (s.n_wall, s.n_disk, s.dx, s.dy))
        blob += repr((res.moments.counts, res.moments.power_sums)).encode()
        blob += res.moments.disp_sums.tobytes()
        blobs.append(blob)
    same = all(b == blobs[0] for b in blobs[1:])
    return Check("ensemble byte-identical across worker counts", same,
                 f"workers {list(worker_counts)}, N={n_particles}, chunk {chunk_size}")


def run_all(quick: bool = False) -> list[Check]:
    checks = check_oracle_normalization()
    checks.append(check_folding_equivalence(n=20 if quick else 100))
    checks.append(check_determinism(n_particles=512 if quick else 2048,
                                    chunk_size=128 if quick else 256))
    return checks
