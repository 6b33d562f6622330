import math
import warnings

import numpy as np
import pytest
from scipy import stats as sps
from scipy.stats import qmc

from lorentz_gas.engine import EventBudgetExceeded, ParticleState, simulate_until
from lorentz_gas.ensemble import (
    EnsembleSpec,
    Normalization,
    default_probes,
    particle_rng,
    run_ensemble,
    sample_initial_state,
    sample_swarm,
)
from lorentz_gas.geometry import BilliardConfig
from lorentz_gas.validation import check_determinism


def test_default_probes():
    p = default_probes()
    assert len(p) == 16
    assert p[0] == pytest.approx(10.0) and p[-1] == pytest.approx(200.0)
    assert np.allclose(np.diff(np.log(p)), np.log(20) / 15)


@pytest.mark.parametrize("kwargs", [
    dict(n_particles=0),
    dict(probes=[10.0, 300.0]),
    dict(probes=[0.0, 100.0]),
    dict(probes=[10.0, 20.0]),
    dict(master_seed=-1),
])
def test_spec_validation(kwargs):
    base = dict(config=BilliardConfig(1.0, 0.2), n_particles=10)
    base.update(kwargs)
    with pytest.raises(ValueError):
        EnsembleSpec(**base)


def test_disk_normalization_needs_a_disk():
    with pytest.raises(ValueError):
        EnsembleSpec(BilliardConfig(1.0, 0.0), 10, normalization=Normalization.DISK)


def test_particle_streams_are_pure():
    a = particle_rng(5, 17).random(4)
    b = particle_rng(5, 17).random(4)
    c = particle_rng(5, 18).random(4)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()


def test_square_positions_uniform():
    sw, tried = sample_swarm(BilliardConfig(1.0, 0.0), 11, 0, 100_000)
    assert tried == 100_000
    obs = np.histogram2d(sw.lx, sw.ly, bins=10, range=[[0, 1], [0, 1]])[0].ravel()
    assert sps.chisquare(obs).pvalue > 0.01


@pytest.mark.slow
def test_acceptance_rate_matches_area():
    cfg = BilliardConfig(1.0, 0.25)
    n = 10**6
    _, tried = sample_swarm(cfg, 2024, 0, n)
    p = cfg.area
    rate = n / tried
    # tries per particle are geometric; delta method for n / tried
    sigma = p * math.sqrt((1 - p) / n)
    assert abs(rate - p) < 3 * sigma
    assert rate == pytest.approx(0.8036, abs=5e-3)


@pytest.mark.parametrize("R", [0.0, 0.3, 0.6])
def test_directions_isotropic(R):
    sw, _ = sample_swarm(BilliardConfig(1.0, R), 3, 0, 20000)
    for v in (sw.vx, sw.vy):
        assert abs(v.mean()) < 3 * math.sqrt(0.5 / v.size)
    assert np.allclose(np.hypot(sw.vx, sw.vy), 1.0)


def test_initial_states_accessible():
    cfg = BilliardConfig(1.0, 0.62)
    rng = particle_rng(1, 0)
    for _ in range(200):
        s = sample_initial_state(cfg, rng)
        assert cfg.is_accessible(*s.local)


def test_square_mean_count():
    cfg = BilliardConfig(1.0, 0.0)
    res = run_ensemble(EnsembleSpec(cfg, 10_000, t_obs=100.0, probes=[50.0, 100.0], master_seed=1))
    assert res.moments.mean("wall", 1) == pytest.approx(100.0, abs=1.0)
    se = math.sqrt(res.moments.variance("wall", 1) / 10_000)
    assert se == pytest.approx(9.77 / 100, rel=0.1)
    assert res.acceptance_rate == 1.0


def test_wall_disk_ratio():
    cfg = BilliardConfig(1.0, 0.25)
    res = run_ensemble(EnsembleSpec(cfg, 5000, t_obs=100.0, probes=[50.0, 100.0], master_seed=2))
    nw = res.counts("wall")[:, 1].astype(float)
    nd = res.counts("disk")[:, 1].astype(float)
    ratio = nw.sum() / nd.sum()
    # delta-method error of a ratio of means
    mw, md = nw.mean(), nd.mean()
    cov = np.cov(nw, nd)
    var = (cov[0, 0] / md**2 - 2 * mw * cov[0, 1] / md**3 + mw**2 * cov[1, 1] / md**4) / nw.size
    assert abs(ratio - 8 / math.pi) < 3 * math.sqrt(var)


def test_single_particle_ensemble_is_the_trajectory():
    cfg = BilliardConfig(1.0, 0.3)
    spec = EnsembleSpec(cfg, 1, t_obs=60.0, probes=[10.0, 50.0, 60.0], master_seed=4)
    res = run_ensemble(spec)
    init = sample_initial_state(cfg, particle_rng(4, 0))
    rec = simulate_until(init, cfg, spec.probe_times[-1], spec.probe_times)
    assert res.samples.n_wall[0].tolist() == rec.wall_counts.tolist()
    assert res.samples.n_disk[0].tolist() == rec.disk_counts.tolist()
    np.testing.assert_allclose(res.samples.dx[0], rec.displacements[:, 0], atol=1e-12)
    for p in range(3):
        assert res.moments.mean("wall", p) == rec.wall_counts[p]
        assert res.moments.variance("wall", p) == 0.0


def test_deterministic_across_workers():
    check = check_determinism()
    assert check.passed, check.detail


def test_chunking_does_not_change_results():
    spec = EnsembleSpec(BilliardConfig(1.0, 0.2), 700, t_obs=60.0, probes=[30.0, 60.0], master_seed=8)
    a = run_ensemble(spec, chunk_size=64)
    b = run_ensemble(spec, chunk_size=1000)
    assert a.samples.n_wall.tobytes() == b.samples.n_wall.tobytes()
    assert a.samples.dx.tobytes() == b.samples.dx.tobytes()
    assert a.moments.power_sums == b.moments.power_sums


def test_block_moments_merge_to_total():
    spec = EnsembleSpec(BilliardConfig(1.0, 0.2), 500, t_obs=60.0, probes=[30.0, 60.0], master_seed=8)
    res = run_ensemble(spec)
    blocks = res.block_moments(7)
    acc = blocks[0]
    for b in blocks[1:]:
        acc = acc + b
    assert acc.power_sums == res.moments.power_sums


def _cell_areas(cfg, bins):
    pts = qmc.Sobol(2, scramble=True, seed=1).random_base2(20)
    ok = cfg.is_accessible(pts[:, 0], pts[:, 1])
    return np.histogram2d(pts[ok, 0], pts[ok, 1], bins=bins, range=[[0, 1], [0, 1]])[0].ravel()


@pytest.mark.parametrize("R", [0.25, 0.6])
def test_liouville_stationarity(R):
    cfg = BilliardConfig(1.0, R)
    spec = EnsembleSpec(cfg, 20_000, t_obs=100.0, probes=[50.0, 100.0], master_seed=21)
    res = run_ensemble(spec, workers=4)
    s = res.samples
    bins = 8
    w = _cell_areas(cfg, bins)
    keep = w > 0
    exp = w[keep] / w.sum() * s.fold_x.shape[0]
    for p in range(2):
        assert np.all(cfg.is_accessible(s.fold_x[:, p], s.fold_y[:, p]) | (
            np.abs(np.hypot(s.fold_x[:, p] - 0.5, s.fold_y[:, p] - 0.5) - R) < 1e-9))
        obs = np.histogram2d(s.fold_x[:, p], s.fold_y[:, p], bins=bins, range=[[0, 1], [0, 1]])[0].ravel()
        assert obs[~keep].sum() == 0
        stat = ((obs[keep] - exp) ** 2 / exp).sum()
        assert sps.chi2.sf(stat, keep.sum() - 1) > 1e-3


def test_event_budget_abort_and_partial():
    spec = EnsembleSpec(BilliardConfig(1.0, 0.3), 40, t_obs=60.0, probes=[30.0, 60.0],
                        master_seed=3, event_budget=60)
    with pytest.raises(EventBudgetExceeded) as err:
        run_ensemble(spec)
    assert err.value.seed == 3 and err.value.particles
    res = run_ensemble(spec, allow_partial=True)
    assert set(res.aborted) == set(err.value.particles)
    assert res.moments.counts[0] == 40 - len(res.aborted)


def test_no_rate_warning_on_healthy_run():
    spec = EnsembleSpec(BilliardConfig(1.0, 0.4), 3000, master_seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        run_ensemble(spec)
