import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_gas.direct import simulate_sinai
from lorentz_gas.engine import (
    SX_MINUS,
    SX_PLUS,
    SY_MINUS,
    SY_PLUS,
    EventBudgetExceeded,
    EventKind,
    ParticleState,
    fold_to_cell,
    next_event,
    simulate_until,
)
from lorentz_gas.geometry import BilliardConfig
from lorentz_gas.validation import check_folding_equivalence, compare_with_direct, random_start

Q = BilliardConfig(1.0, 0.25)


def test_head_on_hit_reverses():
    kind, dt, new = next_event(ParticleState([0.5, 0.0], [0.0, 1.0]), Q)
    assert kind is EventKind.DISK_REFLECTION
    assert dt == pytest.approx(0.25, abs=1e-14)
    np.testing.assert_allclose(new.local, [0.5, 0.25], atol=1e-14)
    np.testing.assert_allclose(new.direction, [0.0, -1.0], atol=1e-14)
    assert new.disk_count == 1


def test_hit_leftmost_point():
    kind, dt, new = next_event(ParticleState([0.2, 0.5], [1.0, 0.0]), Q)
    assert kind is EventKind.DISK_REFLECTION
    assert dt == pytest.approx(0.05, abs=1e-14)
    np.testing.assert_allclose(new.local, [0.25, 0.5], atol=1e-14)


def test_miss_crosses_wall():
    kind, dt, new = next_event(ParticleState([0.1, 0.1], [1.0, 0.0]), Q)
    assert kind is EventKind.WALL_CROSSING
    assert dt == pytest.approx(0.9, abs=1e-14)
    assert new.cell.tolist() == [1, 0]
    assert new.step_counts.tolist() == [1, 0, 0, 0]
    np.testing.assert_allclose(new.direction, [1.0, 0.0])


def test_grazing_ray_is_not_a_hit():
    # passes the disk at exactly distance R
    kind, _, _ = next_event(ParticleState([0.1, 0.25], [1.0, 0.0]), Q)
    assert kind is EventKind.WALL_CROSSING


def test_overlapping_disk_hit_after_wall_crossing():
    cfg = BilliardConfig(1.0, 0.6)
    kind, dt, st_ = next_event(ParticleState([0.05, 0.1], [-1.0, 0.0]), cfg)
    assert kind is EventKind.WALL_CROSSING
    assert dt == pytest.approx(0.05, abs=1e-14)
    assert st_.cell.tolist() == [-1, 0]
    # the neighbour's disk is centred at x = -0.5; it is reached at x = -0.5 + sqrt(0.6^2 - 0.4^2)
    kind, dt, st_ = next_event(st_, cfg)
    assert kind is EventKind.DISK_REFLECTION
    assert st_.position(1.0)[0] == pytest.approx(-0.5 + math.sqrt(0.2), abs=1e-12)


def test_square_axis_orbit():
    cfg = BilliardConfig(1.0, 0.0)
    rec = simulate_until(ParticleState([0.5, 0.5], [1.0, 0.0]), cfg, 10.0, probes=[10.0])
    assert rec.wall_counts[0] == 10
    assert rec.disk_counts[0] == 0
    assert np.hypot(*rec.displacements[0]) == pytest.approx(10.0, abs=1e-12)


@pytest.mark.parametrize("x,y", [(0.3, 0.1), (0.5, 0.5)])
def test_square_diagonal_orbit(x, y):
    cfg = BilliardConfig(1.0, 0.0)
    rec = simulate_until(ParticleState.at(x, y, math.pi / 4), cfg, 10.0, probes=[10.0])
    s = rec.final_state.step_counts
    assert rec.wall_counts[0] == 14 == math.floor(10 * math.sqrt(2))
    assert s[SX_PLUS] == 7 and s[SY_PLUS] == 7
    assert s[SX_MINUS] == 0 and s[SY_MINUS] == 0


def test_fold_examples():
    cfg = BilliardConfig(1.0, 0.1)
    st_ = ParticleState.at(1.3, 0.4, 0.3)
    pos, vel = fold_to_cell(st_, cfg)
    np.testing.assert_allclose(pos, [0.7, 0.4], atol=1e-14)
    np.testing.assert_allclose(vel, [-math.cos(0.3), math.sin(0.3)])
    pos, vel = fold_to_cell(ParticleState.at(2.2, 0.4, 0.3), cfg)
    np.testing.assert_allclose(pos, [0.2, 0.4], atol=1e-14)
    np.testing.assert_allclose(vel, [math.cos(0.3), math.sin(0.3)])
    s0 = ParticleState([0.2, 0.7], [0.6, 0.8])
    pos, vel = fold_to_cell(s0, cfg)
    assert pos.tolist() == s0.local.tolist() and vel.tolist() == s0.direction.tolist()


starts = st.tuples(st.floats(0.0, 0.68), st.integers(0, 2**32 - 1))


@settings(max_examples=40)
@given(starts)
def test_trajectory_invariants(arg):
    R, seed = arg
    cfg = BilliardConfig(1.0, R)
    rng = np.random.default_rng(seed)
    state = random_start(cfg, rng)
    x0 = state.position(cfg.L)
    flights = []
    for _ in range(200):
        kind, dt, state = next_event(state, cfg)
        flights.append(dt)
        # unit speed
        assert abs(np.hypot(*state.direction) - 1.0) < 1e-12
        # outside every disk of the lattice
        centres = (state.cell[:, None] + np.array([[0, 1, -1, 0, 0], [0, 0, 0, 1, -1]])) * cfg.L + 0.5 * cfg.L
        d = np.hypot(*(state.position(cfg.L)[:, None] - centres))
        assert np.all(d >= R - 1e-9)
        assert state.wall_count == state.step_counts.sum()
        assert np.hypot(*(state.position(cfg.L) - x0)) <= state.time + 1e-9
    assert abs(state.time - math.fsum(flights)) < 1e-9 * state.time


@settings(max_examples=25)
@given(starts)
def test_probe_counts_and_displacement(arg):
    R, seed = arg
    cfg = BilliardConfig(1.0, R)
    state = random_start(cfg, np.random.default_rng(seed))
    probes = np.linspace(1.0, 30.0, 7)
    rec = simulate_until(state, cfg, 30.0, probes)
    times = rec.times()
    assert np.all(np.diff(times) > 0)
    kinds = np.array(rec.kinds())
    for k, t in enumerate(probes):
        before = times < t
        assert rec.wall_counts[k] == int(np.sum(kinds[before] == EventKind.WALL_CROSSING))
        assert rec.disk_counts[k] == int(np.sum(kinds[before] == EventKind.DISK_REFLECTION))
        assert np.hypot(*rec.displacements[k]) <= t + 1e-9
    steps = rec.final_state.step_counts
    assert rec.final_state.cell.tolist() == [steps[SX_PLUS] - steps[SX_MINUS], steps[SY_PLUS] - steps[SY_MINUS]]


def test_unfolded_matches_direct_billiard():
    check = check_folding_equivalence(n=100)
    assert check.passed, check.detail


@pytest.mark.parametrize("R", [0.0, 0.2, 0.4, 0.55, 0.65])
def test_direct_comparison_long(R):
    cfg = BilliardConfig(1.0, R)
    state = random_start(cfg, np.random.default_rng(int(R * 100)))
    res = compare_with_direct(state, cfg, min(20 * cfg.tau_total, 100.0))
    assert res is not None
    assert res[0] < 1e-9 and res[1] < 1e-9


@pytest.mark.parametrize("R", [0.1, 0.3, 0.45, 0.6])
def test_reversibility(R):
    cfg = BilliardConfig(1.0, R)
    rng = np.random.default_rng(7)
    for _ in range(5):
        start = random_start(cfg, rng)
        t = 10 * cfg.tau_total
        rec = simulate_until(start, cfg, t, probes=[t])
        # put the particle at its probe position, reversed
        fwd = rec.displacements[0] + start.position(cfg.L)
        back = simulate_until(_reverse_at(rec, fwd, cfg), cfg, t, probes=[t])
        np.testing.assert_allclose(back.displacements[0] + fwd, start.position(cfg.L), atol=1e-6)


def _reverse_at(rec, pos, cfg):
    last = rec.final_state
    d = -last.direction
    return ParticleState.at(pos[0], pos[1], math.atan2(d[1], d[0]), cfg.L)


def test_event_budget():
    cfg = BilliardConfig(1.0, 0.3)
    with pytest.raises(EventBudgetExceeded):
        simulate_until(ParticleState([0.1, 0.2], [0.6, 0.8]), cfg, 100.0, event_budget=10)


def test_event_log_csv(tmp_path):
    cfg = BilliardConfig(1.0, 0.3)
    rec = simulate_until(ParticleState([0.1, 0.2], [0.6, 0.8]), cfg, 5.0)
    path = tmp_path / "events.csv"
    rec.write_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["event_index", "kind", "t", "x_folded", "y_folded"]
    assert len(rows) == len(rec.events)
    for r, e in zip(rows, rec.events):
        assert float(r["t"]) == e.time
        assert r["kind"] in ("wall_crossing", "disk_reflection")
        assert 0.0 <= float(r["x_folded"]) <= 1.0


def test_direct_integrator_square():
    events = simulate_sinai(0.5, 0.5, 1.0, 0.0, BilliardConfig(1.0, 0.0), 10.0)
    assert len(events) == 10
    assert all(e.kind is EventKind.WALL_CROSSING for e in events)
