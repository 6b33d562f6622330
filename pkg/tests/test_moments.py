import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentz_gas.moments import EnsembleMoments

TIMES = np.array([1.0, 2.0, 3.0])


@st.composite
def sample_sets(draw):
    n = draw(st.integers(1, 60))
    ints = st.integers(0, 10**6)
    nw = np.array(draw(st.lists(ints, min_size=3 * n, max_size=3 * n))).reshape(n, 3)
    nd = np.array(draw(st.lists(ints, min_size=3 * n, max_size=3 * n))).reshape(n, 3)
    fl = st.floats(-1e3, 1e3, allow_nan=False)
    dx = np.array(draw(st.lists(fl, min_size=3 * n, max_size=3 * n))).reshape(n, 3)
    dy = np.array(draw(st.lists(fl, min_size=3 * n, max_size=3 * n))).reshape(n, 3)
    cuts = sorted(draw(st.lists(st.integers(0, n), max_size=5)))
    return nw, nd, dx, dy, cuts


def _parts(data):
    nw, nd, dx, dy, cuts = data
    bounds = [0, *cuts, len(nw)]
    return [EnsembleMoments.from_samples(TIMES, nw[a:b], nd[a:b], dx[a:b], dy[a:b])
            for a, b in zip(bounds, bounds[1:])]


@given(sample_sets(), st.randoms())
def test_merge_any_partition_matches_single_pass(data, rnd):
    nw, nd, dx, dy, _ = data
    whole = EnsembleMoments.from_samples(TIMES, nw, nd, dx, dy)
    parts = _parts(data)
    rnd.shuffle(parts)
    acc = parts[0]
    for p in parts[1:]:
        acc = acc + p
    assert acc.counts == whole.counts
    assert acc.power_sums == whole.power_sums
    np.testing.assert_allclose(acc.disp_sums, whole.disp_sums, rtol=1e-12, atol=1e-9)


@given(sample_sets())
def test_merge_associative_and_commutative(data):
    parts = _parts(data)
    while len(parts) < 3:
        parts.append(EnsembleMoments.empty(TIMES))
    a, b, c = parts[0], parts[1], parts[2]
    left = (a + b) + c
    right = a + (b + c)
    assert left.power_sums == right.power_sums
    assert (a + b).power_sums == (b + a).power_sums
    assert (a + b).counts == (b + a).counts


@given(st.lists(st.integers(0, 10**9), min_size=2, max_size=200))
def test_central_moments_exact(xs):
    arr = np.array(xs).reshape(-1, 1)
    m = EnsembleMoments.from_samples([1.0], arr, arr)
    mu = Fraction(sum(xs), len(xs))
    for k in (2, 3, 4):
        exact = sum((Fraction(x) - mu) ** k for x in xs) / len(xs)
        assert m.central_moment("wall", k, 0) == pytest.approx(float(exact), rel=1e-12, abs=1e-12)


def test_constant_counts_have_zero_variance():
    arr = np.full((50, 1), 123456789)
    m = EnsembleMoments.from_samples([1.0], arr, arr)
    assert m.variance("wall", 0) == 0.0
    assert m.central_moment("wall", 4, 0) == 0.0


def test_displacement_statistics():
    rng = np.random.default_rng(0)
    dx = rng.normal(1.0, 2.0, (4000, 1))
    dy = rng.normal(-1.0, 1.0, (4000, 1))
    z = np.zeros((4000, 1), dtype=int)
    m = EnsembleMoments.from_samples([1.0], z, z, dx, dy)
    mx, my = m.displacement_mean(0)
    assert mx == pytest.approx(dx.mean()) and my == pytest.approx(dy.mean())
    assert m.displacement_variance(0) == pytest.approx(dx.var() + dy.var(), rel=1e-10)


def test_std_errors_scale_with_sqrt_n():
    rng = np.random.default_rng(3)
    x = rng.poisson(50, (80000, 1))
    half = EnsembleMoments.from_samples([1.0], x[:40000], x[:40000])
    full = EnsembleMoments.from_samples([1.0], x, x)
    for i in range(2):
        ratio = half.std_errors("wall", 0)[i] / full.std_errors("wall", 0)[i]
        assert ratio == pytest.approx(math.sqrt(2), rel=0.05)


def test_merge_rejects_mismatched_times():
    with pytest.raises(ValueError):
        EnsembleMoments.empty([1.0]).merge(EnsembleMoments.empty([2.0]))


def test_table_rows():
    x = np.arange(12).reshape(4, 3)
    rows = EnsembleMoments.from_samples(TIMES, x, x, x * 0.0, x * 0.0).table()
    assert [r["t"] for r in rows] == TIMES.tolist()
    assert rows[0]["mean_wall"] == pytest.approx(4.5)
    assert rows[0]["var_wall"] == pytest.approx(np.var(x[:, 0]))
