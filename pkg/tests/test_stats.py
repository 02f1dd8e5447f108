import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from epicrit.stats import (
    EmpiricalDistribution,
    compare,
    ks_c,
    ks_critical,
    ks_two_sample,
    mean_ci,
    quantiles,
    survival_fraction,
    two_proportion_z,
    wilson_interval,
)

E = EmpiricalDistribution.from_values


def test_ks_examples():
    x = np.arange(10.0)
    assert ks_two_sample(E(x), E(x)) == 0
    assert ks_two_sample(E([1, 2, 3]), E([10, 11])) == 1
    assert ks_two_sample(E([1, 2]), E([1.5])) == pytest.approx(0.5)


def test_ks_critical_values():
    assert ks_c(0.01) == pytest.approx(1.6276, abs=1e-4)
    assert ks_critical(5000, 5000) == pytest.approx(0.0326, abs=1e-4)
    assert ks_critical(100, 100) > ks_critical(1000, 1000)
    assert ks_critical(1000, 1000, 0.05) < ks_critical(1000, 1000, 0.01)
    with pytest.raises(ValueError):
        ks_critical(49, 1000)
    with pytest.raises(ValueError):
        ks_c(1.5)


def test_quantiles_type7():
    d = E(np.arange(1, 101))
    assert quantiles(d, 0.5)[0] == pytest.approx(50.5)
    assert quantiles(d, [0, 1]).tolist() == [1, 100]
    x = np.random.default_rng(1).normal(size=37)
    assert np.allclose(quantiles(E(x), [0.1, 0.33, 0.9]), np.quantile(x, [0.1, 0.33, 0.9]))


def test_quantiles_touching_censored_mass_are_infinite():
    d = E([1.0, 2.0, 3.0, 99.0], censored=[False, False, False, True], horizon=5.0)
    q = quantiles(d, [0.5, 1.0])
    assert q[0] == pytest.approx(2.5)
    assert math.isinf(q[1])


def test_mean_ci():
    m, h = mean_ci(np.full(20, 3.0))
    assert (m, h) == (3.0, 0.0)
    x = np.random.default_rng(2).normal(size=400)
    m, h = mean_ci(x, 0.95)
    assert h == pytest.approx(1.959964 * x.std(ddof=1) / 20)


def test_wilson_zero_exceedances():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    p = survival_fraction(E(np.linspace(0, 1, 100)), 2.0)
    assert p.estimate == 0 and p.lower == 0 and p.upper > 0
    lo, hi = wilson_interval(100, 100)
    assert hi == 1 and lo > 0.95


def test_survival_fraction_counts_censored_as_survivors():
    d = E([0.5, 1.5, 9.0, 9.0], censored=[False, False, True, True], horizon=3.0)
    assert survival_fraction(d, 1.0).estimate == 0.75


def test_two_proportion_z():
    assert two_proportion_z(0, 10, 0, 20) == 0
    assert two_proportion_z(5, 10, 5, 10) == 0
    assert two_proportion_z(90, 100, 10, 100) > 10


def test_censored_cdf_uses_full_denominator():
    d = E([1.0, 2.0, 5.0, 5.0], censored=[False, False, True, True], horizon=5.0)
    assert d.n == 4 and d.censored_fraction == 0.5
    assert d.cdf(10.0) == 0.5
    # the censored mass sits at the horizon, so samples above it are ignored
    other = E([1.0, 2.0, 7.0, 8.0])
    assert ks_two_sample(d, other) == 0


def test_validation():
    with pytest.raises(ValueError):
        E([1.0, math.nan])
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        ks_two_sample(E([]), E([1.0]))
    with pytest.raises(ValueError):
        E([1.0, 2.0], censored=[True])


floats = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60)
ints = st.lists(st.integers(-1000, 1000), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(floats, floats)
def test_ks_symmetric_and_matches_scipy(a, b):
    d = ks_two_sample(E(a), E(b))
    assert d == pytest.approx(ks_two_sample(E(b), E(a)))
    assert 0 <= d <= 1
    with np.errstate(divide="ignore"):
        ref = sps.ks_2samp(a, b, method="asymp").statistic
    assert d == pytest.approx(ref, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(ints, ints)
def test_ks_invariant_under_monotone_maps(a, b):
    d = ks_two_sample(E(a), E(b))
    # exact in floating point, so no ties are created
    f = lambda v: np.asarray(v, float) ** 3 - 5
    assert ks_two_sample(E(f(a)), E(f(b))) == pytest.approx(d)


def test_compare_self_test_false_rejection_rate():
    # 200 meta-trials of two same-law samples: rejections are rare at alpha = 0.01
    rng = np.random.default_rng(20240601)
    rejected = 0
    for _ in range(200):
        a, b = rng.exponential(size=500), rng.exponential(size=500)
        rejected += not compare(E(a), E(b), 0.01).passed
    assert rejected <= 8


def test_compare_detects_shift_and_censoring_mismatch():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=2000), rng.normal(0.3, 1, size=2000)
    assert not compare(E(a), E(b)).passed
    h = 1.0
    ca = E(np.minimum(a, h), a >= h, h)
    cb = E(np.minimum(a[::-1] + 0.0, h), np.zeros(a.size, bool) | (np.arange(a.size) < 1000), h)
    v = compare(ca, cb)
    assert abs(v.censor_z) > 3 and not v.passed


def test_compare_floor():
    rng = np.random.default_rng(4)
    a, b = rng.normal(size=1000), rng.normal(0.15, 1, size=1000)
    v = compare(E(a), E(b), floor=0.2)
    assert v.threshold == 0.2 and v.passed
    assert "PASS" in v.row()
