import math

import numpy as np
import pytest
from scipy import stats as sps
from scipy.integrate import solve_ivp

from epicrit import diffusion as df
from epicrit.sampling import derive_stream

from helpers import ks_critical_01


def ks(a, b):
    return sps.ks_2samp(a, b).statistic


def test_zero_start_is_absorbed(rng):
    for fn in (df.feller_path, df.sis_limit_path):
        p = fn(0.0, 0.5, horizon=1, rng=rng)
        assert p.absorbed_at == 0 and not p.values.any()
    p = df.sir_limit_path(0.0, 0.0, horizon=1, rng=rng)
    assert not p.values.any()


def test_coarse_step_rejected(rng):
    for dt in (0.1, 0.5, 0.0, -1e-3):
        with pytest.raises(ValueError):
            df.feller_path(1.0, 0.0, dt=dt, horizon=1, rng=rng)


def test_paths_nonnegative_and_absorbing():
    for seed in range(200):
        rng = derive_stream(seed, 0)
        for fn in (df.feller_path, df.sis_limit_path, df.sir_limit_path):
            p = fn(0.3, 0.2, horizon=3, rng=rng)
            v = p.values if p.values.ndim == 1 else p.values[:, 0]
            assert (v >= 0).all()
            if p.absorbed_at is not None:
                assert not v[p.absorbed_at:].any()
                assert v[: p.absorbed_at].all()


def test_sir_recovered_nondecreasing(rng):
    for _ in range(50):
        p = df.sir_limit_path(1.0, 0.5, horizon=4, rng=rng)
        assert (np.diff(p.values[:, 1]) >= 0).all()


@pytest.fixture(scope="module")
def feller_batch():
    return df.batch_paths("feller", 1.0, 0.0, 100_000, base_seed=17, times=[0.5, 1.0, 2.0], horizon=2)


def test_feller_martingale(feller_batch):
    v = feller_batch.values
    for j, t in enumerate(feller_batch.times):
        # Var Y_t = b t
        assert abs(v[:, j].mean() - 1.0) < 4 * math.sqrt(t / v.shape[0])


def test_feller_variance(feller_batch):
    v = feller_batch.values
    for j, t in enumerate(feller_batch.times[:2]):
        assert v[:, j].var() == pytest.approx(t, rel=0.05)


def test_feller_extinction_probability(feller_batch):
    v = feller_batch.values
    for j, t in enumerate(feller_batch.times):
        assert abs((v[:, j] == 0).mean() - math.exp(-2 / t)) < 0.01


def test_sis_skeleton_logistic_fixed_point():
    p = df.sis_limit_path(2.0, 1.0, horizon=20, noise=False)
    assert p.values[-1] == pytest.approx(1.0, abs=1e-6)


def test_sis_mean_below_feller_mean():
    n = 100_000
    times = [0.5, 1.0]
    sis = df.batch_paths("sis", 1.0, 0.0, n, base_seed=5, times=times, horizon=1)
    fel = df.batch_paths("feller", 1.0, 0.0, n, base_seed=5, times=times, horizon=1)
    for j in range(2):
        d = fel.values[:, j] - sis.values[:, j]
        assert d.mean() > 3 * 2 * 1.96 * d.std() / math.sqrt(n)


def test_sir_skeleton_matches_fine_ode():
    p = df.sir_limit_path(1.0, 0.0, dt=1e-4, horizon=10, noise=False)
    ode = solve_ivp(lambda t, y: [-y[0] * y[1], y[0]], (0, 10), [1.0, 0.0], rtol=1e-12, atol=1e-14)
    assert p.values[-1, 1] == pytest.approx(ode.y[1, -1], abs=1e-3)
    assert p.values[-1, 0] == pytest.approx(ode.y[0, -1], abs=1e-3)


def test_path_integral_examples():
    assert df.path_integral(df.SdePath(1e-3, np.zeros(100))) == 0.0
    assert df.path_integral(df.SdePath(1e-3, np.ones(2001))) == pytest.approx(2.0)
    pair = np.column_stack([np.ones(11), np.linspace(0, 1, 11)])
    assert df.path_integral(df.SdePath(0.1, pair)) == pytest.approx(1.0)


def test_feller_integral_stable_under_refinement():
    # in the clock int Y dt the critical Feller process is a driftless Brownian
    # motion, so the integral to extinction is the Levy law of the hitting time
    # of 0 from b = 1: finite almost surely, with infinite mean; medians are compared
    n = 10_000
    coarse = df.batch_paths("feller", 1.0, 0.0, n, base_seed=3, dt=2.5e-4, horizon=50)
    fine = df.batch_paths("feller", 1.0, 0.0, n, base_seed=3, dt=1e-4, horizon=50)
    assert np.isfinite(coarse.integral).all()
    levy_median = 1 / sps.norm.ppf(0.75) ** 2
    assert np.median(fine.integral) == pytest.approx(np.median(coarse.integral), rel=0.02)
    assert np.median(fine.integral) == pytest.approx(levy_median, rel=0.02)


# passage times


def test_parabolic_zero_level(rng):
    s = df.parabolic_passage_time(0.0, 0.3, rng=rng)
    assert s.time == 0 and not s.censored


def test_parabolic_monotone_in_level():
    n = 100_000
    t05, _ = df.batch_passage_times("parabolic", 0.5, 0.0, n, base_seed=1)
    t10, _ = df.batch_passage_times("parabolic", 1.0, 0.0, n, base_seed=1)
    # shared streams: pathwise ordering
    assert (t05 <= t10).all()
    grid = np.linspace(0, 5, 200)
    assert (np.searchsorted(np.sort(t05), grid, "right") >= np.searchsorted(np.sort(t10), grid, "right")).all()


def test_parabolic_median_refinement():
    n = 20_000
    a, _ = df.batch_passage_times("parabolic", 1.0, 0.0, n, base_seed=2, dt=1e-3)
    b, _ = df.batch_passage_times("parabolic", 1.0, 0.0, n, base_seed=2, dt=1e-4)
    assert np.median(b) == pytest.approx(np.median(a), rel=0.02)


def test_ou_zero_start(rng):
    assert df.ou_passage_time(0.0, 0.0, rng=rng).time == 0
    with pytest.raises(ValueError):
        df.ou_passage_time(-1.0, 0.0, rng=rng)


def test_ou_monotone_in_start():
    t05, _ = df.batch_passage_times("ou", 0.5, 0.0, 20_000, base_seed=4)
    t10, _ = df.batch_passage_times("ou", 1.0, 0.0, 20_000, base_seed=4)
    assert (t05 <= t10).all()


def test_censoring_reported(rng):
    s = df.ou_passage_time(3.0, 0.0, horizon=0.01, rng=rng)
    assert s.censored and s.time == pytest.approx(0.01)


def test_ou_time_change_of_sis_limit():
    # integral of the SIS limit to extinction equals the OU passage tau(b - a; -a) in law
    n = 10_000
    dt = 1e-4  # the two discretisations carry opposite O(sqrt(dt)) grid biases
    for a in (0.0, -0.5):
        sis = df.batch_paths("sis", 1.0, a, n, base_seed=31, dt=dt, horizon=20)
        ou, cens = df.batch_passage_times("ou", 1.0, a, n, base_seed=32, dt=dt, horizon=20)
        assert not sis.censored.any() and not cens.any()
        assert ks(sis.integral, ou) < ks_critical_01(n, n)


def test_parabolic_time_change_of_sir_limit():
    # for the SIR limit with drift a the clock R turns J into b + a s - s^2/2 + W_s
    n = 10_000
    for a in (0.0, 0.7):
        sir = df.batch_paths("sir", 1.0, a, n, base_seed=41, horizon=30)
        par, cens = df.batch_passage_times("parabolic", 1.0, -a, n, base_seed=42, horizon=30)
        assert not sir.censored.any() and not cens.any()
        assert ks(sir.integral, par) < ks_critical_01(n, n)


def test_ou_reversion_parameter():
    # stronger reversion brings the process back to the barrier sooner
    slow, _ = df.batch_passage_times("ou", 1.0, 0.0, 5000, base_seed=7, reversion=1.0)
    fast, _ = df.batch_passage_times("ou", 1.0, 0.0, 5000, base_seed=7, reversion=1.5)
    assert np.median(fast) < np.median(slow)
