import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerislock.errors import ArgumentError
from aerislock.noise import (
    OUParams,
    derive_sigma,
    derive_tau_c,
    fid_envelope,
    ou_step,
    ou_trajectory,
)

WORKING = OUParams.from_hz(10.0, 4.6e-3)


def stationary_ensemble(params, n_traj, n_steps, dt, seed):
    """(n_steps + 1, n_traj) OU samples, advanced with vectorized exact steps."""
    rng = np.random.default_rng(seed)
    x = params.sigma * rng.standard_normal(n_traj)
    out = [x]
    for _ in range(n_steps):
        x = ou_step(x, params, dt, rng.standard_normal(n_traj))
        out.append(x)
    return np.array(out)


def test_noiseless_step_is_deterministic_decay():
    p = OUParams(0.0, 2e-3)
    assert ou_step(3.0, p, 1e-3, 0.7) == pytest.approx(3.0 * np.exp(-0.5), rel=1e-15)


def test_long_step_forgets_initial_value():
    p = OUParams(5.0, 1e-3)
    draws = np.random.default_rng(0).standard_normal(20000)
    out = ou_step(100.0, p, 1.0, draws)
    assert abs(out.mean()) < 4 * 5.0 / np.sqrt(draws.size)
    assert out.std() == pytest.approx(5.0, rel=0.03)


def test_autocorrelation_at_correlation_time():
    dt = WORKING.tau_c / 10
    x = stationary_ensemble(WORKING, 10_000, 10, dt, seed=11)
    prod = x[0] * x[10] / WORKING.sigma**2
    se = prod.std(ddof=1) / np.sqrt(prod.size)
    assert abs(prod.mean() - np.exp(-1)) <= 3 * se


def test_trajectory_is_reproducible_for_a_seed():
    a = ou_trajectory(WORKING, 0.05, 1e-4, seed=42)
    b = ou_trajectory(WORKING, 0.05, 1e-4, seed=42)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = ou_trajectory(WORKING, 0.05, 1e-4, seed=43)
    assert not np.array_equal(a.samples, c.samples)


def test_trajectory_length():
    tr = ou_trajectory(WORKING, 0.05, 1e-4, seed=0)
    assert tr.samples.size == 501
    assert tr.dt == 1e-4


def test_noiseless_trajectory_is_zero():
    tr = ou_trajectory(OUParams(0.0, 1e-3), 0.01, 1e-4, seed=5)
    assert np.all(tr.samples == 0.0)


def test_ensemble_mean_vanishes():
    x = stationary_ensemble(WORKING, 10_000, 50, WORKING.tau_c / 5, seed=3)
    assert np.all(np.abs(x.mean(axis=1)) <= 3 * WORKING.sigma / np.sqrt(10_000) * 1.5)
    # at a single instant the plain 3-sigma bound holds
    assert abs(x[-1].mean()) <= 3 * WORKING.sigma / 100


def test_variance_is_stationary():
    n = 10_000
    x = stationary_ensemble(WORKING, n, 40, WORKING.tau_c / 4, seed=4)
    var = x.var(axis=1, ddof=1)
    # standard error of a Gaussian sample variance
    se = WORKING.sigma**2 * np.sqrt(2 / (n - 1))
    assert np.all(np.abs(var - WORKING.sigma**2) <= 4 * se)


def test_half_steps_match_full_step_distribution():
    n = 40_000
    rng = np.random.default_rng(8)
    x0 = np.full(n, 30.0)
    dt = 3e-3
    one = ou_step(x0, WORKING, dt, rng.standard_normal(n))
    two = ou_step(ou_step(x0, WORKING, dt / 2, rng.standard_normal(n)), WORKING, dt / 2,
                  rng.standard_normal(n))
    assert one.mean() == pytest.approx(two.mean(), abs=4 * one.std() / np.sqrt(n) * np.sqrt(2))
    assert one.var() == pytest.approx(two.var(), rel=0.04)
    expected_mean = 30.0 * np.exp(-dt / WORKING.tau_c)
    assert one.mean() == pytest.approx(expected_mean, abs=4 * one.std() / np.sqrt(n))


def test_diffusion_limited_correlation_time():
    assert derive_tau_c(3e-6, 1.3e-9) == pytest.approx(4.615e-3, rel=1e-3)
    assert derive_tau_c(3e-6, 2.3e-9) == pytest.approx(2.609e-3, rel=1e-3)
    assert derive_tau_c(6e-6, 1.3e-9) == pytest.approx(4 * derive_tau_c(3e-6, 1.3e-9))


def test_noise_strength_from_dephasing_time():
    s = derive_sigma(0.06, 4.6e-3)
    assert s == pytest.approx(60.2, abs=0.05)
    assert s / (2 * np.pi) == pytest.approx(9.58, abs=0.01)
    assert derive_sigma(6e-3, 4.6e-3) / (2 * np.pi) == pytest.approx(30.3, abs=0.05)
    assert derive_sigma(0.24, 4.6e-3) == pytest.approx(s / 2)


def test_t2_star_property():
    assert WORKING.t2_star == pytest.approx(0.0551, abs=1e-4)
    assert OUParams(0.0, 1e-3).t2_star == np.inf


def test_fid_envelope_values():
    p = OUParams(60.2, 4.6e-3)
    assert fid_envelope(p, 0.0) == 1.0
    assert np.all(fid_envelope(OUParams(0.0, 1e-3), np.linspace(0, 1, 11)) == 1.0)
    # independent evaluation of the closed form
    s2, tc = 60.2**2, 4.6e-3
    for t in (0.01, 0.06, 0.15):
        ref = np.exp(-s2 * (tc * t - tc**2 * (1 - np.exp(-t / tc))))
        assert fid_envelope(p, t) == pytest.approx(ref, rel=1e-12)
    assert fid_envelope(p, 0.06) == pytest.approx(0.3971, abs=1e-4)


@given(sigma=st.floats(0.0, 500.0), tau_c=st.floats(1e-5, 1e-1))
@settings(max_examples=60, deadline=None)
def test_fid_envelope_is_non_increasing(sigma, tau_c):
    t = np.linspace(0, 1.0, 400)
    e = fid_envelope(OUParams(sigma, tau_c), t)
    assert np.all(np.diff(e) <= 1e-15)
    assert np.all((e > 0) | (e == 0)) and e[0] == 1.0


@given(sigma=st.floats(1.0, 300.0), tau_c=st.floats(1e-4, 1e-2))
@settings(max_examples=40, deadline=None)
def test_fid_envelope_log_slope_tends_to_inverse_t2_star(sigma, tau_c):
    p = OUParams(sigma, tau_c)
    t = np.array([20 * tau_c, 30 * tau_c])
    slope = np.diff(np.log(fid_envelope(p, t)))[0] / (t[1] - t[0])
    assert slope == pytest.approx(-1 / p.t2_star, rel=1e-6)


def test_invalid_parameters():
    with pytest.raises(ArgumentError):
        OUParams(-1.0, 1e-3)
    with pytest.raises(ArgumentError):
        OUParams(1.0, 0.0)
    with pytest.raises(ArgumentError):
        ou_step(0.0, WORKING, 0.0, 0.0)
    with pytest.raises(ArgumentError):
        derive_tau_c(0.0, 1e-9)
    with pytest.raises(ArgumentError):
        fid_envelope(WORKING, -1.0)
