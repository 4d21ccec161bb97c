import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerislock import analysis as an
from aerislock.errors import ArgumentError, FitError
from aerislock.molecule import FieldConfig, generalized_rabi
from aerislock.noise import OUParams

FIELD = FieldConfig(2.0)
WORKING = OUParams.from_hz(10.0, 4.6e-3)


def lorentz_spectrum(center, fwhm, amp=1.0, base=0.0, df=0.05, span=60.0):
    f = np.arange(0, span, df)
    return an.Spectrum(f, an.lorentzian(f, amp, center, fwhm, base))


# ---------------------------------------------------------------------------
# spectra


def test_sine_peak_at_its_frequency():
    t = np.arange(1000) / 1000.0
    spec = an.fft_spectrum(times=t, values=np.sin(2 * np.pi * 50 * t))
    assert spec.freqs[np.argmax(spec.amplitudes)] == pytest.approx(50.0)
    assert spec.bin_width == pytest.approx(0.25)


def test_zero_series_gives_zero_spectrum():
    t = np.arange(64) * 1e-3
    for mode in ("modulus", "real", "power"):
        assert np.all(an.fft_spectrum(times=t, values=np.zeros(64), mode=mode).amplitudes == 0)


def test_non_uniform_grid_rejected():
    with pytest.raises(ArgumentError):
        an.fft_spectrum(times=np.array([0, 1, 3.0]), values=np.ones(3))
    with pytest.raises(ArgumentError):
        an.fft_spectrum(times=np.arange(4.0), values=np.ones(4), window="kaiser")


def test_decaying_cosine_matches_closed_lorentzian():
    gamma = WORKING.sigma**2 * WORKING.tau_c
    delta = 311.83
    dt = 1e-4
    t = np.arange(0, 1.5, dt)
    x = np.exp(-gamma * t) * np.cos(2 * np.pi * delta * t)
    spec = an.fft_spectrum(times=t, values=x, mode="real", phase=0.0)
    w = 2 * np.pi * spec.freqs
    d = 2 * np.pi * delta
    ref = 0.5 * (gamma / (gamma**2 + (w - d) ** 2) + gamma / (gamma**2 + (w + d) ** 2))
    near = np.abs(spec.freqs - delta) < 30
    peak = ref[near].max()
    assert np.max(np.abs(spec.amplitudes[near] - ref[near])) <= 0.05 * peak


def test_hann_window_reduces_leakage():
    t = np.arange(512) * 1e-3
    x = np.sin(2 * np.pi * 100.37 * t)
    plain = an.fft_spectrum(times=t, values=x)
    hann = an.fft_spectrum(times=t, values=x, window="hann")
    far = np.abs(plain.freqs - 100.37) > 40
    assert hann.amplitudes[far].max() < 0.1 * plain.amplitudes[far].max()


def test_dressed_axis_mapping_examples():
    spec = an.Spectrum(np.array([900.0, 1000.0, 1047.49, 1100.0]), np.array([1, 2, 3, 4.0]))
    same = an.map_dressed_axis(spec, 0.0)
    np.testing.assert_array_equal(same.freqs, spec.freqs)
    mapped = an.map_dressed_axis(spec, 1000.0, FIELD)
    assert mapped.freqs[0] == 0.0
    assert mapped.freqs[1] == pytest.approx(311.83, abs=0.01)
    assert mapped.ppm[1] == pytest.approx(3.662, abs=1e-3)
    np.testing.assert_array_equal(mapped.amplitudes, [2, 3, 4.0])


@given(delta=st.floats(0.0, 800.0), omega1=st.floats(100.0, 3000.0))
@settings(max_examples=60, deadline=None)
def test_mapping_inverts_dressed_frequency_within_a_bin(delta, omega1):
    df = 0.25
    f = np.arange(0, 5000, df)
    i = int(np.argmin(np.abs(f - generalized_rabi(delta, omega1))))
    spec = an.Spectrum(f, np.where(np.arange(f.size) == i, 1.0, 0.0))
    m = an.map_dressed_axis(spec, omega1)
    assert m.freqs[np.argmax(m.amplitudes)] == pytest.approx(delta, abs=max(df, np.sqrt(2 * omega1 * df)))


# ---------------------------------------------------------------------------
# line fits


def test_exact_lorentzian_recovered():
    fit = an.fit_lorentzian(lorentz_spectrum(30.0, 4.0, 2.0, 0.1), 30.0, 15.0)
    assert fit.fwhm == pytest.approx(4.0, rel=0.01)
    assert fit.center == pytest.approx(30.0, abs=1e-6)
    assert fit.amplitude == pytest.approx(2.0, rel=0.01)
    assert fit.baseline == pytest.approx(0.1, abs=1e-3)


def test_free_decay_spectrum_width_and_height():
    gamma = WORKING.sigma**2 * WORKING.tau_c
    assert gamma == pytest.approx(18.16, abs=0.01)
    t = np.arange(0, 2.0, 2e-4)
    x = np.exp(-gamma * t + 2j * np.pi * 100.0 * t)
    spec = an.fft_spectrum(times=t, values=x, mode="real", phase=0.0, zero_pad_factor=8)
    fit = an.fit_lorentzian(spec, 100.0, 40.0)
    assert fit.fwhm == pytest.approx(5.78, abs=0.02)
    assert 2 * np.pi * fit.fwhm == pytest.approx(2 * gamma, rel=0.01)
    assert fit.amplitude == pytest.approx(0.0551, abs=3e-4)


@given(center=st.floats(15.0, 45.0), fwhm=st.floats(1.0, 6.0), shift=st.floats(-8.0, 8.0))
@settings(max_examples=40, deadline=None)
def test_fit_is_location_equivariant(center, fwhm, shift):
    spec = lorentz_spectrum(center, fwhm, 1.0, 0.05)
    a = an.fit_lorentzian(spec, center, 12.0)
    b = an.fit_lorentzian(an.shift_axis(spec, shift), center + shift, 12.0)
    assert b.center - a.center == pytest.approx(shift, abs=0.1 * spec.bin_width)
    assert b.fwhm == pytest.approx(a.fwhm, rel=0.01)


def test_joint_fit_separates_overlapping_lines():
    f = np.arange(0, 30, 0.05)
    y = an.lorentzian(f, 1.0, 12.0, 1.5) + an.lorentzian(f, 0.6, 15.4, 1.5) + 0.02
    fits = an.fit_lorentzians(an.Spectrum(f, y), [12.0, 15.4], 5.0)
    assert [round(x.center, 3) for x in fits] == [12.0, 15.4]
    assert fits[1].amplitude == pytest.approx(0.6, rel=1e-3)


def test_fit_failures_raise_with_diagnostics():
    spec = lorentz_spectrum(30.0, 4.0)
    with pytest.raises(FitError) as err:
        an.fit_lorentzian(spec, 30.0, 0.08)
    assert err.value.diagnostics["n_points"] < 5
    flat = an.Spectrum(np.arange(50.0), np.ones(50))
    with pytest.raises(FitError):
        an.fit_lorentzian(flat, 25.0, 10.0)


def test_peak_finder_keeps_tallest_sorted_by_frequency():
    f = np.arange(0, 60, 0.1)
    y = an.lorentzian(f, 1.0, 10.0, 1.0) + an.lorentzian(f, 3.0, 40.0, 1.0)
    assert an.find_peaks(an.Spectrum(f, y), 2) == pytest.approx([10.0, 40.0])
    assert an.find_peaks(an.Spectrum(f, y), 1) == pytest.approx([40.0])


# ---------------------------------------------------------------------------
# decay fits


def test_exact_exponential_recovered():
    t = np.linspace(0, 0.3, 301)
    fit = an.fit_exp_decay(t, np.exp(-t / 0.06), "direct")
    assert fit.t_decay == pytest.approx(0.06, rel=0.01)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-6)


def test_constant_series_flags_infinite_decay():
    t = np.linspace(0, 1, 100)
    with pytest.raises(FitError) as err:
        an.fit_exp_decay(t, np.ones(100), "direct")
    assert err.value.diagnostics["t_decay"] == np.inf


def test_envelope_peak_picking_of_real_oscillation():
    t = np.arange(0, 0.5, 1e-4)
    x = np.exp(-t / 0.1) * np.cos(2 * np.pi * 40 * t)
    assert an.fit_exp_decay(t, x, "envelope").t_decay == pytest.approx(0.1, rel=0.01)


def test_stroboscopic_envelope():
    period = 1e-3
    t = np.arange(0, 1.0, period / 20)
    x = 1 + 0.3 * np.exp(-t / 0.25) * np.cos(2 * np.pi * 15.0 * t) + 0.01 * np.sin(2 * np.pi * 1e3 * t)
    fit = an.fit_exp_decay(t, x, "stroboscopic", period=period)
    assert fit.t_decay == pytest.approx(0.25, rel=0.02)
    with pytest.raises(ArgumentError):
        an.fit_exp_decay(t, x, "stroboscopic", period=1.03e-3)


# ---------------------------------------------------------------------------
# sensitivity calculus


def working_point(**kw):
    base = dict(t1=1.5, t_enc_decay=0.6, t2_star=0.06, tau1=1e-3, tau2=50e-6, R=1000,
                delta_hz=311.8, omega1_hz=1000.0)
    base.update(kw)
    return an.SensitivityInputs(**base)


def test_effective_locked_time_examples():
    assert an.effective_t1rho(1.5, np.inf) == 1.5
    assert an.effective_t1rho(1.0, 1.0) == 0.5
    assert an.effective_t1rho(1.5, 0.6) == pytest.approx(0.4286, abs=1e-4)


def test_effective_time_examples():
    assert an.t_eff(1.5, 0.6, 1e-3, 0.0) == 0.6
    assert an.t_eff(1.5, 0.6, 1e-3, 50e-6) == pytest.approx(0.588, abs=5e-4)
    assert an.t_eff(1.5, 0.06, 0.156e-3, 50e-6) == pytest.approx(0.0592, abs=1e-4)


def test_amplitude_scan_examples_and_limits():
    assert an.amplitude_vs_scan(0.588, 1e-3, 1000) == pytest.approx(0.480, abs=1e-3)
    assert an.amplitude_vs_scan(10.0, 1e-4, 10) == pytest.approx(1e-3, rel=1e-3)
    assert an.amplitude_vs_scan(0.01, 1e-3, 10_000) == pytest.approx(0.01, rel=1e-12)


def test_sensitivity_ratio_without_drive_is_one():
    assert an.sensitivity_ratio(working_point(omega1_hz=0.0)) == 1.0


def test_sensitivity_ratio_at_working_point():
    locked = an.sensitivity_ratio(working_point())
    assert 3.4 <= locked <= 4.5
    # frozen from an independent evaluation of the same closed form
    assert locked == pytest.approx(3.430, abs=2e-3)
    capped = an.sensitivity_ratio(working_point(t_enc_decay=an.effective_t1rho(1.5, 0.6)))
    assert capped == pytest.approx(2.73, abs=0.01)


def test_sensitivity_ratio_saturates_for_long_scans():
    x = working_point(R=10**9)
    ts = x.resolved_tau1_star()
    te = an.t_eff(1.5, 0.6, 1e-3, 50e-6)
    te_star = an.t_eff(1.5, 0.06, ts, 50e-6)
    assert an.sensitivity_ratio(x) == pytest.approx(te / te_star * np.sqrt(ts / 1e-3), rel=1e-9)


def test_sensitivity_ratio_is_continuous_at_zero_drive():
    assert an.sensitivity_ratio(working_point(omega1_hz=1e-3, t_enc_decay=0.06)) == pytest.approx(1.0, abs=1e-3)


@given(t_lo=st.floats(0.0, 10.0), step=st.floats(1e-3, 10.0))
@settings(max_examples=50, deadline=None)
def test_sensitivity_ratio_grows_with_overhead(t_lo, step):
    lo = an.sensitivity_ratio(working_point(t_overhead=t_lo))
    hi = an.sensitivity_ratio(working_point(t_overhead=t_lo + step))
    assert hi > lo


def test_sensitivity_input_validation():
    with pytest.raises(ArgumentError):
        working_point(t1=0.0)
    with pytest.raises(ArgumentError):
        working_point(R=0)
    with pytest.raises(ArgumentError):
        working_point(t_overhead=-1.0)


def test_locked_time_estimate_near_simulated_value():
    est = an.t1rho_estimate(WORKING.sigma, WORKING.tau_c, 311.83, 1000.0)
    assert est == pytest.approx(0.618, abs=0.005)
    assert an.t1rho_estimate(WORKING.sigma, WORKING.tau_c, 311.83, 0.0) == pytest.approx(WORKING.t2_star)
