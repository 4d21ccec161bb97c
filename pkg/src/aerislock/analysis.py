"""Spectra, line fits, decay fits and the closed-form sensitivity calculus.

Spectra are integral-normalized: ``X(f) = dt * sum_n x_n exp(-2 pi i f t_n)``
so the transform of ``exp(-t/T)`` peaks at ``T`` regardless of the grid.
Default processing is no window and four-fold zero padding, which keeps
Lorentzian line shapes intact for width extraction.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .errors import ArgumentError, FitError
from .molecule import FieldConfig, reduced_shift

_MODES = ("modulus", "real", "power")


@dataclass(frozen=True)
class Spectrum:
    """Non-negative half spectrum.

    Attributes
    ----------
    freqs : array, Hz
    amplitudes : array
        Modulus, phased real part or power, see ``mode``.
    mode, window, zero_pad : processing metadata
    ppm : array, optional
        Chemical-shift axis when the spectrum has been mapped.
    """

    freqs: np.ndarray
    amplitudes: np.ndarray
    mode: str = "modulus"
    window: str = "none"
    zero_pad: int = 4
    ppm: Optional[np.ndarray] = None

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if self.freqs.size > 1 else np.inf


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    amplitude: float
    residual: float
    baseline: float = 0.0


@dataclass(frozen=True)
class DecayFit:
    t_decay: float
    amplitude: float
    residual: float
    n_points: int = 0


def _uniform_dt(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ArgumentError("need at least two samples")
    d = np.diff(t)
    if np.any(d <= 0) or np.max(np.abs(d - d.mean())) > 1e-6 * abs(d.mean()):
        raise ArgumentError("spectral analysis needs a uniform, increasing time grid")
    return float(d.mean())


def fft_spectrum(series=None, zero_pad_factor: int = 4, window: str = "none",
                 mode: str = "modulus", *, times=None, values=None,
                 phase: Optional[float] = None) -> Spectrum:
    """Discrete Fourier transform on the non-negative frequency axis.

    Parameters
    ----------
    series : TimeSeries, optional
        Anything with ``times`` and ``values``; alternatively pass the
        keyword arrays.
    zero_pad_factor : int
        Transform length is ``zero_pad_factor`` times the series length.
    window : {"none", "hann"}
    mode : {"modulus", "real", "power"}
        ``"real"`` applies a zero-order phase ``exp(-i phase)`` first; with
        ``phase=None`` the phase of the tallest bin is used.

    Notes
    -----
    Positive frequencies correspond to ``exp(+2 pi i f t)`` components.
    The time origin of the transform is the first sample.
    """
    if series is not None:
        times, values = series.times, series.values
    if times is None or values is None:
        raise ArgumentError("provide a series or times and values")
    dt = _uniform_dt(times)
    x = np.asarray(values)
    if x.shape != np.shape(times):
        raise ArgumentError("times and values must have the same shape")
    if int(zero_pad_factor) != zero_pad_factor or zero_pad_factor < 1:
        raise ArgumentError("zero_pad_factor must be a positive integer")
    if window not in ("none", "hann"):
        raise ArgumentError("window must be 'none' or 'hann'")
    if mode not in _MODES:
        raise ArgumentError(f"mode must be one of {_MODES}")
    if window == "hann":
        x = x * np.hanning(x.size)
    n_fft = int(zero_pad_factor) * x.size
    if np.iscomplexobj(x):
        spec = np.fft.fft(x, n_fft)[: n_fft // 2 + 1] * dt
    else:
        spec = np.fft.rfft(x, n_fft) * dt
    freqs = np.arange(spec.size) / (n_fft * dt)
    if mode == "modulus":
        amp = np.abs(spec)
    elif mode == "power":
        amp = np.abs(spec) ** 2
    else:
        if phase is None:
            phase = float(np.angle(spec[np.argmax(np.abs(spec))])) if np.any(spec) else 0.0
        amp = np.real(spec * np.exp(-1j * phase))
    return Spectrum(freqs, amp, mode, window, int(zero_pad_factor))


def shift_axis(spec: Spectrum, offset_hz: float) -> Spectrum:
    """Add ``offset_hz`` to every frequency (undo a known alias of ``k * f_s``)."""
    return replace(spec, freqs=spec.freqs + offset_hz)


def map_dressed_axis(spec: Spectrum, omega1_hz: float,
                     field_cfg: Optional[FieldConfig] = None) -> Spectrum:
    """Relocate dressed frequencies to shifts, ``f' = sqrt(f**2 - omega1**2)``.

    Bins below ``omega1_hz`` are dropped (a relative tolerance of 1e-9 keeps
    the bin at exactly ``omega1_hz``, which maps to zero). Amplitudes are
    carried unchanged. With ``field_cfg`` a ppm axis is attached.
    """
    if omega1_hz < 0:
        raise ArgumentError("omega1_hz must be non-negative")
    f = spec.freqs
    keep = f >= omega1_hz * (1 - 1e-9)
    fp = np.sqrt(np.maximum(f[keep] ** 2 - omega1_hz**2, 0.0))
    ppm = None if field_cfg is None else fp / field_cfg.hz_per_ppm
    return replace(spec, freqs=fp, amplitudes=spec.amplitudes[keep], ppm=ppm)


def lorentzian(f, amplitude, center, fwhm, baseline=0.0):
    """``A (G/2)**2 / ((f - f0)**2 + (G/2)**2) + baseline``."""
    hw2 = (fwhm / 2) ** 2
    return amplitude * hw2 / ((f - center) ** 2 + hw2) + baseline


def fit_lorentzian(spec: Spectrum, center_hz: Optional[float] = None,
                   window_hz: Optional[float] = None, baseline: bool = True,
                   max_nfev: int = 2000) -> LorentzianFit:
    """Least-squares Lorentzian fit around one dominant peak.

    Parameters
    ----------
    center_hz : float, optional
        Window center; defaults to the tallest bin.
    window_hz : float, optional
        Half-width of the fitted window; defaults to the whole spectrum.

    Raises
    ------
    FitError
        Too few points, non-convergence or a non-positive width.
    """
    f = np.asarray(spec.freqs, dtype=float)
    y = np.asarray(spec.amplitudes, dtype=float)
    if center_hz is None:
        center_hz = float(f[np.argmax(y)])
    sel = np.ones(f.size, dtype=bool) if window_hz is None else np.abs(f - center_hz) <= window_hz
    fw, yw = f[sel], y[sel]
    diag = {"center_hz": center_hz, "window_hz": window_hz, "n_points": int(fw.size)}
    if fw.size < 5:
        raise FitError("too few points in the fit window", diag)
    i0 = int(np.argmax(yw))
    a0, c0 = float(yw[i0]), float(fw[i0])
    b0 = float(np.min(yw)) if baseline else 0.0
    above = fw[yw - b0 >= (a0 - b0) / 2]
    g0 = max(float(above.max() - above.min()), float(np.median(np.diff(fw))) if fw.size > 1 else 1.0)
    if a0 - b0 <= 0:
        raise FitError("no peak in the fit window", diag)
    p0 = [a0 - b0, c0, g0] + ([b0] if baseline else [])
    lo = [-np.inf, fw.min(), 0.0] + ([-np.inf] if baseline else [])
    hi = [np.inf, fw.max(), np.inf] + ([np.inf] if baseline else [])
    try:
        popt, _ = curve_fit(lorentzian, fw, yw, p0=p0, bounds=(lo, hi), max_nfev=max_nfev)
    except (RuntimeError, ValueError) as exc:
        diag["message"] = str(exc)
        diag["p0"] = p0
        raise FitError("Lorentzian fit did not converge", diag) from exc
    if not popt[2] > 0:
        raise FitError("fitted width is not positive", diag)
    res = float(np.sqrt(np.mean((lorentzian(fw, *popt) - yw) ** 2)))
    return LorentzianFit(float(popt[1]), float(popt[2]), float(popt[0]), res,
                         float(popt[3]) if baseline else 0.0)


def fit_lorentzians(spec: Spectrum, centers_hz, window_hz: float,
                    max_nfev: int = 4000) -> list:
    """Joint fit of overlapping Lorentzians at known approximate centers.

    The window spans ``[min(centers) - window_hz, max(centers) + window_hz]``
    and a common constant baseline is fitted. Returns one
    :class:`LorentzianFit` per center, in the order given.
    """
    centers = [float(c) for c in centers_hz]
    if not centers:
        raise ArgumentError("need at least one center")
    f = np.asarray(spec.freqs, dtype=float)
    y = np.asarray(spec.amplitudes, dtype=float)
    sel = (f >= min(centers) - window_hz) & (f <= max(centers) + window_hz)
    fw, yw = f[sel], y[sel]
    n = len(centers)
    diag = {"centers_hz": centers, "window_hz": window_hz, "n_points": int(fw.size)}
    if fw.size < 3 * n + 2:
        raise FitError("too few points in the fit window", diag)

    def model(fr, *p):
        out = np.full(fr.shape, p[-1])
        for i in range(n):
            out = out + lorentzian(fr, *p[3 * i: 3 * i + 3])
        return out

    b0 = float(np.min(yw))
    g0 = max(window_hz / 4, 2 * float(np.median(np.diff(fw))))
    p0, lo, hi = [], [], []
    for c in centers:
        p0 += [float(np.interp(c, fw, yw)) - b0, c, g0]
        lo += [-np.inf, c - window_hz, 0.0]
        hi += [np.inf, c + window_hz, np.inf]
    p0.append(b0)
    lo.append(-np.inf)
    hi.append(np.inf)
    try:
        popt, _ = curve_fit(model, fw, yw, p0=p0, bounds=(lo, hi), max_nfev=max_nfev)
    except (RuntimeError, ValueError) as exc:
        diag["message"] = str(exc)
        raise FitError("multi-Lorentzian fit did not converge", diag) from exc
    res = float(np.sqrt(np.mean((model(fw, *popt) - yw) ** 2)))
    fits = []
    for i in range(n):
        a, c, g = popt[3 * i: 3 * i + 3]
        if not g > 0:
            raise FitError("fitted width is not positive", diag)
        fits.append(LorentzianFit(float(c), float(g), float(a), res, float(popt[-1])))
    return fits


def find_peaks(spec: Spectrum, n: int, f_min: float = 0.0, f_max: float = np.inf,
               min_separation_hz: float = 0.0):
    """Frequencies of the ``n`` tallest local maxima inside ``[f_min, f_max]``, ascending."""
    f, y = spec.freqs, spec.amplitudes
    idx = _local_extrema(y)
    idx = idx[(f[idx] >= f_min) & (f[idx] <= f_max)]
    idx = idx[np.argsort(y[idx])[::-1]]
    chosen = []
    for i in idx:
        if all(abs(f[i] - f[j]) >= min_separation_hz for j in chosen):
            chosen.append(i)
        if len(chosen) == n:
            break
    return sorted(float(f[i]) for i in chosen)


def autophase(spectrum_complex) -> float:
    """Zero-order phase of the tallest bin of a complex spectrum."""
    s = np.asarray(spectrum_complex)
    return float(np.angle(s[np.argmax(np.abs(s))]))


# ---------------------------------------------------------------------------
# decay fits


def _local_extrema(x):
    """Indices of interior local maxima of ``x``."""
    return np.flatnonzero((x[1:-1] >= x[:-2]) & (x[1:-1] > x[2:])) + 1


def envelope_points(times, values, mode: str = "envelope", period: Optional[float] = None):
    """Samples used by :func:`fit_exp_decay`.

    ``"direct"``
        ``|values|`` as given.
    ``"envelope"``
        ``|values|`` for complex input; for real input the local maxima of
        ``|values|`` (peak picking), or ``|values|`` when there are fewer
        than three maxima.
    ``"stroboscopic"``
        Samples at integer multiples of ``period``; the envelope is half the
        peak-to-peak swing between consecutive extrema of that sampled
        series, located at the midpoint of each pair. A sampled series
        without interior extrema is used as the envelope directly.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values)
    if mode == "direct":
        return t, np.abs(x)
    if mode == "envelope":
        if np.iscomplexobj(x):
            return t, np.abs(x)
        a = np.abs(x)
        idx = _local_extrema(a)
        if idx.size < 3:
            return t, a
        return t[idx], a[idx]
    if mode == "stroboscopic":
        if period is None or not period > 0:
            raise ArgumentError("stroboscopic mode needs a positive period")
        dt = _uniform_dt(t)
        step = period / dt
        if abs(step - round(step)) > 1e-6 * step:
            raise ArgumentError("period must be an integer multiple of the sample spacing")
        s = np.real(x[:: int(round(step))])
        ts = t[:: int(round(step))]
        i_max = _local_extrema(s)
        i_min = _local_extrema(-s)
        ext = np.sort(np.concatenate([i_max, i_min]))
        if ext.size < 2:
            # no resolvable modulation: the sampled series is itself the envelope
            return ts, np.abs(s)
        a, b = ext[:-1], ext[1:]
        return 0.5 * (ts[a] + ts[b]), 0.5 * np.abs(s[a] - s[b])
    raise ArgumentError(f"unknown mode {mode!r}")


def _exp(t, a, rate):
    return a * np.exp(-rate * t)


def fit_exp_decay(times, values=None, mode: str = "envelope", period: Optional[float] = None,
                  t_min: float = 0.0, t_max: float = np.inf) -> DecayFit:
    """Fit ``A exp(-t/T)`` to the envelope selected by ``mode``.

    ``times`` may also be a TimeSeries (then ``values`` is taken from it).
    Only envelope points with ``t_min <= t <= t_max`` enter the fit.

    Raises
    ------
    FitError
        Fewer than three points, or a non-decaying envelope (the diagnostics
        then report ``t_decay = inf``).
    """
    if values is None:
        times, values = times.times, times.values
    tp, yp = envelope_points(times, values, mode, period)
    sel = (tp >= t_min) & (tp <= t_max) & np.isfinite(yp)
    tp, yp = tp[sel], yp[sel]
    if tp.size < 3:
        raise FitError("too few envelope points", {"n_points": int(tp.size)})
    span = float(tp[-1] - tp[0])
    pos = yp > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(tp[pos], np.log(yp[pos]), 1)
    else:
        slope, icpt = 0.0, 0.0
    if not -slope * span > 1e-6:
        raise FitError("envelope does not decay", {"t_decay": np.inf, "log_slope": float(slope)})
    try:
        popt, _ = curve_fit(_exp, tp - tp[0], yp, p0=[np.exp(icpt + slope * tp[0]), -slope],
                            maxfev=5000)
    except RuntimeError as exc:
        raise FitError("exponential fit did not converge", {"message": str(exc)}) from exc
    a, rate = popt
    if not rate * span > 1e-6:
        raise FitError("envelope does not decay", {"t_decay": np.inf, "rate": float(rate)})
    res = float(np.sqrt(np.mean((_exp(tp - tp[0], a, rate) - yp) ** 2)))
    return DecayFit(1.0 / rate, float(a * np.exp(rate * tp[0])), res, int(tp.size))


# ---------------------------------------------------------------------------
# sensitivity calculus


def effective_t1rho(t1: float, t1rho: float) -> float:
    """``1 / (1/T1 + 1/T1rho)``; infinite arguments are allowed."""
    if not (t1 > 0 and t1rho > 0):
        raise ArgumentError("decay times must be positive")
    return 1.0 / (1.0 / t1 + 1.0 / t1rho)


def t_eff(t1: float, t_enc: float, tau1: float, tau2: float) -> float:
    """Effective decay time per unit encoding time, ``T1 Tenc tau1 / (tau1 T1 + tau2 Tenc)``."""
    if not (t1 > 0 and t_enc > 0 and tau1 > 0 and tau2 >= 0):
        raise ArgumentError("t1, t_enc, tau1 must be positive and tau2 non-negative")
    if np.isinf(t1):
        return t_enc
    if np.isinf(t_enc):
        return t1 * tau1 / tau2 if tau2 > 0 else np.inf
    return t1 * t_enc * tau1 / (tau1 * t1 + tau2 * t_enc)


def amplitude_vs_scan(T_eff: float, tau1: float, R: int) -> float:
    """Peak amplitude scale ``T_eff (1 - exp(-R tau1 / T_eff))``."""
    if not (T_eff > 0 and tau1 > 0 and R >= 1):
        raise ArgumentError("inputs must be positive")
    return float(-T_eff * np.expm1(-R * tau1 / T_eff))


def tau1_star(tau1: float, delta_hz: float, omega1_hz: float) -> float:
    """Free encoding time with the same accumulated phase, ``tau1 * delta_tilde / delta``."""
    if delta_hz == 0:
        raise ArgumentError("delta_hz must be non-zero")
    return float(tau1 * reduced_shift(abs(delta_hz), omega1_hz) / abs(delta_hz))


@dataclass(frozen=True)
class SensitivityInputs:
    """Inputs of the continuous-versus-standard sensitivity ratio.

    ``t_enc_decay`` is the locked decay time (T1rho or its T1-capped
    combination, caller's choice); ``t2_star`` is the free decay time of
    the standard protocol. ``tau1_star=None`` derives it from the exact
    reduced shift.
    """

    t1: float
    t_enc_decay: float
    t2_star: float
    tau1: float
    tau2: float
    R: int
    delta_hz: float
    omega1_hz: float
    t_overhead: float = 0.0
    tau1_star: Optional[float] = None

    def __post_init__(self):
        for name in ("t1", "t_enc_decay", "t2_star", "tau1", "tau2"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if int(self.R) != self.R or self.R < 1:
            raise ArgumentError("R must be a positive integer")
        if self.t_overhead < 0 or self.omega1_hz < 0:
            raise ArgumentError("t_overhead and omega1_hz must be non-negative")

    def resolved_tau1_star(self) -> float:
        if self.tau1_star is not None:
            return self.tau1_star
        return tau1_star(self.tau1, self.delta_hz, self.omega1_hz)


def sensitivity_ratio(inputs: SensitivityInputs) -> float:
    """Ratio of standard to continuous sensitivity (values > 1 favour locking).

    ``[A(T_eff, tau1) / A(T*_eff, tau1*)] * sqrt(tau1*/tau1)`` without
    overhead, where the square root is the exact form of
    ``sqrt(delta / 2 Omega1)``. With ``t_overhead > 0`` the root becomes
    ``sqrt((tau1* + tau2 + t_o/R) / (tau1 + tau2 + t_o/R))``. At
    ``omega1 = 0`` both protocols coincide and the result is exactly 1.
    """
    x = inputs
    if x.omega1_hz == 0:
        return 1.0
    ts = x.resolved_tau1_star()
    te = t_eff(x.t1, x.t_enc_decay, x.tau1, x.tau2)
    te_star = t_eff(x.t1, x.t2_star, ts, x.tau2)
    amp = amplitude_vs_scan(te, x.tau1, x.R) / amplitude_vs_scan(te_star, ts, x.R)
    if x.t_overhead > 0:
        o = x.t_overhead / x.R
        root = np.sqrt((ts + x.tau2 + o) / (x.tau1 + x.tau2 + o))
    else:
        root = np.sqrt(ts / x.tau1)
    return float(amp * root)


def t1rho_estimate(sigma: float, tau_c: float, delta_hz: float, omega1_hz: float) -> float:
    """Weak-coupling decay time of the dressed coherence of one line.

    ``1/T = (delta/W)**2 sigma**2 tau_c + (omega1/W)**2 S(W) / 2`` with
    ``W`` the generalized Rabi frequency and ``S(w) = sigma**2 tau_c / (1 + (w tau_c)**2)``
    (``sigma`` in rad/s, frequencies in Hz).
    """
    w = np.hypot(delta_hz, omega1_hz)
    if w == 0:
        raise ArgumentError("delta and omega1 cannot both vanish")
    s0 = sigma**2 * tau_c
    sw = s0 / (1 + (2 * np.pi * w * tau_c) ** 2)
    rate = (delta_hz / w) ** 2 * s0 + 0.5 * (omega1_hz / w) ** 2 * sw
    return np.inf if rate == 0 else 1.0 / rate
