"""Pulse-sequence programs: FID, spin locking and the AERIS family.

Geometry (all phases in radians, ``I_phi = cos(phi) I_x - sin(phi) I_y``):

* FID: a pi/2 trigger about ``x`` puts the magnetization along ``-y``.
* Spin lock: the trigger puts the magnetization along the drive axis
  ``e = (cos phi, -sin phi, 0)``; the returned signal is the locked-axis
  magnetization.
* AERIS: the trigger is applied with the encoding phase, leaving the
  magnetization in the transverse plane perpendicular to the encoding drive.
  A continuous drive then nutates it through ``z`` at the dressed frequency;
  free evolution precesses it about ``z``. The measurement drive (phase
  ``phi_1 + pi/2`` by default) is orthogonal to the encoding drive and
  parallel to the initial magnetization.

NV readout. During the measurement stage the strong drive rotates the
nuclei about the in-plane axis ``a`` and produces
``M_z(t) = M_z(0) cos(W2 t) + (a x M)_z sin(W2 t)``. A pulse train
synchronized with the drive picks one quadrature:

``"sin"``
    ``(a x M)_z`` -- the transverse component left by free or robust
    encoding;
``"cos"``
    ``-M_z`` -- the longitudinal component left by continuous nutation
    (the minus sign keeps the continuous readout a ``+sin`` series);
``"auto"``
    ``"sin"`` for free and robust encodings, ``"cos"`` for continuous.

The *analytic* readout applies the ideal transfer function
``(2 gamma_e tau_2 / pi) b_unit * component`` to the magnetization at the
start of the measurement stage. The *filter* readout integrates the
simulated ``B(t) = b_unit * M_z(t)`` against the +-1 square wave and returns
``sin(phi)``.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import ArgumentError, ConfigurationError
from .molecule import (
    FieldConfig,
    Molecule,
    generalized_rabi,
    group_operators,
    hamiltonian_parts,
)
from .noise import DrivingNoiseParams, OUParams
from .spincore import propagator

GAMMA_E = 2 * np.pi * 28.024e9  # rad s^-1 T^-1
B_UNIT = 150e-12  # T per fully polarized proton at the NV
DEFAULT_TAU2 = 50e-6
DEFAULT_T1 = 1.5

_QUADRATURES = ("auto", "sin", "cos")


@dataclass(frozen=True)
class EncodingStage:
    """Encoding segment of one AERIS repetition.

    Parameters
    ----------
    kind : {"free", "continuous", "robust"}
    omega1_hz : float
        Drive Rabi frequency (0 for free evolution).
    phase : float
        Drive phase; pi/2 drives about ``-I_y``.
    n1 : int
        Number of full 2 pi drive periods; duration ``n1 / omega1_hz``.
        The robust kind runs ``n1`` periods at ``phase`` followed by ``n1``
        periods at ``phase + pi``.
    tau1_s : float, optional
        Explicit duration. Required for ``free``; for ``continuous`` it
        overrides ``n1``.
    """

    kind: str = "continuous"
    omega1_hz: float = 1000.0
    phase: float = np.pi / 2
    n1: int = 1
    tau1_s: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("free", "continuous", "robust"):
            raise ConfigurationError(f"unknown encoding kind {self.kind!r}")
        if self.kind == "free":
            if self.tau1_s is None or not self.tau1_s > 0:
                raise ConfigurationError("free encoding needs tau1_s > 0")
        else:
            if not self.omega1_hz > 0:
                raise ConfigurationError(f"{self.kind} encoding needs omega1_hz > 0")
            if int(self.n1) != self.n1 or self.n1 < 1:
                raise ConfigurationError("n1 must be a positive integer")
            if self.tau1_s is not None and not self.tau1_s > 0:
                raise ConfigurationError("tau1_s must be positive")
            if self.kind == "robust" and self.tau1_s is not None:
                raise ConfigurationError("robust encoding is timed by n1, not tau1_s")

    @property
    def half_duration(self) -> float:
        if self.kind == "free":
            return self.tau1_s
        if self.tau1_s is not None:
            return self.tau1_s
        return self.n1 / self.omega1_hz

    @property
    def duration(self) -> float:
        """Total encoding time per repetition (both halves for robust)."""
        return 2 * self.half_duration if self.kind == "robust" else self.half_duration

    def segments(self):
        """``(duration, rabi_rad_s, phase)`` for each constant-drive segment."""
        if self.kind == "free":
            return [(self.tau1_s, 0.0, self.phase)]
        w = 2 * np.pi * self.omega1_hz
        if self.kind == "continuous":
            return [(self.half_duration, w, self.phase)]
        return [(self.half_duration, w, self.phase), (self.half_duration, w, self.phase + np.pi)]


@dataclass(frozen=True)
class MeasurementStage:
    """Strong drive during which the NV reads the nuclear Rabi signal.

    ``phase=None`` selects ``encoding.phase + pi/2``. Duration is
    ``tau2_s`` if given, else ``n2 / omega2_hz`` if ``n2`` is given, else
    50 us.
    """

    omega2_hz: float = 200e3
    n2: Optional[int] = None
    tau2_s: Optional[float] = None
    phase: Optional[float] = None
    quadrature: str = "auto"

    def __post_init__(self):
        if not self.omega2_hz > 0:
            raise ConfigurationError("omega2_hz must be positive")
        if self.quadrature not in _QUADRATURES:
            raise ConfigurationError(f"quadrature must be one of {_QUADRATURES}")
        if self.tau2_s is not None and not self.tau2_s > 0:
            raise ConfigurationError("tau2_s must be positive")
        if self.n2 is not None and (int(self.n2) != self.n2 or self.n2 < 1):
            raise ConfigurationError("n2 must be a positive integer")

    @property
    def duration(self) -> float:
        if self.tau2_s is not None:
            return self.tau2_s
        if self.n2 is not None:
            return self.n2 / self.omega2_hz
        return DEFAULT_TAU2


@dataclass(frozen=True)
class AerisConfig:
    """Complete AERIS protocol description.

    Parameters
    ----------
    encoding, measurement : stage descriptions
    repetitions : int
        Number R of encoding+measurement repetitions.
    t1_s : float
        Longitudinal decay time applied as ``exp(-t/T1)`` (``inf`` disables).
    readout : {"analytic", "filter"}
    trigger : bool
        Apply the initial pi/2 pulse.
    trigger_phase : float, optional
        Phase of the trigger pulse; defaults to the encoding phase.
    readout_noise : float
        Standard deviation of additive Gaussian readout noise (default 0).
    """

    encoding: EncodingStage = field(default_factory=EncodingStage)
    measurement: MeasurementStage = field(default_factory=MeasurementStage)
    repetitions: int = 1000
    t1_s: float = DEFAULT_T1
    readout: str = "analytic"
    trigger: bool = True
    trigger_phase: Optional[float] = None
    readout_noise: float = 0.0

    def __post_init__(self):
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ConfigurationError("repetitions must be a positive integer")
        if not self.t1_s > 0:
            raise ConfigurationError("t1_s must be positive or inf")
        if self.readout not in ("analytic", "filter"):
            raise ConfigurationError("readout must be 'analytic' or 'filter'")
        if self.readout_noise < 0:
            raise ConfigurationError("readout_noise must be >= 0")
        enc = self.encoding
        if enc.kind != "free" and self.measurement.omega2_hz < 10 * enc.omega1_hz:
            warnings.warn("measurement drive is not much stronger than the encoding drive")
        if enc.kind != "free":
            rel = (self.measurement_phase - enc.phase) % np.pi
            if abs(rel - np.pi / 2) > 1e-9:
                warnings.warn("measurement drive is not orthogonal to the encoding drive")

    @property
    def measurement_phase(self) -> float:
        p = self.measurement.phase
        return self.encoding.phase + np.pi / 2 if p is None else p

    @property
    def quadrature(self) -> str:
        q = self.measurement.quadrature
        if q != "auto":
            return q
        return "cos" if self.encoding.kind == "continuous" else "sin"

    @property
    def period(self) -> float:
        return self.encoding.duration + self.measurement.duration


@dataclass(frozen=True)
class NVReadout:
    """Per-repetition NV signal.

    Attributes
    ----------
    values : (R,) array
        ``<sigma_y>_j``, clamped to [-1, 1].
    times : (R,) array
        Elapsed protocol time at the start of each measurement stage (s).
    encoding_times : (R,) array
        Accumulated encoding time ``j * tau_1`` -- the uniform axis on which
        the encoded phase advances; use it for spectra.
    groups : (G, R) array
        Per-group contributions (pre-clamp, analytic or phase units).
    """

    values: np.ndarray
    times: np.ndarray
    encoding_times: np.ndarray
    groups: np.ndarray


# ---------------------------------------------------------------------------
# readout models


def nv_readout_analytic(amplitudes, dressed_freqs_hz, j, tau1, tau2, gamma_e=GAMMA_E):
    """Ideal pulse-train readout ``(2 gamma_e tau2/pi) sum_k b_k sin(2 pi f_k j tau1)``."""
    b = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    f = np.atleast_1d(np.asarray(dressed_freqs_hz, dtype=float))
    val = 2 * gamma_e * tau2 / np.pi * np.sum(b * np.sin(2 * np.pi * f * j * tau1))
    if abs(val) > 1:
        warnings.warn("analytic readout exceeds 1 and was clamped")
        val = float(np.clip(val, -1, 1))
    return float(val)


def nv_readout_filter(b_of_t, dt, omega2_hz, gamma_e=GAMMA_E, phase=0.0):
    """Phase picked up by the NV under a pulse train synchronized with the drive.

    Parameters
    ----------
    b_of_t : array
        Field at the NV (T) sampled at the midpoints ``(i + 1/2) dt`` of the
        measurement window.
    dt : float
        Sample spacing (s).
    omega2_hz : float
        Measurement Rabi frequency; the modulation is
        ``sign(sin(2 pi omega2 t + phase))``.

    Returns
    -------
    float
        ``sin(gamma_e * int b(t) sq(t) dt)``.
    """
    b = np.asarray(b_of_t, dtype=float)
    t = (np.arange(b.size) + 0.5) * dt
    sq = np.sign(np.sin(2 * np.pi * omega2_hz * t + phase))
    return float(np.sin(gamma_e * np.sum(b * sq) * dt))


def apply_t1_envelope(values, times, t1_s):
    """Multiply ``values`` by ``exp(-times / t1_s)``; ``t1_s = inf`` is a no-op."""
    if not t1_s > 0:
        raise ArgumentError("t1_s must be positive or inf")
    values = np.asarray(values)
    if np.isinf(t1_s):
        return values.copy()
    return values * np.exp(-np.asarray(times) / t1_s)


# ---------------------------------------------------------------------------
# helpers shared by the run functions


def default_dt(tau_c: float, f_max_hz: float) -> float:
    """``min(tau_c/10, 1/(50 f_max))``."""
    cands = [tau_c / 10]
    if f_max_hz > 0:
        cands.append(1.0 / (50 * f_max_hz))
    return min(cands)


def _rotation_spinor(phase: float, angle: float) -> np.ndarray:
    """``exp(-i angle I_phi)|up>``."""
    n = np.array([np.cos(phase), -np.sin(phase)])
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    # exp(-i a/2 n.sigma)|up> = (c, -i s (n_x + i n_y))
    return np.array([c, -1j * s * (n[0] + 1j * n[1])])


def _choose_basis(mol: Molecule, basis: str) -> str:
    if basis == "auto":
        return "collective" if mol.is_coupled else "spin_half"
    if basis not in ("spin_half", "collective", "full"):
        raise ArgumentError(f"unknown basis {basis!r}")
    if basis == "spin_half" and mol.is_coupled:
        raise ArgumentError("homonuclear couplings need a dense basis")
    return basis


@dataclass
class _Engine:
    """Runs one program for a molecule over all passive branches with shared noise."""

    mol: Molecule
    field_cfg: FieldConfig
    basis: str
    init_phase: Optional[float]  # None -> start in |up...up>
    init_angle: float = np.pi / 2

    def run(self, program, noise, draws_x, draws_e, f_omega=0.0, f_phase=0.0, n_sub=1,
            use_numba=None):
        mol = self.mol
        G = mol.n_groups
        if self.basis == "spin_half":
            psi0, dz, weight, group = [], [], [], []
            spin0 = (
                np.array([1.0, 0.0], dtype=complex)
                if self.init_phase is None
                else _rotation_spinor(self.init_phase, self.init_angle)
            )
            shifts = mol.shifts_hz(self.field_cfg)
            for w, m_s in mol.passive_branches():
                off = mol.het_offsets_hz(m_s) if m_s else np.zeros(G)
                for k, g in enumerate(mol.groups):
                    psi0.append(spin0)
                    dz.append(2 * np.pi * (shifts[k] + off[k]))
                    weight.append(w * g.count)
                    group.append(k)
            _, rec, snap, filt = kernels.spin_half_program(
                np.array(psi0), np.array(dz), np.array(weight), np.array(group), G,
                program, noise, draws_x, draws_e, f_omega, f_phase, n_sub, use_numba,
            )
            return rec, snap, filt
        ops = group_operators(mol, "full" if self.basis == "full" else "collective")
        gx = np.array(ops.fx)
        gy = np.array(ops.fy)
        gz = np.array([np.real(np.diag(m)) for m in ops.fz])
        d = ops.dim
        up = np.zeros(d, dtype=complex)
        up[0] = 1.0
        total = None
        for w, m_s in mol.passive_branches():
            h0, fz, fx, fy = hamiltonian_parts(mol, self.field_cfg, ops, m_s)
            psi0 = up
            if self.init_phase is not None:
                gen = np.cos(self.init_phase) * fx - np.sin(self.init_phase) * fy
                psi0 = propagator(gen, self.init_angle) @ up
            _, rec, snap, filt = kernels.dense_program(
                psi0, h0, fz, fx, fy, gx, gy, gz, program, noise, draws_x, draws_e,
                f_omega, f_phase, n_sub, use_numba,
            )
            part = (w * rec, w * snap, w * filt)
            total = part if total is None else tuple(a + b for a, b in zip(total, part))
        return total


def _noise_tuple(noise: OUParams, drive_noise: Optional[DrivingNoiseParams]):
    if drive_noise is None:
        return (noise.sigma, noise.tau_c, 0.0, 1.0)
    return (noise.sigma, noise.tau_c, drive_noise.sigma_rel, drive_noise.tau_c)


def _draws(seed, n_steps):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n_steps + 1), rng.standard_normal(n_steps + 1), rng


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class Trace:
    """Single-trajectory time series with per-group components.

    ``total`` has shape ``(n_t,)``; ``groups`` has shape ``(G, n_t)``.
    """

    times: np.ndarray
    total: np.ndarray
    groups: np.ndarray

    def stacked(self) -> np.ndarray:
        """``(1 + G, n_t)`` array: total first, then groups."""
        return np.vstack([self.total[None, :], self.groups])


def _record_program(duration, dt, hx, hy):
    n = int(round(duration / dt))
    if n < 0:
        raise ArgumentError("duration must be non-negative")
    return {"n": [n], "h": [dt], "hx": [hx], "hy": [hy], "mode": [kernels.MODE_RECORD]}, n


def run_fid(mol: Molecule, field_cfg: FieldConfig, noise: OUParams, duration: float,
            dt: Optional[float] = None, seed: int = 0, basis: str = "auto",
            use_numba=None) -> Trace:
    """Free induction decay after a pi/2 trigger about ``x``.

    Returns ``sum_k n_k (<I_x> - i <I_y>)`` per group and in total, sampled
    every ``dt`` from ``t = 0`` (default step ``min(tau_c/10, 1/(50 f_max))``
    with ``f_max`` the largest shift).
    """
    basis = _choose_basis(mol, basis)
    if dt is None:
        f_max = float(np.max(np.abs(mol.shifts_hz(field_cfg)))) + sum(
            abs(p.j_het_hz) for p in mol.passives
        )
        dt = default_dt(noise.tau_c, f_max)
    program, n = _record_program(duration, dt, 0.0, 0.0)
    dx, de, _ = _draws(seed, n)
    rec, _, _ = _Engine(mol, field_cfg, basis, init_phase=0.0).run(
        program, _noise_tuple(noise, None), dx, de, use_numba=use_numba
    )
    m0 = np.array([[0.0, -g.count, 0.0] for g in mol.groups])  # -y after the trigger
    mags = np.concatenate([m0[None], rec], axis=0)  # (n_t, G, 3)
    groups = 0.5 * (mags[:, :, 0] - 1j * mags[:, :, 1]).T
    times = np.arange(n + 1) * dt
    return Trace(times, groups.sum(axis=0), groups)


def spin_lock_dt(noise: OUParams, omega1_hz: float, f_max_hz: float) -> float:
    """Default step, shortened so an integer number of steps spans ``1/omega1``."""
    period = 1.0 / omega1_hz
    dt0 = default_dt(noise.tau_c, f_max_hz)
    return period / int(np.ceil(period / dt0 - 1e-9))


def run_spin_lock(mol: Molecule, field_cfg: FieldConfig, noise: OUParams, omega1_hz: float,
                  duration: float, dt: Optional[float] = None, seed: int = 0,
                  phase: float = np.pi / 2, drive_noise: Optional[DrivingNoiseParams] = None,
                  basis: str = "auto", use_numba=None) -> Trace:
    """Continuous resonant drive with the magnetization locked along the drive axis.

    Returns ``sum_k n_k <I_e>`` with ``e`` the drive axis, per group and in
    total. The default step divides the drive period ``1/omega1`` exactly,
    so samples ``omega1 * t`` integer are stroboscopic.
    """
    if not omega1_hz > 0:
        raise ArgumentError("omega1_hz must be positive")
    basis = _choose_basis(mol, basis)
    shifts = mol.shifts_hz(field_cfg)
    f_max = float(np.max(generalized_rabi(np.abs(shifts) + sum(abs(p.j_het_hz) for p in mol.passives), omega1_hz)))
    if dt is None:
        dt = spin_lock_dt(noise, omega1_hz, f_max)
    w = 2 * np.pi * omega1_hz
    hx, hy = w * np.cos(phase), -w * np.sin(phase)
    program, n = _record_program(duration, dt, hx, hy)
    dx, de, _ = _draws(seed, n)
    # rotate |up> onto the drive axis: pi/2 about the axis perpendicular to it
    rec, _, _ = _Engine(mol, field_cfg, basis, init_phase=phase - np.pi / 2).run(
        program, _noise_tuple(noise, drive_noise), dx, de, use_numba=use_numba
    )
    e = np.array([np.cos(phase), -np.sin(phase), 0.0])
    m0 = np.array([g.count * e for g in mol.groups])
    mags = np.concatenate([m0[None], rec], axis=0)
    groups = 0.5 * (mags @ e).T
    times = np.arange(n + 1) * dt
    return Trace(times, groups.sum(axis=0), groups)


def _aeris_program(config: AerisConfig, h_max: float, n_sub_target: float):
    meas = config.measurement
    segs = config.encoding.segments()
    enc_parts = []
    for dur, w, ph in segs:
        n = max(1, int(np.ceil(dur / h_max - 1e-9)))
        enc_parts.append((n, dur / n, w * np.cos(ph), -w * np.sin(ph)))
    t2 = meas.duration
    n_m = max(1, int(np.ceil(t2 / h_max - 1e-9)))
    w2 = 2 * np.pi * meas.omega2_hz
    ph2 = config.measurement_phase
    mode_m = kernels.MODE_FILTER if config.readout == "filter" else kernels.MODE_SNAPSHOT
    mode_m += kernels.NO_DRIVE_NOISE
    meas_part = (n_m, t2 / n_m, w2 * np.cos(ph2), -w2 * np.sin(ph2))
    rows = []
    for _ in range(config.repetitions):
        for p in enc_parts:
            rows.append(p + (kernels.MODE_PLAIN,))
        rows.append(meas_part + (mode_m,))
    arr = list(zip(*rows))
    program = {"n": arr[0], "h": arr[1], "hx": arr[2], "hy": arr[3], "mode": arr[4]}
    n_sub = max(1, int(np.ceil((t2 / n_m) * n_sub_target - 1e-9)))
    return program, int(sum(arr[0])), n_sub


def run_aeris(mol: Molecule, field_cfg: FieldConfig, noise: OUParams, config: AerisConfig,
              dt: Optional[float] = None, seed: int = 0,
              drive_noise: Optional[DrivingNoiseParams] = None, basis: str = "auto",
              b_unit: float = B_UNIT, gamma_e: float = GAMMA_E, use_numba=None) -> NVReadout:
    """Simulate one trajectory of an AERIS experiment.

    Parameters
    ----------
    dt : float, optional
        Longest step over which the noise is frozen. Steps are exact
        exponentials, so ``dt`` only has to resolve the noise; the default
        is a tenth of the shortest noise correlation time. The filter readout
        samples ``B(t)`` fifty times per measurement Rabi period regardless.
    drive_noise : DrivingNoiseParams, optional
        Relative Rabi-amplitude noise of the encoding drive. The measurement
        drive runs at its nominal amplitude.
    """
    basis = _choose_basis(mol, basis)
    if dt is None:
        dt = noise.tau_c / 10
        if drive_noise is not None:
            dt = min(dt, drive_noise.tau_c / 10)
    program, n_steps, n_sub = _aeris_program(config, dt, 50 * config.measurement.omega2_hz)
    dx, de, rng = _draws(seed, n_steps)
    quad = config.quadrature
    # "cos" reads -M_z: sq = sign(sin(w t - pi/2)) = -sign(cos(w t))
    f_phase = 0.0 if quad == "sin" else -np.pi / 2
    f_omega = 2 * np.pi * config.measurement.omega2_hz
    init_phase = None
    if config.trigger:
        init_phase = config.encoding.phase if config.trigger_phase is None else config.trigger_phase
    _, snap, filt = _Engine(mol, field_cfg, basis, init_phase=init_phase).run(
        program, _noise_tuple(noise, drive_noise), dx, de, f_omega, f_phase, n_sub, use_numba
    )
    R = config.repetitions
    j = np.arange(1, R + 1)
    tau_enc = config.encoding.duration
    tau2 = config.measurement.duration
    times = j * tau_enc + (j - 1) * tau2
    decay = apply_t1_envelope(np.ones(R), times, config.t1_s)
    if config.readout == "analytic":
        ph = config.measurement_phase
        ax, ay = np.cos(ph), -np.sin(ph)
        if quad == "sin":
            comp = ax * snap[:, :, 1] - ay * snap[:, :, 0]
        else:
            comp = -snap[:, :, 2]
        groups = (2 * gamma_e * tau2 / np.pi) * b_unit * comp.T * decay
        raw = groups.sum(axis=0)
        if np.any(np.abs(raw) > 1):
            warnings.warn("analytic readout exceeds 1 and was clamped")
        values = np.clip(raw, -1, 1)
    else:
        groups = gamma_e * b_unit * filt.T * decay
        values = np.sin(groups.sum(axis=0))
    if config.readout_noise > 0:
        values = np.clip(values + config.readout_noise * rng.standard_normal(R), -1, 1)
    return NVReadout(values, times, j * tau_enc, groups)


def standard_tau1(delta_hz: float, omega1_hz: float, tau1: float) -> float:
    """Free-evolution time accumulating the same phase as ``tau1`` of locking.

    ``tau1* = tau1 * reduced_shift / delta`` (exact dressed shift).
    """
    from .molecule import reduced_shift

    if delta_hz == 0:
        raise ArgumentError("delta_hz must be non-zero")
    return tau1 * float(reduced_shift(delta_hz, omega1_hz)) / abs(delta_hz)


def standard_config(config: AerisConfig, tau1_s: float) -> AerisConfig:
    """Same protocol with free encoding of duration ``tau1_s``."""
    enc = EncodingStage("free", 0.0, config.encoding.phase, 1, tau1_s)
    return replace(config, encoding=enc)
