"""Command-line front end.

``aerislock <command> --config <file-or-preset> [--seed N] [--trajectories N]
[--workers N] [--out DIR] [--full]``

Commands: ``fid``, ``spinlock``, ``aeris``, ``sensitivity``, ``robust`` and
``sweep``. Every run writes plot-ready CSV files, ``fits.json``, the
effective configuration (``config.resolved.cfg``) and ``manifest.json``.
Exit codes: 0 success, 2 configuration error, 3 fit failure.
"""

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import analysis as an
from . import kernels
from .config import FULL_N_TRAJ, SCHEMA, ExperimentConfig, load_config
from .ensemble import (
    AerisExperiment,
    EnsembleSpec,
    FidExperiment,
    SpinLockExperiment,
    simulate_ensemble,
)
from .errors import ArgumentError, ConfigurationError, FitError
from .molecule import reduced_shift, robust_shift_exact, third_order_shift
from .noise import DrivingNoiseParams, OUParams
from .protocol import (
    AerisConfig,
    EncodingStage,
    MeasurementStage,
    apply_t1_envelope,
    standard_tau1,
)

EXIT_OK, EXIT_CONFIG, EXIT_FIT = 0, 2, 3


# ---------------------------------------------------------------------------
# output helpers


def _num(x):
    """CSV/JSON cell: shortest round-trip repr, ``inf``/``nan`` spelled out."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else ("-inf" if x < 0 else "nan"))


class _Run:
    """Collects outputs of one command invocation."""

    def __init__(self, out_dir: Path):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, header, rows):
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([c if isinstance(c, str) else _num(c) for c in row])
        self.files.append(name)

    def json(self, name, payload):
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.files.append(name)

    def text(self, name, text):
        (self.out / name).write_text(text, encoding="utf-8")
        self.files.append(name)


def _ensemble(cfg: ExperimentConfig, experiment, n_traj=None):
    spec = EnsembleSpec(n_traj or cfg.get("ensemble", "n_traj"),
                        cfg.get("ensemble", "master_seed"), experiment)
    return simulate_ensemble(spec, cfg.get("ensemble", "workers"))


def _fit_record(fit: an.LorentzianFit, hz_per_ppm, dressed=None, shift=None):
    rec = {
        "center_hz": fit.center,
        "fwhm_hz": fit.fwhm,
        "fwhm_ppm": fit.fwhm / hz_per_ppm,
        "amplitude": fit.amplitude,
        "residual": fit.residual,
    }
    if dressed is not None:
        rec["dressed_hz"] = dressed
    if shift is not None:
        rec["shift_hz"] = shift
        rec["center_ppm"] = shift / hz_per_ppm
        if dressed is not None and shift > 0:
            rec["fwhm_mapped_ppm"] = fit.fwhm * dressed / shift / hz_per_ppm
    return {k: _json_num(v) for k, v in rec.items()}


def _decay_record(fit_fn):
    """Run a decay fit; non-decaying input is reported as ``t_decay_s = inf``."""
    try:
        fit = fit_fn()
    except FitError as exc:
        if exc.diagnostics.get("t_decay") == np.inf:
            return {"t_decay_s": "inf", "non_decaying": True}
        raise
    return {"t_decay_s": fit.t_decay, "amplitude": fit.amplitude, "residual": fit.residual,
            "n_points": fit.n_points, "non_decaying": False}


# ---------------------------------------------------------------------------
# fid


def cmd_fid(cfg: ExperimentConfig, run: _Run) -> dict:
    mol, fld, noise = cfg.molecule(), cfg.field_config(), cfg.noise()
    duration = cfg.get("fid", "duration_s")
    ts = _ensemble(cfg, FidExperiment(mol, fld, noise, duration, cfg.get("fid", "dt_s")))
    run.csv("timeseries.csv", ["t_s", "signal_re", "signal_im", "signal_abs", "stderr"],
            zip(ts.times, ts.values.real, ts.values.imag, np.abs(ts.values), ts.stderr))
    # the signal rotates as exp(-i delta t); conjugate to put lines at +delta
    spec = an.fft_spectrum(times=ts.times, values=np.conj(ts.values),
                           zero_pad_factor=cfg.get("analysis", "zero_pad"),
                           window=cfg.get("analysis", "window"), mode="modulus")
    hz = fld.hz_per_ppm
    run.csv("spectrum.csv", ["freq_hz", "freq_ppm", "amplitude"],
            zip(spec.freqs, spec.freqs / hz, spec.amplitudes))
    # past a few tau_c the envelope is exp(-(t - tau_c)/T2*); fit two T2* of that regime
    t_max = min(duration, 3 * noise.tau_c + 2 * noise.t2_star)
    t_min = min(3 * noise.tau_c, 0.25 * t_max)
    groups = []
    for k in range(mol.n_groups):
        rec = _decay_record(lambda k=k: an.fit_exp_decay(ts.times, ts.components[k], "envelope",
                                                          t_min=t_min, t_max=t_max))
        groups.append(dict(group=k, **rec))
    lines = []
    if np.isfinite(noise.t2_star):
        for k, d in enumerate(mol.shifts_hz(fld)):
            fit = an.fit_lorentzian(spec, d, cfg.get("analysis", "fit_window_hz") * 10)
            lines.append(dict(group=k, **_fit_record(fit, hz, shift=fit.center)))
    summary = {"command": "fid", "t_decay_s": groups[0]["t_decay_s"], "groups": groups,
               "lines": lines, "t2_star_closed_form_s": _json_num(noise.t2_star),
               "fit_window_s": [t_min, _json_num(t_max)]}
    run.json("fits.json", summary)
    return summary


# ---------------------------------------------------------------------------
# spin lock


def spinlock_fits(ts, mol, omega1_hz, t1_s):
    """Per-group stroboscopic T1rho fits, with and without the T1 channel."""
    period = 1.0 / omega1_hz
    out = []
    for k in range(mol.n_groups):
        rec = _decay_record(lambda k=k: an.fit_exp_decay(ts.times, ts.components[k],
                                                          "stroboscopic", period=period))
        eff = _decay_record(lambda k=k: an.fit_exp_decay(
            ts.times, apply_t1_envelope(ts.components[k], ts.times, t1_s), "stroboscopic",
            period=period))
        out.append({"group": k, "t1rho_s": rec["t_decay_s"], "t1rho_eff_s": eff["t_decay_s"]})
    return out


def _headline(values):
    finite = [v for v in values if v != "inf"]
    return min(finite) if finite else "inf"


def cmd_spinlock(cfg: ExperimentConfig, run: _Run) -> dict:
    mol, fld, noise = cfg.molecule(), cfg.field_config(), cfg.noise()
    omegas = cfg.get("spinlock", "omega1_hz")
    t1 = cfg.get("spinlock", "t1_s", 1.5)
    rows, results = [], []
    for w1 in omegas:
        exp = SpinLockExperiment(mol, fld, noise, w1, cfg.get("spinlock", "duration_s"),
                                 cfg.get("spinlock", "dt_s"), drive_noise=cfg.drive_noise())
        ts = _ensemble(cfg, exp)
        name = "timeseries.csv" if len(omegas) == 1 else f"timeseries_omega1_{w1:g}.csv"
        header = ["t_s", "locked", "stderr"] + [f"group{k}" for k in range(mol.n_groups)]
        run.csv(name, header, zip(ts.times, ts.values, ts.stderr, *ts.components))
        groups = spinlock_fits(ts, mol, w1, t1)
        head = _headline([g["t1rho_s"] for g in groups])
        head_eff = _headline([g["t1rho_eff_s"] for g in groups])
        estimate = min(an.t1rho_estimate(noise.sigma, noise.tau_c, d, w1)
                       for d in mol.shifts_hz(fld))
        rows.append([w1, head if head != "inf" else np.inf,
                     head_eff if head_eff != "inf" else np.inf, estimate, noise.t2_star])
        results.append({"omega1_hz": w1, "t1rho_s": head, "t1rho_eff_s": head_eff,
                        "t1rho_estimate_s": _json_num(estimate), "groups": groups})
    run.csv("t1rho.csv", ["omega1_hz", "t1rho_s", "t1rho_eff_s", "t1rho_estimate_s",
                          "t2_star_closed_form_s"], rows)
    summary = {"command": "spinlock", "t1_s": t1, "runs": results,
               "t1rho_s": results[0]["t1rho_s"]}
    run.json("fits.json", summary)
    return summary


# ---------------------------------------------------------------------------
# AERIS


def aeris_config(cfg: ExperimentConfig, mol, fld, variant=None, tau1_s=None) -> AerisConfig:
    """Protocol object for the ``[aeris]`` section (``variant`` overrides)."""
    variant = variant or cfg.get("aeris", "variant")
    w1 = cfg.get("aeris", "omega1_hz")
    if variant == "standard":
        if tau1_s is None:
            tau1_s = cfg.get("aeris", "tau1_s")
        if tau1_s is None:
            tau1_s = standard_tau1(float(np.max(np.abs(mol.shifts_hz(fld)))), w1, cfg.get("aeris", "n1") / w1)
        enc = EncodingStage("free", 0.0, np.pi / 2, 1, tau1_s)
    else:
        enc = EncodingStage(variant, w1, np.pi / 2, cfg.get("aeris", "n1"),
                            cfg.get("aeris", "tau1_s") if variant == "continuous" else None)
    phase = cfg.get("aeris", "measurement_phase_deg")
    meas = MeasurementStage(cfg.get("aeris", "omega2_hz"), cfg.get("aeris", "n2"),
                            cfg.get("aeris", "tau2_s"),
                            None if phase is None else np.deg2rad(phase),
                            cfg.get("aeris", "quadrature"))
    return AerisConfig(enc, meas, cfg.get("aeris", "repetitions"), cfg.get("aeris", "t1_s"),
                       cfg.get("aeris", "readout"), cfg.get("aeris", "trigger"), None,
                       cfg.get("aeris", "readout_noise"))


def expected_lines(mol, fld, config: AerisConfig):
    """Closed-form raw spectral positions (Hz) of every resolved line, or None.

    Homonuclear-coupled molecules have no closed form here and return None.
    """
    if mol.is_coupled:
        return None
    enc = config.encoding
    shifts = mol.shifts_hz(fld)
    lines = []
    for _, m_s in mol.passive_branches():
        off = mol.het_offsets_hz(m_s) if m_s else np.zeros(mol.n_groups)
        for k in range(mol.n_groups):
            d = abs(shifts[k] + off[k])
            if enc.kind == "free":
                f = d
            elif enc.kind == "continuous":
                f = float(reduced_shift(d, enc.omega1_hz))
            else:
                f = robust_shift_exact(d, enc.omega1_hz)
            lines.append((k, f))
    out = []
    for k, f in sorted(lines, key=lambda x: x[1]):
        if not any(abs(f - g) < 1e-9 for _, g in out):
            out.append((k, f))
    return out


def _clusters(centers, gap):
    groups, cur = [], [centers[0]]
    for c in centers[1:]:
        if c - cur[-1] < gap:
            cur.append(c)
        else:
            groups.append(cur)
            cur = [c]
    groups.append(cur)
    return groups


def fit_aeris_lines(spec, mol, fld, config: AerisConfig, window_hz):
    """Fit every expected line (or the tallest peaks for coupled molecules).

    The fit half-window is at least six spectral bins.
    """
    window_hz = max(window_hz, 6 * spec.bin_width)
    exp = expected_lines(mol, fld, config)
    if exp is None:
        centers = an.find_peaks(spec, 2 * mol.n_groups, spec.bin_width,
                                min_separation_hz=2 * spec.bin_width)
        return [an.fit_lorentzian(spec, c, window_hz / 2) for c in centers], [None] * len(centers)
    centers = [f for _, f in exp]
    fits = []
    for cl in _clusters(centers, 2 * window_hz):
        fits += an.fit_lorentzians(spec, cl, window_hz)
    return fits, centers


def _axes(freqs, config: AerisConfig):
    """Dressed and shift axes for raw spectral frequencies."""
    enc = config.encoding
    if enc.kind == "continuous":
        dressed = freqs + enc.omega1_hz
        shift = np.sqrt(np.maximum(dressed**2 - enc.omega1_hz**2, 0.0))
        return dressed, shift
    if enc.kind == "free":
        return freqs, freqs
    return freqs, np.full(freqs.shape, np.nan)


def run_aeris_analysis(cfg, mol, fld, noise, config: AerisConfig, drive_noise=None, n_traj=None):
    """Ensemble, spectrum and line fits for one AERIS variant."""
    ts = _ensemble(cfg, AerisExperiment(mol, fld, noise, config, cfg.get("aeris", "dt_s"),
                                        drive_noise), n_traj)
    spec = an.fft_spectrum(ts, cfg.get("analysis", "zero_pad"), cfg.get("analysis", "window"),
                           cfg.get("analysis", "mode"))
    fits, centers = fit_aeris_lines(spec, mol, fld, config, cfg.get("analysis", "fit_window_hz"))
    return ts, spec, fits, centers


def cmd_aeris(cfg: ExperimentConfig, run: _Run) -> dict:
    mol, fld, noise = cfg.molecule(), cfg.field_config(), cfg.noise()
    config = aeris_config(cfg, mol, fld)
    ts, spec, fits, centers = run_aeris_analysis(cfg, mol, fld, noise, config, cfg.drive_noise())
    hz = fld.hz_per_ppm
    run.csv("readout.csv", ["j", "encoding_time_s", "sigma_y", "stderr"],
            zip(range(1, ts.times.size + 1), ts.times, ts.values, ts.stderr))
    ref = None
    if cfg.get("aeris", "reference") and config.encoding.kind != "free":
        std = aeris_config(cfg, mol, fld, "standard")
        _, ref_spec, ref_fits, _ = run_aeris_analysis(cfg, mol, fld, noise, std)
        ref = {"tau1_s": std.encoding.duration,
               "peak_amplitude": float(np.max(ref_spec.amplitudes)),
               "line_amplitudes": [f.amplitude for f in ref_fits]}
        norm = ref["peak_amplitude"]
    else:
        norm = float(np.max(spec.amplitudes))
    dressed, shift = _axes(spec.freqs, config)
    run.csv("spectrum.csv", ["freq_hz", "dressed_hz", "shift_hz", "freq_ppm", "amplitude",
                             "amplitude_rel"],
            zip(spec.freqs, dressed, shift, shift / hz, spec.amplitudes, spec.amplitudes / norm))
    lines = []
    for i, fit in enumerate(fits):
        d, s = _axes(np.array([fit.center]), config)
        rec = _fit_record(fit, hz, float(d[0]), None if np.isnan(s[0]) else float(s[0]))
        rec["expected_hz"] = centers[i]
        if ref is not None and len(ref["line_amplitudes"]) == len(fits):
            rec["amplitude_ratio"] = fit.amplitude / ref["line_amplitudes"][i]
        lines.append(rec)
    summary = {"command": "aeris", "variant": cfg.get("aeris", "variant"),
               "tau1_s": config.encoding.duration, "lines": lines, "reference": ref,
               "normalization": "amplitude_rel = amplitude / tallest standard-protocol peak"}
    run.json("fits.json", summary)
    return summary


# ---------------------------------------------------------------------------
# sensitivity


def cmd_sensitivity(cfg: ExperimentConfig, run: _Run) -> dict:
    sec = "sensitivity"
    base_noise = cfg.noise() if cfg.has("noise") else None
    sigmas = cfg.get(sec, "sigma_hz") or [None]
    reps = cfg.get(sec, "repetitions")
    if len(reps) not in (1, len(sigmas)):
        raise cfg._err(sec, "repetitions", "give one value or one per sigma_hz entry")
    reps = reps * len(sigmas) if len(reps) == 1 else reps
    delta, tau1, tau2, t1 = (cfg.get(sec, k) for k in ("delta_hz", "tau1_s", "tau2_s", "t1_s"))
    rows, table = [], []
    for sig, R in zip(sigmas, reps):
        noise = cfg.noise(sig) if sig is not None else base_noise
        t2s = cfg.get(sec, "t2_star_s") or (noise.t2_star if noise is not None else None)
        if t2s is None:
            raise cfg._err(sec, "t2_star_s", "needed when no [noise] section is given")
        for w1 in cfg.get(sec, "omega1_hz"):
            t1rho = cfg.get(sec, "t1rho_s")
            if t1rho is None:
                if noise is None:
                    raise cfg._err(sec, "t1rho_s", "needed when no [noise] section is given")
                t1rho = an.t1rho_estimate(noise.sigma, noise.tau_c, delta, w1)
            t1rho_eff = an.effective_t1rho(t1, t1rho)
            for t_o in cfg.get(sec, "t_overhead_s"):
                common = dict(t1=t1, t2_star=t2s, tau1=tau1, tau2=tau2, R=R, delta_hz=delta,
                              omega1_hz=w1, t_overhead=t_o)
                r1 = an.sensitivity_ratio(an.SensitivityInputs(t_enc_decay=t1rho, **common))
                r2 = an.sensitivity_ratio(an.SensitivityInputs(t_enc_decay=t1rho_eff, **common))
                ts = an.tau1_star(tau1, delta, w1) if w1 > 0 else tau1
                rows.append([sig if sig is not None else "", R, w1, t_o, t2s, t1rho, t1rho_eff,
                             ts, r1, r2])
                table.append({"sigma_hz": sig, "R": R, "omega1_hz": w1, "t_overhead_s": t_o,
                              "ratio_t1rho": r1, "ratio_t1rho_eff": r2})
    run.csv("sensitivity.csv", ["sigma_hz", "repetitions", "omega1_hz", "t_overhead_s",
                                "t2_star_s", "t1rho_s", "t1rho_eff_s", "tau1_star_s",
                                "ratio_t1rho", "ratio_t1rho_eff"], rows)
    summary = {"command": "sensitivity", "rows": table, "ratio_t1rho": table[0]["ratio_t1rho"]}
    run.json("fits.json", summary)
    return summary


# ---------------------------------------------------------------------------
# robust encoding under drive noise


def _peak_near(spec, f, half_width):
    sel = np.abs(spec.freqs - f) <= half_width
    i = np.flatnonzero(sel)[np.argmax(spec.amplitudes[sel])]
    return float(spec.freqs[i]), float(spec.amplitudes[i])


def cmd_robust(cfg: ExperimentConfig, run: _Run) -> dict:
    mol, fld = cfg.molecule(), cfg.field_config()
    noise = cfg.noise() if cfg.has("noise") else OUParams(0.0, 1e-3)
    sec = "robust"
    w1, R, tau_e = cfg.get(sec, "omega1_hz"), cfg.get(sec, "repetitions"), cfg.get(sec, "tau_c_s")
    mid = float(np.median(np.abs(mol.shifts_hz(fld))))
    base = cfg.with_value("aeris", "omega1_hz", w1).with_value("aeris", "repetitions", R)
    window = cfg.get("analysis", "fit_window_hz")
    rows, results = [], []
    for sig in [0.0] + [s for s in cfg.get(sec, "sigma_rel") if s > 0]:
        dn = DrivingNoiseParams(sig, tau_e) if sig > 0 else None
        for kind in cfg.get(sec, "kinds"):
            variant = "standard" if kind == "free" else kind
            tau1 = standard_tau1(mid, w1, 1.0 / w1) if kind == "free" else None
            config = aeris_config(base, mol, fld, variant, tau1)
            ts = _ensemble(base, AerisExperiment(mol, fld, noise, config,
                                                 base.get("aeris", "dt_s"), dn))
            spec = an.fft_spectrum(ts, base.get("analysis", "zero_pad"),
                                   base.get("analysis", "window"), "modulus")
            run.csv(f"spectrum_{kind}_sigma{sig:g}.csv", ["freq_hz", "amplitude"],
                    zip(spec.freqs, spec.amplitudes))
            for k, f in expected_lines(mol, fld, config):
                pf, pa = _peak_near(spec, f, window)
                rows.append([sig, kind, k, f, pf, pa])
                results.append({"sigma_rel": sig, "kind": kind, "group": k, "expected_hz": f,
                                "peak_hz": pf, "peak_amplitude": pa})
    run.csv("robust.csv", ["sigma_rel", "kind", "group", "expected_hz", "peak_hz",
                           "peak_amplitude"], rows)
    summary = {"command": "robust", "rows": results,
               "third_order_hz": [float(third_order_shift(d, w1))
                                  for d in np.abs(mol.shifts_hz(fld))]}
    run.json("fits.json", summary)
    return summary


COMMANDS = {
    "fid": cmd_fid,
    "spinlock": cmd_spinlock,
    "aeris": cmd_aeris,
    "sensitivity": cmd_sensitivity,
    "robust": cmd_robust,
}


# ---------------------------------------------------------------------------
# sweep


def _typed(section, key, text):
    conv = SCHEMA.get(section, {}).get(key)
    if conv is None:
        raise ConfigurationError(f"unknown sweep parameter {section}.{key}")
    try:
        return conv(text)
    except ValueError as exc:
        raise ConfigurationError(f"sweep value {text!r} for {section}.{key}: {exc}") from None


def cmd_sweep(cfg: ExperimentConfig, run: _Run, param: str, values) -> dict:
    command = cfg.get("experiment", "command")
    if command is None:
        raise ConfigurationError("sweep needs [experiment] command in the config")
    if "." not in param:
        raise ConfigurationError("sweep parameter must be section.key")
    section, key = param.split(".", 1)
    rows, results = [], []
    for i, text in enumerate(values):
        sub = cfg.with_value(section, key, _typed(section, key, text))
        sub_run = _Run(run.out / f"point_{i:03d}")
        summary = COMMANDS[command](sub, sub_run)
        sub_run.text("config.resolved.cfg", sub.dumps())
        run.files += [f"point_{i:03d}/{f}" for f in sub_run.files]
        head = next((summary[k] for k in ("t_decay_s", "t1rho_s", "ratio_t1rho")
                     if k in summary), "")
        rows.append([text, str(head)])
        results.append({"value": text, "headline": head})
    run.csv("sweep.csv", [param, "headline"], rows)
    summary = {"command": "sweep", "parameter": param, "base_command": command,
               "points": results}
    run.json("fits.json", summary)
    return summary


# ---------------------------------------------------------------------------
# entry point


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="config file or preset name")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--trajectories", type=int, help="number of trajectories")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--full", action="store_true",
                        help=f"use {FULL_N_TRAJ} trajectories (figure quality)")
    p = argparse.ArgumentParser(prog="aerislock", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "spinlock":
            sp.add_argument("--sweep", help="omega1=v1,v2,... (Hz)")
    sw = sub.add_parser("sweep", parents=[common])
    sw.add_argument("--param", required=True, help="section.key to vary")
    sw.add_argument("--values", required=True, help="comma-separated values")
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.full:
        cfg = cfg.with_value("ensemble", "n_traj", FULL_N_TRAJ)
    if args.trajectories is not None:
        if args.trajectories < 1:
            raise ConfigurationError("--trajectories must be >= 1")
        cfg = cfg.with_value("ensemble", "n_traj", args.trajectories)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigurationError("--seed must be non-negative")
        cfg = cfg.with_value("ensemble", "master_seed", args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        cfg = cfg.with_value("ensemble", "workers", args.workers)
    if getattr(args, "sweep", None):
        key, _, vals = args.sweep.partition("=")
        if key.strip() != "omega1" or not vals:
            raise ConfigurationError("--sweep expects omega1=v1,v2,...")
        cfg = cfg.with_value("spinlock", "omega1_hz", _typed("spinlock", "omega1_hz", vals))
    return cfg


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parser().parse_args(argv)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        out = Path(args.out or cfg.get("output", "dir") or f"out_{args.command}")
        run = _Run(out)
        if args.command == "sweep":
            cmd_sweep(cfg, run, args.param, [v.strip() for v in args.values.split(",") if v.strip()])
        else:
            COMMANDS[args.command](cfg, run)
    except (ConfigurationError, ArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit failed: {exc} {json.dumps(exc.diagnostics, default=str)}", file=sys.stderr)
        return EXIT_FIT
    run.text("config.resolved.cfg", cfg.dumps())
    manifest = {
        "command": args.command,
        "argv": argv,
        "config_source": cfg.source,
        "config_sha256": cfg.digest(),
        "code_version": _version(),
        "backend": kernels.BACKEND,
        "seed": cfg.get("ensemble", "master_seed"),
        "n_traj": cfg.get("ensemble", "n_traj"),
        "workers": cfg.get("ensemble", "workers"),
        "started_utc": started,
        "finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": run.files + ["manifest.json"],
    }
    run.json("manifest.json", manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
