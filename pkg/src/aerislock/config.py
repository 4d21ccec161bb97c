"""INI experiment configuration with a strict schema.

Every section and key must be declared in :data:`SCHEMA`; unknown names,
malformed values and conflicting noise specifications are rejected with the
file name and line number. A parsed :class:`ExperimentConfig` serializes
back to canonical INI text (:meth:`ExperimentConfig.dumps`), which parses to
an equal configuration.

Molecule syntax (inline alternative to ``preset``)::

    [molecule]
    groups = 3@2.05, 3@3.662          # count@shift_ppm
    j_hom = 0-1@7.232                 # group_a-group_b@J_hz
    passives = 11.0@0/1/2             # J_het_hz@coupled groups; ';' separates spins
    tones_hz = 375, 400, 425          # single spins at the given offsets
"""

import configparser
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .molecule import FieldConfig, Molecule, PassiveSpin, SpinGroup, preset
from .noise import DrivingNoiseParams, OUParams, derive_sigma, derive_tau_c


def _float(text):
    return float(text)


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("expected a non-empty list")
        return [conv(t) for t in items]

    parse.is_list = True
    return parse


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return parse


def _str(text):
    return text.strip()


SCHEMA = {
    "experiment": {"command": _choice("fid", "spinlock", "aeris", "sensitivity", "robust"),
                   "description": _str},
    "molecule": {"preset": _str, "name": _str, "groups": _str, "j_hom": _str,
                 "passives": _str, "tones_hz": _list(_float)},
    "field": {"b0_tesla": _float},
    "noise": {"sigma_hz": _float, "tau_c_s": _float, "t2_star_s": _float,
              "d_nv_m": _float, "diffusion_m2s": _float},
    "drive_noise": {"sigma_rel": _float, "tau_c_s": _float},
    "fid": {"duration_s": _float, "dt_s": _float},
    "spinlock": {"omega1_hz": _list(_float), "duration_s": _float, "dt_s": _float,
                 "t1_s": _float},
    "aeris": {"variant": _choice("standard", "continuous", "robust"),
              "omega1_hz": _float, "n1": _int, "tau1_s": _float,
              "omega2_hz": _float, "tau2_s": _float, "n2": _int,
              "repetitions": _int, "t1_s": _float,
              "readout": _choice("analytic", "filter"),
              "quadrature": _choice("auto", "sin", "cos"),
              "measurement_phase_deg": _float, "trigger": _bool,
              "dt_s": _float, "readout_noise": _float, "reference": _bool},
    "sensitivity": {"omega1_hz": _list(_float), "t_overhead_s": _list(_float),
                    "sigma_hz": _list(_float), "repetitions": _list(_int),
                    "delta_hz": _float, "tau1_s": _float, "tau2_s": _float,
                    "t1_s": _float, "t1rho_s": _float, "t2_star_s": _float},
    "robust": {"sigma_rel": _list(_float), "tau_c_s": _float, "omega1_hz": _float,
               "repetitions": _int, "kinds": _list(_choice("free", "continuous", "robust"))},
    "ensemble": {"n_traj": _int, "master_seed": _int, "workers": _int},
    "analysis": {"zero_pad": _int, "window": _choice("none", "hann"),
                 "mode": _choice("modulus", "real", "power"), "fit_window_hz": _float},
    "output": {"dir": _str},
}

DEFAULTS = {
    "field": {"b0_tesla": 2.0},
    "fid": {"duration_s": 0.17},
    "spinlock": {"duration_s": 2.0, "omega1_hz": [1000.0]},
    "aeris": {"variant": "continuous", "omega1_hz": 1000.0, "n1": 1, "omega2_hz": 200e3,
              "tau2_s": 50e-6, "repetitions": 1000, "t1_s": 1.5, "readout": "analytic",
              "quadrature": "auto", "trigger": True, "readout_noise": 0.0,
              "reference": True},
    "sensitivity": {"omega1_hz": [1000.0], "t_overhead_s": [0.0], "delta_hz": 311.8,
                    "tau1_s": 1e-3, "tau2_s": 50e-6, "t1_s": 1.5, "repetitions": [1000]},
    "robust": {"sigma_rel": [0.0024, 0.01, 0.02], "tau_c_s": 1e-3, "omega1_hz": 1000.0,
               "repetitions": 1000, "kinds": ["free", "continuous", "robust"]},
    "ensemble": {"n_traj": 1000, "master_seed": 0, "workers": 1},
    "analysis": {"zero_pad": 4, "window": "none", "mode": "real", "fit_window_hz": 3.0},
}

FULL_N_TRAJ = 10_000


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _line_index(text: str):
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    index, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index.setdefault((section, None), n)
        elif section is not None and ("=" in line or ":" in line):
            key = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            index.setdefault((section, key), n)
    return index


@dataclass
class ExperimentConfig:
    """Validated configuration; ``values[section][key]`` holds typed values."""

    values: dict
    source: str = "<string>"
    lines: dict = field(default_factory=dict)

    # -- access ----------------------------------------------------------
    def get(self, section: str, key: str, default=None):
        sec = self.values.get(section, {})
        if key in sec:
            return sec[key]
        return DEFAULTS.get(section, {}).get(key, default)

    def has(self, section: str, key: Optional[str] = None) -> bool:
        if key is None:
            return section in self.values
        return key in self.values.get(section, {})

    def _err(self, section, key, message):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        where = f"{self.source}:{line}" if line else self.source
        return ConfigurationError(f"{where}: [{section}] {key or ''}: {message}".replace(" : ", ": "))

    # -- serialization ---------------------------------------------------
    def dumps(self) -> str:
        out = []
        for section in SCHEMA:
            if section not in self.values:
                continue
            out.append(f"[{section}]")
            for key in SCHEMA[section]:
                if key in self.values[section]:
                    out.append(f"{key} = {_fmt(self.values[section][key])}")
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def with_value(self, section: str, key: str, value) -> "ExperimentConfig":
        vals = {s: dict(kv) for s, kv in self.values.items()}
        vals.setdefault(section, {})[key] = value
        return ExperimentConfig(vals, self.source, self.lines)

    # -- physics objects ---------------------------------------------------
    def field_config(self) -> FieldConfig:
        return FieldConfig(b0=self.get("field", "b0_tesla"))

    def molecule(self) -> Molecule:
        sec = self.values.get("molecule", {})
        used = [k for k in ("preset", "groups", "tones_hz") if k in sec]
        if len(used) != 1:
            raise self._err("molecule", None, "give exactly one of preset, groups, tones_hz")
        if "preset" in sec:
            extra = set(sec) - {"preset"}
            if extra:
                raise self._err("molecule", sorted(extra)[0], "not allowed together with preset")
            try:
                return preset(sec["preset"])
            except ConfigurationError as exc:
                raise self._err("molecule", "preset", str(exc)) from None
        name = sec.get("name", "custom")
        if "tones_hz" in sec:
            hz = self.field_config().hz_per_ppm
            return Molecule(name, tuple(SpinGroup(1, f / hz) for f in sec["tones_hz"]))
        try:
            groups = []
            for item in sec["groups"].split(","):
                count, ppm = item.split("@")
                groups.append(SpinGroup(int(count), float(ppm)))
        except ValueError:
            raise self._err("molecule", "groups", "expected count@ppm, ...") from None
        j_hom = None
        if "j_hom" in sec:
            j_hom = np.zeros((len(groups), len(groups)))
            try:
                for item in sec["j_hom"].split(","):
                    pair, j = item.split("@")
                    a, b = (int(x) for x in pair.split("-"))
                    j_hom[a, b] = j_hom[b, a] = float(j)
            except (ValueError, IndexError):
                raise self._err("molecule", "j_hom", "expected a-b@J_hz, ...") from None
        passives = []
        if "passives" in sec:
            try:
                for item in sec["passives"].split(";"):
                    j, targets = item.split("@")
                    passives.append(PassiveSpin(float(j), tuple(int(t) for t in targets.split("/"))))
            except (ValueError, IndexError):
                raise self._err("molecule", "passives", "expected J_hz@g/g/...; ...") from None
        try:
            return Molecule(name, tuple(groups), j_hom, tuple(passives))
        except (ConfigurationError, ValueError) as exc:
            raise self._err("molecule", None, str(exc)) from None

    def noise(self, sigma_hz: Optional[float] = None) -> OUParams:
        """Dephasing noise from exactly one of the three specification paths."""
        sec = self.values.get("noise", {})
        keys = set(sec)
        if sigma_hz is not None:
            keys = (keys - {"t2_star_s"}) | {"sigma_hz"}
            sec = dict(sec, sigma_hz=sigma_hz)
        paths = [
            ({"sigma_hz", "tau_c_s"}, "direct"),
            ({"t2_star_s", "tau_c_s"}, "derived"),
            ({"d_nv_m", "diffusion_m2s", "t2_star_s"}, "diffusion"),
        ]
        match = [p for keyset, p in paths if keyset == keys]
        if len(match) != 1:
            raise self._err(
                "noise", None,
                "specify exactly one of {sigma_hz, tau_c_s}, {t2_star_s, tau_c_s} "
                "or {d_nv_m, diffusion_m2s, t2_star_s}",
            )
        try:
            if match[0] == "direct":
                return OUParams.from_hz(sec["sigma_hz"], sec["tau_c_s"])
            if match[0] == "derived":
                return OUParams(derive_sigma(sec["t2_star_s"], sec["tau_c_s"]), sec["tau_c_s"])
            tau_c = derive_tau_c(sec["d_nv_m"], sec["diffusion_m2s"])
            return OUParams(derive_sigma(sec["t2_star_s"], tau_c), tau_c)
        except ValueError as exc:
            raise self._err("noise", None, str(exc)) from None

    def drive_noise(self) -> Optional[DrivingNoiseParams]:
        sec = self.values.get("drive_noise")
        if not sec:
            return None
        if set(sec) != {"sigma_rel", "tau_c_s"}:
            raise self._err("drive_noise", None, "needs sigma_rel and tau_c_s")
        try:
            return DrivingNoiseParams(sec["sigma_rel"], sec["tau_c_s"])
        except ValueError as exc:
            raise self._err("drive_noise", None, str(exc)) from None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and type-check INI text."""
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    lines = _line_index(text)
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            where = lines.get((section, None))
            raise ConfigurationError(f"{source}:{where}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            where = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"{source}:{where}: unknown key '{key}' in [{section}]")
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigurationError(
                    f"{source}:{where}: [{section}] {key} = {raw!r}: {exc}"
                ) from None
    cfg = ExperimentConfig(values, source, lines)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    if cfg.has("molecule"):
        cfg.molecule()
    if cfg.has("noise"):
        cfg.noise()
    cfg.drive_noise()
    for section, key in (("ensemble", "n_traj"), ("ensemble", "workers"),
                         ("aeris", "repetitions"), ("analysis", "zero_pad")):
        if cfg.has(section, key) and cfg.get(section, key) < 1:
            raise cfg._err(section, key, "must be >= 1")
    for section, keys in SCHEMA.items():
        for key in keys:
            if cfg.has(section, key) and (key.endswith("_s") or key.endswith("_hz")):
                v = cfg.get(section, key)
                for x in v if isinstance(v, list) else [v]:
                    if x < 0 or not np.isfinite(x) and not key.startswith("t1"):
                        raise cfg._err(section, key, "must be finite and non-negative")


def load_config(path_or_name: str) -> ExperimentConfig:
    """Read a config file, or a packaged preset by name (e.g. ``fig2a``)."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"), str(path))
    name = path_or_name if path_or_name.endswith(".cfg") else path_or_name + ".cfg"
    ref = resources.files("aerislock").joinpath("configs", name)
    if ref.is_file():
        return parse_config(ref.read_text(encoding="utf-8"), f"preset:{name}")
    raise ConfigurationError(f"no config file or preset named {path_or_name!r}")


def preset_names():
    root = resources.files("aerislock").joinpath("configs")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))
