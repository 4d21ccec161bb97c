"""Ornstein-Uhlenbeck dephasing noise and related closed forms.

The noise ``xi(t)`` is a stationary Gaussian process with
``<xi(t) xi(t')> = sigma**2 exp(-|t - t'| / tau_c)``. It is generated with the
exact one-step update

    xi_{j+1} = xi_j exp(-dt/tau_c) + sigma * N_j * sqrt(1 - exp(-2 dt/tau_c)),

which is distributionally exact for any step ``dt``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class OUParams:
    """Dephasing noise strength ``sigma`` (rad/s) and correlation time ``tau_c`` (s)."""

    sigma: float
    tau_c: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ArgumentError(f"sigma must be >= 0, got {self.sigma}")
        if not self.tau_c > 0:
            raise ArgumentError(f"tau_c must be > 0, got {self.tau_c}")

    @classmethod
    def from_hz(cls, sigma_hz: float, tau_c: float) -> "OUParams":
        return cls(2 * np.pi * sigma_hz, tau_c)

    @property
    def t2_star(self) -> float:
        """Markovian dephasing time ``1 / (sigma**2 tau_c)``; ``inf`` when sigma = 0."""
        rate = self.sigma**2 * self.tau_c
        return np.inf if rate == 0 else 1.0 / rate


@dataclass(frozen=True)
class DrivingNoiseParams:
    """Relative Rabi-amplitude noise: ``Omega_1(t) = Omega_1 (1 + eps(t))``."""

    sigma_rel: float
    tau_c: float

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ArgumentError(f"sigma_rel must be >= 0, got {self.sigma_rel}")
        if not self.tau_c > 0:
            raise ArgumentError(f"tau_c must be > 0, got {self.tau_c}")


@dataclass(frozen=True)
class OUTrajectory:
    dt: float
    samples: np.ndarray


def ou_step(xi: float, params: OUParams, dt: float, gaussian_draw: float) -> float:
    """Advance one exact OU step of length ``dt``."""
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    a = np.exp(-dt / params.tau_c)
    return xi * a + params.sigma * gaussian_draw * np.sqrt(-np.expm1(-2 * dt / params.tau_c))


def ou_path(x0: float, sigma: float, tau_c: float, dts: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Vectorized exact OU recursion; returns ``len(dts) + 1`` samples starting at ``x0``."""
    a = np.exp(-np.asarray(dts) / tau_c)
    b = sigma * np.sqrt(-np.expm1(-2 * np.asarray(dts) / tau_c))
    out = np.empty(len(a) + 1)
    out[0] = x0
    x = x0
    for j in range(len(a)):
        x = x * a[j] + b[j] * draws[j]
        out[j + 1] = x
    return out


def ou_trajectory(params: OUParams, duration: float, dt: float, seed: int) -> OUTrajectory:
    """Sample ``ceil(duration/dt) + 1`` points of a stationary OU path."""
    if not duration > 0:
        raise ArgumentError(f"duration must be positive, got {duration}")
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    n = int(np.ceil(duration / dt - 1e-9))
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal(n + 1)
    x0 = params.sigma * draws[0]
    samples = ou_path(x0, params.sigma, params.tau_c, np.full(n, dt), draws[1:])
    return OUTrajectory(dt=dt, samples=samples)


def derive_tau_c(d_nv: float, diffusion: float) -> float:
    """Diffusion-limited correlation time ``(2 d_NV)**2 / (6 D)``."""
    if not (d_nv > 0 and diffusion > 0):
        raise ArgumentError("d_nv and diffusion must be positive")
    return (2 * d_nv) ** 2 / (6 * diffusion)


def derive_sigma(t2_star: float, tau_c: float) -> float:
    """Noise strength (rad/s) reproducing ``T2* = 1/(sigma**2 tau_c)``."""
    if not (t2_star > 0 and tau_c > 0):
        raise ArgumentError("t2_star and tau_c must be positive")
    return float(np.sqrt(1.0 / (t2_star * tau_c)))


def fid_envelope(params: OUParams, t):
    """Ensemble coherence envelope of free precession under OU noise.

    ``E(t) = exp[-sigma**2 tau_c t + sigma**2 tau_c**2 (1 - exp(-t/tau_c))]``;
    reduces to ``exp(-t/T2*)`` times a constant offset once ``t >> tau_c``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ArgumentError("t must be non-negative")
    s2 = params.sigma**2
    tc = params.tau_c
    return np.exp(-s2 * tc * t - s2 * tc**2 * np.expm1(-t / tc))
