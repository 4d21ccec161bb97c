"""Deterministic Monte Carlo averaging over noise trajectories.

Trajectory ``k`` of an ensemble is seeded with
``trajectory_seed(master_seed, k)``. Trajectories are grouped into fixed
blocks of ``BLOCK`` consecutive indices; each block is reduced sequentially
and the block results are merged by a pairwise tree in block order. Workers
only ever compute whole blocks, so the floating-point result does not
depend on how many workers were used.

Per point the reduction keeps the plain sum (for the mean) and a
Welford/Chan second moment (for the standard error). The second moment is
exactly zero when every trajectory is identical.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError
from .molecule import FieldConfig, Molecule
from .noise import DrivingNoiseParams, OUParams
from . import protocol

BLOCK = 16


def trajectory_seed(master_seed: int, k: int) -> int:
    """64-bit seed of trajectory ``k``, hashed from ``(master_seed, k)``."""
    if master_seed < 0 or k < 0:
        raise ArgumentError("seeds and trajectory indices must be non-negative")
    lo, hi = np.random.SeedSequence([int(master_seed), int(k)]).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def partition_plan(n_items: int, n_workers: int):
    """Split ``range(n_items)`` into contiguous ``(start, stop)`` ranges.

    Sizes differ by at most one, larger ranges first; empty ranges are
    omitted. ``partition_plan(10, 3) == [(0, 4), (4, 7), (7, 10)]``.
    """
    if n_workers < 1:
        raise ArgumentError("n_workers must be >= 1")
    if n_items < 0:
        raise ArgumentError("n_items must be >= 0")
    base, extra = divmod(n_items, n_workers)
    out, start = [], 0
    for w in range(n_workers):
        size = base + (1 if w < extra else 0)
        if size == 0:
            break
        out.append((start, start + size))
        start += size
    return out


@dataclass(frozen=True)
class TimeSeries:
    """Ensemble-averaged signal on a uniform grid.

    Attributes
    ----------
    times : (n_t,) array, s
    values : (n_t,) array
        Mean of the headline signal (real or complex).
    n_traj : int
    stderr : (n_t,) array, optional
        Standard error of ``values`` (modulus of the deviation for complex).
    components : (C, n_t) array, optional
        Means of auxiliary per-group channels.
    components_stderr : (C, n_t) array, optional
    """

    times: np.ndarray
    values: np.ndarray
    n_traj: int = 1
    stderr: Optional[np.ndarray] = None
    components: Optional[np.ndarray] = None
    components_stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size != np.shape(self.values)[-1]:
            raise ArgumentError("times and values must have matching length")
        if t.size > 1:
            d = np.diff(t)
            if np.any(d <= 0):
                raise ArgumentError("times must be strictly increasing")
            if np.max(np.abs(d - d.mean())) > 1e-6 * d.mean():
                raise ArgumentError("times must lie on a uniform grid")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class _Stats:
    n: int
    total: np.ndarray
    mean: np.ndarray
    m2: np.ndarray


def _accumulate(stats: Optional[_Stats], x: np.ndarray) -> _Stats:
    if stats is None:
        return _Stats(1, x.copy(), x.copy(), np.zeros(x.shape))
    n = stats.n + 1
    delta = x - stats.mean
    mean = stats.mean + delta / n
    m2 = stats.m2 + np.real(np.conj(delta) * (x - mean))
    return _Stats(n, stats.total + x, mean, m2)


def _merge(a: _Stats, b: _Stats) -> _Stats:
    n = a.n + b.n
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.n / n)
    m2 = a.m2 + b.m2 + np.abs(delta) ** 2 * (a.n * b.n / n)
    return _Stats(n, a.total + b.total, mean, m2)


def _tree(stats):
    if len(stats) == 1:
        return stats[0]
    mid = len(stats) // 2
    return _merge(_tree(stats[:mid]), _tree(stats[mid:]))


def _run_block(experiment, master_seed, start, stop):
    stats, times = None, None
    for k in range(start, stop):
        times, x = experiment(trajectory_seed(master_seed, k))
        stats = _accumulate(stats, np.asarray(x))
    return times, stats


def _run_blocks(experiment, master_seed, blocks):
    return [_run_block(experiment, master_seed, a, b) for a, b in blocks]


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble description.

    Parameters
    ----------
    n_traj : int
    master_seed : int
    experiment : callable
        ``experiment(seed) -> (times, values)`` with ``values`` of shape
        ``(n_t,)`` or ``(1 + C, n_t)``; row 0 is the headline signal and the
        remaining rows are carried as ``components``. Must be picklable for
        multi-process runs.
    offset : int
        First trajectory index (for splitting an ensemble into disjoint parts).
    """

    n_traj: int
    master_seed: int
    experiment: Callable
    offset: int = 0

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ArgumentError("n_traj must be a positive integer")
        if self.offset < 0:
            raise ArgumentError("offset must be non-negative")


def _blocks(spec: EnsembleSpec):
    start, stop = spec.offset, spec.offset + spec.n_traj
    edges = list(range(start, stop, BLOCK)) + [stop]
    return list(zip(edges[:-1], edges[1:]))


def _reduce(spec: EnsembleSpec, n_workers: int) -> tuple:
    blocks = _blocks(spec)
    if n_workers <= 1 or len(blocks) == 1:
        results = _run_blocks(spec.experiment, spec.master_seed, blocks)
    else:
        plan = partition_plan(len(blocks), n_workers)
        with ProcessPoolExecutor(max_workers=len(plan)) as pool:
            futures = [
                pool.submit(_run_blocks, spec.experiment, spec.master_seed, blocks[a:b])
                for a, b in plan
            ]
            results = [r for f in futures for r in f.result()]
    times = results[0][0]
    return times, _tree([s for _, s in results])


def _to_series(times, stats: _Stats) -> TimeSeries:
    mean = stats.total / stats.n
    if stats.n > 1:
        stderr = np.sqrt(np.maximum(stats.m2, 0.0) / (stats.n - 1) / stats.n)
    else:
        stderr = np.zeros(stats.m2.shape)
    if mean.ndim == 1:
        return TimeSeries(times, mean, stats.n, stderr)
    return TimeSeries(times, mean[0], stats.n, stderr[0], mean[1:], stderr[1:])


def simulate_ensemble(spec: EnsembleSpec, n_workers: Optional[int] = 1) -> TimeSeries:
    """Average ``spec.n_traj`` trajectories; bit-identical for any ``n_workers``.

    ``n_workers=None`` uses ``os.cpu_count()``.
    """
    if n_workers is None:
        n_workers = os.cpu_count() or 1
    if n_workers < 1:
        raise ArgumentError("n_workers must be >= 1")
    times, stats = _reduce(spec, n_workers)
    return _to_series(times, stats)


def combine(a: TimeSeries, b: TimeSeries) -> TimeSeries:
    """Sample-weighted mean of two ensembles over disjoint trajectories."""
    if a.times.shape != b.times.shape or np.any(a.times != b.times):
        raise ArgumentError("ensembles must share the time grid")
    n = a.n_traj + b.n_traj

    def mix(x, y):
        return None if x is None else (x * a.n_traj + y * b.n_traj) / n

    return TimeSeries(a.times, mix(a.values, b.values), n, None,
                      mix(a.components, b.components))


# ---------------------------------------------------------------------------
# picklable experiment descriptions


@dataclass(frozen=True)
class FidExperiment:
    """``seed -> (times, [total, group_0, ...])`` for :func:`protocol.run_fid`."""

    mol: Molecule
    field_cfg: FieldConfig
    noise: OUParams
    duration: float
    dt: Optional[float] = None
    basis: str = "auto"

    def __call__(self, seed):
        tr = protocol.run_fid(self.mol, self.field_cfg, self.noise, self.duration, self.dt,
                              seed, self.basis)
        return tr.times, tr.stacked()


@dataclass(frozen=True)
class SpinLockExperiment:
    """``seed -> (times, [total, group_0, ...])`` for :func:`protocol.run_spin_lock`."""

    mol: Molecule
    field_cfg: FieldConfig
    noise: OUParams
    omega1_hz: float
    duration: float
    dt: Optional[float] = None
    phase: float = np.pi / 2
    drive_noise: Optional[DrivingNoiseParams] = None
    basis: str = "auto"

    def __call__(self, seed):
        tr = protocol.run_spin_lock(self.mol, self.field_cfg, self.noise, self.omega1_hz,
                                    self.duration, self.dt, seed, self.phase,
                                    self.drive_noise, self.basis)
        return tr.times, tr.stacked()


@dataclass(frozen=True)
class AerisExperiment:
    """``seed -> (encoding_times, [readout, group_0, ...])`` for :func:`protocol.run_aeris`.

    The grid is the accumulated encoding time ``j * tau_1``.
    """

    mol: Molecule
    field_cfg: FieldConfig
    noise: OUParams
    config: protocol.AerisConfig
    dt: Optional[float] = None
    drive_noise: Optional[DrivingNoiseParams] = None
    basis: str = "auto"

    def __call__(self, seed):
        r = protocol.run_aeris(self.mol, self.field_cfg, self.noise, self.config, self.dt,
                               seed, self.drive_noise, self.basis)
        return r.encoding_times, np.vstack([r.values[None, :], r.groups])
