"""Molecules, rotating-frame Hamiltonians and closed-form frequency formulas.

All public frequency formulas take and return ordinary frequencies in Hz.
Hamiltonians are returned in rad/s.

Rotating-frame Hamiltonian (RWA, drive resonant with the bare Larmor
frequency, secular heteronuclear coupling)::

    H = sum_n [(2 pi delta_n + xi + 2 pi m_s J_het_n) I_z^n + Omega_1 (1 + eps) I_phi^n]
        + sum_{n<m} 2 pi J_hom_nm  I^n . I^m

with ``I_phi = cos(phi) I_x - sin(phi) I_y``.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, ConfigurationError
from .spincore import MAX_SPINS, SpinSystem, collective_operators, spin_operator

GAMMA_H_OVER_2PI = 42.577e6  # Hz/T


@dataclass(frozen=True)
class SpinGroup:
    """``count`` magnetically equivalent protons with chemical shift ``delta_ppm``."""

    count: int
    delta_ppm: float

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ArgumentError(f"group count must be a positive integer, got {self.count}")


@dataclass(frozen=True)
class PassiveSpin:
    """A spin-1/2 heteronucleus coupled secularly to target groups.

    Parameters
    ----------
    j_het_hz : float
        Coupling constant (Hz), identical for every attached group.
    groups : tuple of int
        Indices of the target groups it couples to.
    spin : float
        Only 1/2 is supported.
    """

    j_het_hz: float
    groups: tuple
    spin: float = 0.5

    def __post_init__(self):
        if self.spin != 0.5:
            raise ArgumentError("only spin-1/2 passive nuclei are supported")

    @property
    def m_values(self):
        return (0.5, -0.5)


@dataclass(frozen=True)
class FieldConfig:
    b0: float = 2.0
    gamma_h_over_2pi: float = GAMMA_H_OVER_2PI

    def __post_init__(self):
        if not self.b0 > 0:
            raise ArgumentError(f"b0 must be positive, got {self.b0}")

    @property
    def hz_per_ppm(self) -> float:
        return self.gamma_h_over_2pi * self.b0 * 1e-6


@dataclass(frozen=True)
class Molecule:
    """Spin groups, inter-group homonuclear couplings and passive spins.

    ``j_hom_hz`` is a symmetric ``(n_groups, n_groups)`` matrix; its diagonal
    is ignored because couplings inside an equivalent group are unobservable.
    """

    name: str
    groups: tuple
    j_hom_hz: Optional[np.ndarray] = None
    passives: tuple = field(default=())

    def __post_init__(self):
        n = len(self.groups)
        if n == 0:
            raise ArgumentError("a molecule needs at least one spin group")
        j = np.zeros((n, n)) if self.j_hom_hz is None else np.array(self.j_hom_hz, dtype=float)
        if j.shape != (n, n):
            raise ArgumentError(f"j_hom_hz must be {n}x{n}")
        if not np.allclose(j, j.T):
            raise ArgumentError("j_hom_hz must be symmetric")
        np.fill_diagonal(j, 0.0)
        j.setflags(write=False)
        object.__setattr__(self, "j_hom_hz", j)
        for p in self.passives:
            if any(not 0 <= g < n for g in p.groups):
                raise ArgumentError("passive spin attached to an unknown group")

    # Molecule holds an array, so the generated __eq__/__hash__ are replaced.
    def __eq__(self, other):
        return (
            isinstance(other, Molecule)
            and self.name == other.name
            and self.groups == other.groups
            and self.passives == other.passives
            and np.array_equal(self.j_hom_hz, other.j_hom_hz)
        )

    __hash__ = None

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_target_spins(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def is_coupled(self) -> bool:
        """True when any inter-group homonuclear coupling is non-zero."""
        return bool(np.any(self.j_hom_hz != 0))

    def shifts_hz(self, field: FieldConfig) -> np.ndarray:
        return np.array([shift_hz(g.delta_ppm, field) for g in self.groups])

    def passive_branches(self):
        """Classical ``(weight, m_s tuple)`` branches over all passive spins."""
        if not self.passives:
            return [(1.0, ())]
        combos = list(product(*[p.m_values for p in self.passives]))
        w = 1.0 / len(combos)
        return [(w, c) for c in combos]

    def het_offsets_hz(self, m_s: Sequence[float]) -> np.ndarray:
        """Per-group z offset ``sum_p m_s,p J_p`` (Hz) for one passive branch."""
        off = np.zeros(self.n_groups)
        for p, m in zip(self.passives, m_s):
            for g in p.groups:
                off[g] += m * p.j_het_hz
        return off


def methyl_acetate() -> Molecule:
    return Molecule("methyl_acetate", (SpinGroup(3, 2.05), SpinGroup(3, 3.662)))


def trimethyl_phosphate() -> Molecule:
    groups = (SpinGroup(3, 3.799),) * 3
    return Molecule(
        "trimethyl_phosphate",
        groups,
        passives=(PassiveSpin(11.0, (0, 1, 2)),),
    )


def chloroethane() -> Molecule:
    j = np.array([[0.0, 7.232], [7.232, 0.0]])
    return Molecule("chloroethane", (SpinGroup(3, 1.488), SpinGroup(2, 3.505)), j_hom_hz=j)


PRESETS = {
    "methyl_acetate": methyl_acetate,
    "trimethyl_phosphate": trimethyl_phosphate,
    "chloroethane": chloroethane,
}

# Drive strengths recorded for chloroethane experiment configs (Hz).
CHLOROETHANE_OMEGA1_HZ = (600.0, 1000.0)


def preset(name: str) -> Molecule:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown molecule preset {name!r}") from None


# ---------------------------------------------------------------------------
# closed-form frequencies (Hz in, Hz out)


def shift_hz(delta_ppm: float, field: FieldConfig) -> float:
    return delta_ppm * 1e-6 * field.gamma_h_over_2pi * field.b0


def generalized_rabi(delta_hz, omega1_hz):
    """Dressed Rabi frequency ``sqrt(Omega_1**2 + delta**2)``."""
    if np.any(np.asarray(omega1_hz) < 0):
        raise ArgumentError("omega1_hz must be >= 0")
    return np.hypot(omega1_hz, delta_hz)


def reduced_shift(delta_hz, omega1_hz):
    """Exact dressed shift ``Omega_bar - Omega_1``; ``|delta|`` when ``Omega_1 = 0``.

    Evaluated as ``delta**2 / (Omega_bar + Omega_1)`` to avoid cancellation.
    """
    d = np.asarray(delta_hz, dtype=float)
    w = np.asarray(omega1_hz, dtype=float)
    if np.any(w < 0):
        raise ArgumentError("omega1_hz must be >= 0")
    bar = np.hypot(w, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(bar + w > 0, d * d / (bar + w), 0.0)
    return out[()] if out.ndim == 0 else out


def reduced_shift_approx(delta_hz, omega1_hz):
    """Quadratic approximation ``delta**2 / (2 Omega_1)``."""
    return np.asarray(delta_hz, dtype=float) ** 2 / (2 * np.asarray(omega1_hz, dtype=float))


def het_effective_rabi(delta_hz, j_het_hz, m_s, omega1_hz):
    """Branch-resolved dressed frequency ``sqrt(Omega_1**2 + (delta + m_s J)**2)``."""
    return np.hypot(omega1_hz, np.asarray(delta_hz) + m_s * np.asarray(j_het_hz))


def magnus_h2_coefficient(delta_hz, omega1_hz):
    """Second-order effective rotation rate about the drive axis, ``delta**2/(2 Omega_1)``."""
    if np.any(np.asarray(omega1_hz) <= 0):
        raise ArgumentError("omega1_hz must be > 0")
    return np.asarray(delta_hz, dtype=float) ** 2 / (2 * np.asarray(omega1_hz, dtype=float))


def third_order_shift(delta_hz, omega1_hz):
    """Leading residual z precession under reverse-nutation encoding, ``delta**3/(2 Omega_1**2)``."""
    if np.any(np.asarray(omega1_hz) <= 0):
        raise ArgumentError("omega1_hz must be > 0")
    return np.asarray(delta_hz, dtype=float) ** 3 / (2 * np.asarray(omega1_hz, dtype=float) ** 2)


def robust_shift_exact(delta_hz: float, omega1_hz: float) -> float:
    """Net z precession rate (Hz) of one +phase/-phase pair of 2 pi pulses.

    Computed from the exact product of the two SU(2) propagators; the
    third-order formula is its small-``delta`` limit.
    """
    if omega1_hz <= 0:
        raise ArgumentError("omega1_hz must be > 0")
    d, w = 2 * np.pi * delta_hz, 2 * np.pi * omega1_hz
    t = 2 * np.pi / w
    sx, sz = np.array([[0, 1], [1, 0]]) / 2, np.diag([0.5, -0.5])
    from .spincore import propagator

    u = propagator(d * sz - w * sx, t) @ propagator(d * sz + w * sx, t)
    # U = cos(a/2) 1 - i sin(a/2) n.sigma; atan2 keeps small angles accurate
    cos_half = np.real(np.trace(u)) / 2
    sin_half = np.linalg.norm([np.real(1j * np.trace(u @ s)) / 2 for s in
                               (2 * sx, np.array([[0, -1j], [1j, 0]]), 2 * sz)])
    half = np.arctan2(sin_half, cos_half)
    return float(2 * half / (2 * t) / (2 * np.pi))


def rescaled_field(delta_hz, omega1_hz, b0):
    """Apparent field ``(delta / 2 Omega_1) B0`` under weak locking."""
    if np.any(np.asarray(omega1_hz) <= 0):
        raise ArgumentError("omega1_hz must be > 0")
    return np.asarray(delta_hz) / (2 * np.asarray(omega1_hz)) * b0


def dressed_to_shift(freq_hz, omega1_hz):
    """Inverse of :func:`generalized_rabi`: ``sqrt(omega**2 - Omega_1**2)``."""
    f = np.asarray(freq_hz, dtype=float)
    return np.sqrt(np.clip(f * f - omega1_hz * omega1_hz, 0.0, None))


# ---------------------------------------------------------------------------
# Hamiltonian assembly


@dataclass(frozen=True)
class Drive:
    """Resonant RF drive: Rabi frequency (rad/s), phase (rad), relative error."""

    omega1: float
    phase: float = np.pi / 2
    eps: float = 0.0


def full_system(mol: Molecule, explicit_passives: bool = False) -> SpinSystem:
    labels = []
    for k, g in enumerate(mol.groups):
        labels += [f"g{k}"] * g.count
    if explicit_passives:
        labels += [f"p{i}" for i in range(len(mol.passives))]
    if len(labels) > MAX_SPINS:
        raise ConfigurationError(
            f"spin budget exceeded: {len(labels)} spins > {MAX_SPINS}"
        )
    return SpinSystem(len(labels), tuple(labels))


@dataclass(frozen=True)
class GroupOperators:
    """Per-group collective operators ``F^k_a = sum_{n in k} I^n_a`` on one space.

    ``basis`` is ``"full"`` (one spin-1/2 per nucleus, dimension ``2**N``)
    or ``"collective"`` (symmetric subspace of each group, dimension
    ``prod(n_k + 1)``). Both give identical dynamics from a fully polarized
    start because every term of the Hamiltonian is symmetric within a group.
    """

    basis: str
    fx: tuple
    fy: tuple
    fz: tuple
    passive_z: tuple = ()

    @property
    def dim(self) -> int:
        return self.fz[0].shape[0]


def group_operators(mol: Molecule, basis: str = "full", explicit_passives: bool = False) -> GroupOperators:
    """Build ``F^k_{x,y,z}`` for every group (and ``S_z`` of explicit passives)."""
    if basis == "full":
        system = full_system(mol, explicit_passives)
        fx, fy, fz = [], [], []
        start = 0
        for g in mol.groups:
            idx = range(start, start + g.count)
            fx.append(sum(spin_operator(system, i, "x") for i in idx))
            fy.append(sum(spin_operator(system, i, "y") for i in idx))
            fz.append(sum(spin_operator(system, i, "z") for i in idx))
            start += g.count
        pz = tuple(
            spin_operator(system, start + i, "z")
            for i in range(len(mol.passives) if explicit_passives else 0)
        )
        return GroupOperators("full", tuple(fx), tuple(fy), tuple(fz), pz)
    if basis == "collective":
        if explicit_passives:
            raise ArgumentError("explicit passives are only supported in the full basis")
        blocks = [collective_operators(g.count / 2) for g in mol.groups]
        dims = [b[0].shape[0] for b in blocks]
        ops = ([], [], [])
        for k, b in enumerate(blocks):
            for a in range(3):
                m = np.eye(1)
                for q, d in enumerate(dims):
                    m = np.kron(m, b[a] if q == k else np.eye(d))
                ops[a].append(m)
        return GroupOperators("collective", tuple(ops[0]), tuple(ops[1]), tuple(ops[2]))
    raise ArgumentError(f"unknown basis {basis!r}")


def _dot(ops: GroupOperators, k: int, q: int) -> np.ndarray:
    return ops.fx[k] @ ops.fx[q] + ops.fy[k] @ ops.fy[q] + ops.fz[k] @ ops.fz[q]


def hamiltonian_parts(mol: Molecule, field: FieldConfig, ops: GroupOperators, m_s=()):
    """Static pieces ``(H_0, F_z, F_x, F_y)`` in rad/s for the given passive branch.

    ``H_0`` holds shifts, classical heteronuclear offsets and homonuclear J;
    ``F_a`` are the total target-spin operators used for noise and drive.
    With explicit passives ``m_s`` must be empty and the secular coupling
    ``2 pi J I_z S_z`` is included as an operator.
    """
    shifts = mol.shifts_hz(field)
    offsets = mol.het_offsets_hz(m_s) if m_s else np.zeros(mol.n_groups)
    h0 = sum(2 * np.pi * (shifts[k] + offsets[k]) * ops.fz[k] for k in range(mol.n_groups))
    for k in range(mol.n_groups):
        for q in range(k + 1, mol.n_groups):
            j = mol.j_hom_hz[k, q]
            if j != 0:
                h0 = h0 + 2 * np.pi * j * _dot(ops, k, q)
    for i, pz in enumerate(ops.passive_z):
        p = mol.passives[i]
        for g in p.groups:
            h0 = h0 + 2 * np.pi * p.j_het_hz * ops.fz[g] @ pz
    return h0, sum(ops.fz), sum(ops.fx), sum(ops.fy)


def build_hamiltonian(
    mol: Molecule,
    field: FieldConfig,
    xi: float = 0.0,
    drive: Optional[Drive] = None,
    passive_state: Sequence[float] = (),
    basis: str = "full",
) -> np.ndarray:
    """Rotating-frame Hamiltonian (rad/s) for one classical passive branch.

    Parameters
    ----------
    xi : float
        Instantaneous dephasing noise (rad/s), shared by every nucleus.
    drive : Drive or None
        ``None`` switches the RF term off.
    passive_state : sequence of float
        ``m_s`` for each passive spin (must match ``mol.passives``).
    """
    if len(passive_state) != len(mol.passives):
        raise ArgumentError("passive_state needs one m_s per passive spin")
    ops = group_operators(mol, basis)
    h0, fz, fx, fy = hamiltonian_parts(mol, field, ops, tuple(passive_state))
    h = h0 + xi * fz
    if drive is not None:
        amp = drive.omega1 * (1 + drive.eps)
        h = h + amp * (np.cos(drive.phase) * fx - np.sin(drive.phase) * fy)
    return h
