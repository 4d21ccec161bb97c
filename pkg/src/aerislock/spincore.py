"""Dense linear algebra for small systems of spin-1/2 nuclei.

Conventions
-----------
* hbar = 1 and every Hamiltonian is in angular units (rad/s).
* A state evolves as ``psi(t) = exp(-i H t) psi(0)``.
* A rotation by ``angle`` about the Hermitian generator ``A`` is
  ``exp(-i angle A)``. With this choice a pi/2 rotation about ``I_x`` takes
  ``|up>`` (magnetization +z) to magnetization along -y.
* Basis ordering is the usual Kronecker ordering with spin 0 as the most
  significant factor and ``|up> = (1, 0)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_SPINS = 12


@dataclass(frozen=True)
class SpinSystem:
    """A register of ``n_spins`` spin-1/2 particles.

    Parameters
    ----------
    n_spins : int
        Number of spins, at most ``MAX_SPINS``.
    labels : tuple of str, optional
        Role tag per spin, e.g. ``"g0"`` for target group 0 or ``"p0"`` for
        passive spin 0.
    """

    n_spins: int
    labels: tuple = field(default=())

    def __post_init__(self):
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise ArgumentError(f"n_spins must be in [1, {MAX_SPINS}], got {self.n_spins}")
        if self.labels and len(self.labels) != self.n_spins:
            raise ArgumentError("labels must have one entry per spin")

    @property
    def dim(self) -> int:
        return 2**self.n_spins


def spin_operator(system: SpinSystem, index: int, axis: str) -> np.ndarray:
    """Embed ``sigma_axis / 2`` at position ``index`` of the register."""
    if not 0 <= index < system.n_spins:
        raise ArgumentError(f"spin index {index} out of range for {system.n_spins} spins")
    if axis not in SIGMA:
        raise ArgumentError(f"axis must be one of x, y, z, got {axis!r}")
    left = np.eye(2**index)
    right = np.eye(2 ** (system.n_spins - index - 1))
    return np.kron(np.kron(left, SIGMA[axis] / 2), right)


def collective_operators(j: float):
    """Spin-``j`` matrices ``(J_x, J_y, J_z)`` in the ``|j, m>`` basis.

    The symmetric subspace of ``n`` equivalent spin-1/2 particles carries
    spin ``j = n/2``; ordering is ``m = j, j-1, ..., -j``.
    """
    twice = int(round(2 * j))
    if twice < 0 or abs(twice - 2 * j) > 1e-12:
        raise ArgumentError(f"j must be a non-negative half-integer, got {j}")
    m = j - np.arange(twice + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J_+|m> = sqrt(j(j+1) - m(m+1))
    jp = np.zeros((twice + 1, twice + 1), dtype=complex)
    for k in range(1, twice + 1):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    return jx, jy, jz


def hermiticity_error(op: np.ndarray) -> float:
    """Relative Frobenius norm of the anti-Hermitian part of ``op``."""
    norm = np.linalg.norm(op)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(op - op.conj().T) / norm)


def _require_hermitian(op: np.ndarray, tol: float = 1e-12):
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ArgumentError(f"operator must be square, got shape {op.shape}")
    if hermiticity_error(op) > tol:
        raise ArgumentError("operator is not Hermitian")


def propagator(hamiltonian: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` from the Hermitian eigendecomposition of ``H``."""
    w, v = np.linalg.eigh(hamiltonian)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def rotate(state: np.ndarray, axis_operator: np.ndarray, angle: float) -> np.ndarray:
    """Apply ``exp(-i angle A)`` to ``state``."""
    _require_hermitian(axis_operator)
    if axis_operator.shape[0] != state.shape[0]:
        raise ArgumentError("dimension mismatch between state and operator")
    return propagator(axis_operator, angle) @ state


def evolve_piecewise(
    state: np.ndarray,
    hamiltonian_at: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    dt: float,
) -> np.ndarray:
    """Integrate ``i d psi/dt = H(t) psi`` with midpoint-sampled constant steps.

    Each step multiplies by ``exp(-i H(t_mid) h)``; the last step is shortened
    so the integration ends exactly at ``t1``.
    """
    if dt <= 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    psi = np.asarray(state, dtype=complex)
    t = t0
    while t < t1:
        h = min(dt, t1 - t)
        # guard against a sliver step created by round-off
        if h <= 1e-15 * max(1.0, abs(t1)):
            break
        psi = propagator(hamiltonian_at(t + h / 2), h) @ psi
        t += h
    return psi


def expectation(state: np.ndarray, op: np.ndarray) -> float:
    """Real part of ``<psi|op|psi>``."""
    if op.shape[0] != state.shape[0]:
        raise ArgumentError(
            f"dimension mismatch: state {state.shape[0]}, operator {op.shape[0]}"
        )
    return float(np.real(np.vdot(state, op @ state)))


def basis_state(system: SpinSystem, bits: Sequence[int] = ()) -> np.ndarray:
    """Computational basis state; ``bits[n] = 0`` means spin ``n`` is up."""
    bits = list(bits) or [0] * system.n_spins
    if len(bits) != system.n_spins:
        raise ArgumentError("one bit per spin required")
    index = int("".join(str(int(b)) for b in bits), 2)
    psi = np.zeros(system.dim, dtype=complex)
    psi[index] = 1.0
    return psi
