import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from aerislock.errors import ArgumentError
from aerislock.spincore import (
    SpinSystem,
    basis_state,
    collective_operators,
    evolve_piecewise,
    expectation,
    hermiticity_error,
    propagator,
    rotate,
    spin_operator,
)

AXES = ("x", "y", "z")


def random_state(rng, dim):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_hermitian(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (a + a.conj().T) / 2


# ---------------------------------------------------------------------------
# operators


def test_single_spin_z_is_half_pauli():
    op = spin_operator(SpinSystem(1), 0, "z")
    np.testing.assert_array_equal(op, np.diag([0.5, -0.5]))


def test_embedded_x_keeps_spin_half_spectrum():
    op = spin_operator(SpinSystem(2), 1, "x")
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(op)), [-0.5, -0.5, 0.5, 0.5], atol=1e-15)


@given(n=st.integers(1, 5), data=st.data())
@settings(max_examples=30, deadline=None)
def test_su2_commutator_on_every_spin(n, data):
    sys_ = SpinSystem(n)
    i = data.draw(st.integers(0, n - 1))
    x, y, z = (spin_operator(sys_, i, a) for a in AXES)
    np.testing.assert_allclose(x @ y - y @ x, 1j * z, atol=1e-14)
    np.testing.assert_allclose(y @ z - z @ y, 1j * x, atol=1e-14)


@given(n=st.integers(2, 5), data=st.data())
@settings(max_examples=30, deadline=None)
def test_operators_on_distinct_spins_commute_exactly(n, data):
    sys_ = SpinSystem(n)
    i, j = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    a, b = data.draw(st.sampled_from(AXES)), data.draw(st.sampled_from(AXES))
    p, q = spin_operator(sys_, i, a), spin_operator(sys_, j, b)
    assert np.array_equal(p @ q - q @ p, np.zeros_like(p))


@given(n=st.integers(1, 6), axis=st.sampled_from(AXES), data=st.data())
@settings(max_examples=30, deadline=None)
def test_operator_dimension_and_hermiticity(n, axis, data):
    sys_ = SpinSystem(n)
    op = spin_operator(sys_, data.draw(st.integers(0, n - 1)), axis)
    assert op.shape == (2**n, 2**n) == (sys_.dim, sys_.dim)
    assert hermiticity_error(op) <= 1e-12


@pytest.mark.parametrize("j", [0.5, 1.0, 1.5, 2.0])
def test_collective_operators_obey_su2(j):
    jx, jy, jz = collective_operators(j)
    np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
    casimir = jx @ jx + jy @ jy + jz @ jz
    np.testing.assert_allclose(casimir, j * (j + 1) * np.eye(int(2 * j + 1)), atol=1e-12)


def test_invalid_arguments_raise():
    with pytest.raises(ArgumentError):
        SpinSystem(0)
    with pytest.raises(ArgumentError):
        SpinSystem(13)
    with pytest.raises(ArgumentError):
        spin_operator(SpinSystem(2), 2, "x")
    with pytest.raises(ArgumentError):
        spin_operator(SpinSystem(2), 0, "w")
    with pytest.raises(ArgumentError):
        collective_operators(0.3)
    with pytest.raises(ArgumentError):
        rotate(np.array([1, 0], complex), np.array([[0, 1], [0, 0]], complex), 1.0)


# ---------------------------------------------------------------------------
# rotations and expectation values


def test_quarter_turn_about_x_points_up_spin_along_minus_y():
    s = SpinSystem(1)
    psi = rotate(basis_state(s), spin_operator(s, 0, "x"), np.pi / 2)
    assert expectation(psi, spin_operator(s, 0, "y")) == pytest.approx(-0.5, abs=1e-12)
    assert expectation(psi, spin_operator(s, 0, "z")) == pytest.approx(0.0, abs=1e-12)


def test_zero_angle_is_identity():
    rng = np.random.default_rng(1)
    s = SpinSystem(3)
    psi = random_state(rng, s.dim)
    np.testing.assert_allclose(rotate(psi, spin_operator(s, 1, "y"), 0.0), psi, atol=1e-14)


def test_full_turn_gives_sign_flip():
    s = SpinSystem(1)
    up = basis_state(s)
    psi = rotate(up, spin_operator(s, 0, "x"), 2 * np.pi)
    np.testing.assert_allclose(psi, -up, atol=1e-12)
    for a in AXES:
        op = spin_operator(s, 0, a)
        assert expectation(psi, op) == pytest.approx(expectation(up, op), abs=1e-12)


def test_expectation_examples():
    s = SpinSystem(1)
    up = basis_state(s)
    assert expectation(up, spin_operator(s, 0, "z")) == 0.5
    plus = np.array([1, 1], complex) / np.sqrt(2)
    assert expectation(plus, spin_operator(s, 0, "x")) == pytest.approx(0.5)
    rng = np.random.default_rng(2)
    psi = random_state(rng, 8)
    assert expectation(psi, np.eye(8)) == pytest.approx(1.0, abs=1e-14)


# ---------------------------------------------------------------------------
# evolution


def test_free_precession_quarter_period():
    s = SpinSystem(1)
    ix, iy, iz = (spin_operator(s, 0, a) for a in AXES)
    psi0 = np.array([1, 1], complex) / np.sqrt(2)  # <I_x> = 1/2
    psi = evolve_piecewise(psi0, lambda t: 2 * np.pi * 100 * iz, 0.0, 2.5e-3, 1e-4)
    assert expectation(psi, ix) == pytest.approx(0.0, abs=1e-12)
    # exp(-i H t) rotates +x towards +y
    assert expectation(psi, iy) == pytest.approx(0.5, abs=1e-12)


def test_zero_hamiltonian_leaves_state_unchanged():
    rng = np.random.default_rng(3)
    psi0 = random_state(rng, 4)
    psi = evolve_piecewise(psi0, lambda t: np.zeros((4, 4)), 0.0, 3.7, 0.1)
    np.testing.assert_allclose(psi, psi0, atol=1e-15)


def test_driven_offset_spin_matches_static_diagonalization():
    s = SpinSystem(1)
    ix, iy, iz = (spin_operator(s, 0, a) for a in AXES)
    h = 2 * np.pi * (300 * iz + 1000 * iy)
    psi0 = np.array([1, 1j], complex) / np.sqrt(2)  # <I_y> = 1/2
    times = np.linspace(0, 10e-3, 41)
    w, v = np.linalg.eigh(h)
    for t in times[1:]:
        psi = evolve_piecewise(psi0, lambda _t: h, 0.0, t, 1e-4)
        ref = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0))
        assert expectation(psi, iy) == pytest.approx(expectation(ref, iy), abs=1e-10)
    # the transition frequency of the dressed pair is the generalized Rabi frequency
    assert (w[1] - w[0]) / (2 * np.pi) == pytest.approx(np.hypot(300, 1000), rel=1e-12)


def test_last_step_is_shortened_to_hit_end_time():
    s = SpinSystem(1)
    iz = spin_operator(s, 0, "z")
    psi0 = np.array([1, 1], complex) / np.sqrt(2)
    a = evolve_piecewise(psi0, lambda t: 2 * np.pi * 37 * iz, 0.0, 0.0105, 0.001)
    b = propagator(2 * np.pi * 37 * iz, 0.0105) @ psi0
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_non_positive_step_rejected():
    with pytest.raises(ArgumentError):
        evolve_piecewise(np.array([1, 0], complex), lambda t: np.eye(2), 0, 1, 0)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 4, 8, 16]),
       dt=st.floats(1e-5, 1e-1))
@settings(max_examples=40, deadline=None)
def test_propagator_is_unitary_and_matches_expm(seed, dim, dt):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, dim, 2 * np.pi * 500)
    u = propagator(h, dt)
    assert np.linalg.norm(u.conj().T @ u - np.eye(dim)) <= 1e-10 * dim
    np.testing.assert_allclose(u, expm(-1j * h * dt), atol=1e-9)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 4, 8]))
@settings(max_examples=30, deadline=None)
def test_norm_and_energy_conserved(seed, dim):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, dim, 2 * np.pi * 200)
    psi0 = random_state(rng, dim)
    psi = evolve_piecewise(psi0, lambda t: h, 0.0, 0.05, 1e-3)
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10
    assert abs(expectation(psi, h) - expectation(psi0, h)) <= 1e-9 * np.linalg.norm(h)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_time_dependent_norm_preserved(seed):
    rng = np.random.default_rng(seed)
    h0, h1 = random_hermitian(rng, 4, 300.0), random_hermitian(rng, 4, 300.0)
    psi = evolve_piecewise(random_state(rng, 4), lambda t: h0 + np.sin(400 * t) * h1, 0, 0.03, 7e-4)
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10


def test_midpoint_rule_converges_at_second_order():
    s = SpinSystem(1)
    ix, iy, iz = (spin_operator(s, 0, a) for a in AXES)

    def h(t):
        return 2 * np.pi * (120 * iz + 80 * np.cos(2 * np.pi * 35 * t) * ix)

    psi0 = basis_state(s)
    vals = [expectation(evolve_piecewise(psi0, h, 0, 0.04, 0.04 / n), iy) for n in (50, 100, 200, 400)]
    diffs = np.abs(np.diff(vals))
    assert diffs[1] <= 4 * diffs[0]
    assert diffs[2] <= 4 * diffs[1]
    # second order: each halving cuts the change by about four
    assert diffs[2] / diffs[1] == pytest.approx(0.25, abs=0.05)
