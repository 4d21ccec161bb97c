import os
import subprocess
import sys

import numpy as np
import pytest

from aerislock import kernels
from aerislock import protocol as P
from aerislock._accel import HAVE_NUMBA
from aerislock.molecule import (
    Drive,
    FieldConfig,
    build_hamiltonian,
    chloroethane,
    methyl_acetate,
    trimethyl_phosphate,
)
from aerislock.noise import DrivingNoiseParams, OUParams
from aerislock.spincore import evolve_piecewise, propagator

FIELD = FieldConfig(2.0)
WORKING = OUParams.from_hz(10.0, 4.6e-3)
QUIET = OUParams(0.0, 4.6e-3)

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend not active")


@needs_numba
@pytest.mark.parametrize("mol", [methyl_acetate(), trimethyl_phosphate(), chloroethane()],
                         ids=lambda m: m.name)
@pytest.mark.parametrize("readout", ["analytic", "filter"])
def test_backends_agree_on_aeris(mol, readout):
    cfg = P.AerisConfig(P.EncodingStage("robust", 1000.0), repetitions=15, readout=readout)
    dn = DrivingNoiseParams(0.02, 1e-3)
    a = P.run_aeris(mol, FIELD, WORKING, cfg, seed=4, drive_noise=dn, use_numba=True)
    b = P.run_aeris(mol, FIELD, WORKING, cfg, seed=4, drive_noise=dn, use_numba=False)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(a.groups, b.groups, rtol=1e-9, atol=1e-15)


@needs_numba
def test_backends_agree_on_fid_and_spin_lock():
    mol = methyl_acetate()
    a = P.run_fid(mol, FIELD, WORKING, 0.03, seed=2, use_numba=True)
    b = P.run_fid(mol, FIELD, WORKING, 0.03, seed=2, use_numba=False)
    np.testing.assert_allclose(a.total, b.total, atol=1e-12)
    a = P.run_spin_lock(mol, FIELD, WORKING, 1000.0, 0.03, seed=2, use_numba=True)
    b = P.run_spin_lock(mol, FIELD, WORKING, 1000.0, 0.03, seed=2, use_numba=False)
    np.testing.assert_allclose(a.total, b.total, atol=1e-12)


@pytest.mark.parametrize("use_numba", [False, True])
def test_spin_half_and_dense_kernels_agree_under_noise(use_numba):
    mol = methyl_acetate()
    cfg = P.AerisConfig(repetitions=12)
    a = P.run_aeris(mol, FIELD, WORKING, cfg, seed=8, basis="spin_half", use_numba=use_numba)
    b = P.run_aeris(mol, FIELD, WORKING, cfg, seed=8, basis="collective", use_numba=use_numba)
    c = P.run_aeris(mol, FIELD, WORKING, cfg, seed=8, basis="full", use_numba=use_numba)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(a.values, c.values, rtol=1e-9, atol=1e-15)


@pytest.mark.parametrize("use_numba", [False, True])
def test_noiseless_spin_lock_matches_reference_integrator(use_numba):
    mol = methyl_acetate()
    omega1, t_end = 1000.0, 4e-3
    tr = P.run_spin_lock(mol, FIELD, QUIET, omega1, t_end, basis="full", use_numba=use_numba)
    from aerislock.molecule import group_operators

    ops = group_operators(mol, "full")
    h = build_hamiltonian(mol, FIELD, drive=Drive(2 * np.pi * omega1, np.pi / 2))
    psi0 = np.zeros(ops.dim, complex)
    psi0[0] = 1.0
    # the lock start: magnetization along the drive axis -y, reached by pi/2 about x
    psi0 = propagator(sum(ops.fx), np.pi / 2) @ psi0
    psi = evolve_piecewise(psi0, lambda t: h, 0.0, t_end, 1e-4)
    locked = -np.real(np.vdot(psi, sum(ops.fy) @ psi))
    assert tr.total[-1] == pytest.approx(locked, abs=1e-9)


def test_program_modes_and_output_shapes():
    prog = {"n": [3, 2, 4, 5], "h": [1e-4] * 4, "hx": [0.0] * 4, "hy": [0.0] * 4,
            "mode": [kernels.MODE_RECORD, kernels.MODE_SNAPSHOT,
                     kernels.MODE_FILTER + kernels.NO_DRIVE_NOISE, kernels.MODE_PLAIN]}
    n = 14
    _, rec, snap, filt = kernels.spin_half_program(
        np.array([[1, 0]], complex), np.array([100.0]), np.array([1.0]), np.array([0]), 1,
        prog, (0.0, 1e-3, 0.0, 1.0), np.zeros(n + 1), np.zeros(n + 1), 2 * np.pi * 1e3, 0.0, 2,
        use_numba=False)
    assert rec.shape == (3, 1, 3) and snap.shape == (1, 1, 3) and filt.shape == (1, 1)
    # |up> stays up without drive
    np.testing.assert_allclose(rec[:, 0, 2], 1.0)


def test_backend_flag_selects_numpy():
    env = dict(os.environ, AERISLOCK_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from aerislock import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
