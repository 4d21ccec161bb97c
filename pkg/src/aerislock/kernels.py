"""Hot loops of the protocol simulator.

A protocol is flattened into a *program*: a sequence of stage occurrences,
each split into ``n`` equal steps of length ``h`` with a constant drive
vector ``(hx, hy)`` (rad/s, before the relative amplitude error). Within a
step the dephasing noise ``xi`` and the drive error ``eps`` are held
constant, so each step propagator is an exact exponential; both noises are
advanced with the exact OU update between steps and stay continuous across
stage boundaries.

Each stage occurrence carries a mode:

``MODE_PLAIN``
    evolve only.
``MODE_RECORD``
    store the per-group magnetization after every step.
``MODE_SNAPSHOT``
    store the per-group magnetization at the start of the stage.
``MODE_FILTER``
    accumulate ``int M_z(t) sq(t) dt`` over the stage, where ``sq`` is the
    +-1 square wave ``sign(sin(w_f t + phase_f))`` with ``t`` measured from
    the stage start, sampled ``n_sub`` times per step (midpoint rule).

Adding ``NO_DRIVE_NOISE`` to a mode runs that stage with the nominal drive
amplitude; the drive error keeps evolving in the background.

Magnetization is reported per group as ``M = sum_b w_b <sigma>_b`` (a fully
polarized group of ``n`` spins has ``|M| = n``).

Two state representations are provided:

* :func:`spin_half_program` -- independent spin-1/2 branches with closed-form
  SU(2) step propagators (identical to the Hermitian eigendecomposition of a
  2x2 Hamiltonian). Used whenever groups are mutually uncoupled.
* :func:`dense_program` -- one pure state in a dense space with a Hermitian
  eigendecomposition per step. Used for homonuclear J-coupled molecules.

Both exist as numba kernels and as pure-numpy implementations with the same
signature; :data:`BACKEND` reports which one is active.
"""

import numpy as np

from ._accel import HAVE_NUMBA, backend_name, njit

MODE_PLAIN, MODE_RECORD, MODE_SNAPSHOT, MODE_FILTER = 0, 1, 2, 3
NO_DRIVE_NOISE = 4

BACKEND = backend_name()


def _ou_coeffs(h, sigma, tau):
    a = np.exp(-h / tau)
    return a, sigma * np.sqrt(-np.expm1(-2.0 * h / tau))


# ---------------------------------------------------------------------------
# spin-1/2 branches


def _spin_half_numpy(psi0, dz, weight, group, n_groups, seq_n, seq_h, seq_hx, seq_hy,
                     seq_mode, sigma, tau_c, sig_e, tau_e, draws_x, draws_e,
                     f_omega, f_phase, n_sub, rec, snap, filt):
    a = psi0[:, 0].copy()
    b = psi0[:, 1].copy()
    xi = sigma * draws_x[0]
    eps = sig_e * draws_e[0]
    k = 1
    i_rec = i_snap = i_filt = 0

    def bloch():
        ab = np.conj(a) * b
        m = np.empty((n_groups, 3))
        m[:, 0] = np.bincount(group, weight * 2 * ab.real, n_groups)
        m[:, 1] = np.bincount(group, weight * 2 * ab.imag, n_groups)
        m[:, 2] = np.bincount(group, weight * (np.abs(a) ** 2 - np.abs(b) ** 2), n_groups)
        return m

    for s in range(len(seq_n)):
        h = seq_h[s]
        ge = 0.0 if seq_mode[s] >= NO_DRIVE_NOISE else 1.0
        mode = seq_mode[s] % NO_DRIVE_NOISE
        ax_, ay_ = seq_hx[s], seq_hy[s]
        ca, cb = _ou_coeffs(h, sigma, tau_c)
        ea, eb = _ou_coeffs(h, sig_e, tau_e)
        if mode == MODE_SNAPSHOT:
            snap[i_snap] = bloch()
            i_snap += 1
        acc = np.zeros(n_groups)
        for j in range(seq_n[s]):
            ax = (1.0 + ge * eps) * ax_
            ay = (1.0 + ge * eps) * ay_
            az = dz + xi
            w = np.sqrt(ax * ax + ay * ay + az * az)
            if mode == MODE_FILTER:
                dtau = h / n_sub
                for q in range(n_sub):
                    tau = (q + 0.5) * dtau
                    th = 0.5 * w * tau
                    c = np.cos(th)
                    sn = np.where(w > 0, np.sin(th) / np.where(w > 0, w, 1.0), 0.5 * tau)
                    ta = (c - 1j * sn * az) * a + (-1j * sn * ax - sn * ay) * b
                    tb = (-1j * sn * ax + sn * ay) * a + (c + 1j * sn * az) * b
                    mz = np.bincount(group, weight * (np.abs(ta) ** 2 - np.abs(tb) ** 2), n_groups)
                    t_abs = j * h + tau
                    acc += mz * np.sign(np.sin(f_omega * t_abs + f_phase)) * dtau
            th = 0.5 * w * h
            c = np.cos(th)
            sn = np.where(w > 0, np.sin(th) / np.where(w > 0, w, 1.0), 0.5 * h)
            na = (c - 1j * sn * az) * a + (-1j * sn * ax - sn * ay) * b
            nb = (-1j * sn * ax + sn * ay) * a + (c + 1j * sn * az) * b
            a, b = na, nb
            xi = xi * ca + cb * draws_x[k]
            eps = eps * ea + eb * draws_e[k]
            k += 1
            if mode == MODE_RECORD:
                rec[i_rec] = bloch()
                i_rec += 1
        if mode == MODE_FILTER:
            filt[i_filt] = acc
            i_filt += 1
    return np.stack([a, b], axis=1)


@njit
def _bloch_nb(a, b, weight, group, n_groups, out):
    for g in range(n_groups):
        out[g, 0] = 0.0
        out[g, 1] = 0.0
        out[g, 2] = 0.0
    for i in range(a.shape[0]):
        ab = np.conj(a[i]) * b[i]
        g = group[i]
        out[g, 0] += weight[i] * 2.0 * ab.real
        out[g, 1] += weight[i] * 2.0 * ab.imag
        out[g, 2] += weight[i] * (abs(a[i]) ** 2 - abs(b[i]) ** 2)


@njit
def _spin_half_numba(psi0, dz, weight, group, n_groups, seq_n, seq_h, seq_hx, seq_hy,
                     seq_mode, sigma, tau_c, sig_e, tau_e, draws_x, draws_e,
                     f_omega, f_phase, n_sub, rec, snap, filt):
    nb = psi0.shape[0]
    a = psi0[:, 0].copy()
    b = psi0[:, 1].copy()
    xi = sigma * draws_x[0]
    eps = sig_e * draws_e[0]
    k = 1
    i_rec = 0
    i_snap = 0
    i_filt = 0
    acc = np.zeros(n_groups)
    for s in range(seq_n.shape[0]):
        h = seq_h[s]
        ge = 0.0 if seq_mode[s] >= NO_DRIVE_NOISE else 1.0
        mode = seq_mode[s] % NO_DRIVE_NOISE
        ca = np.exp(-h / tau_c)
        cb = sigma * np.sqrt(-np.expm1(-2.0 * h / tau_c))
        ea = np.exp(-h / tau_e)
        eb = sig_e * np.sqrt(-np.expm1(-2.0 * h / tau_e))
        if mode == MODE_SNAPSHOT:
            _bloch_nb(a, b, weight, group, n_groups, snap[i_snap])
            i_snap += 1
        for g in range(n_groups):
            acc[g] = 0.0
        for j in range(seq_n[s]):
            ax = (1.0 + ge * eps) * seq_hx[s]
            ay = (1.0 + ge * eps) * seq_hy[s]
            for i in range(nb):
                az = dz[i] + xi
                w = np.sqrt(ax * ax + ay * ay + az * az)
                if mode == MODE_FILTER:
                    dtau = h / n_sub
                    for q in range(n_sub):
                        tau = (q + 0.5) * dtau
                        th = 0.5 * w * tau
                        c = np.cos(th)
                        sn = np.sin(th) / w if w > 0 else 0.5 * tau
                        ta = (c - 1j * sn * az) * a[i] + (-1j * sn * ax - sn * ay) * b[i]
                        tb = (-1j * sn * ax + sn * ay) * a[i] + (c + 1j * sn * az) * b[i]
                        mz = weight[i] * (abs(ta) ** 2 - abs(tb) ** 2)
                        sq = np.sign(np.sin(f_omega * (j * h + tau) + f_phase))
                        acc[group[i]] += mz * sq * dtau
                th = 0.5 * w * h
                c = np.cos(th)
                sn = np.sin(th) / w if w > 0 else 0.5 * h
                na = (c - 1j * sn * az) * a[i] + (-1j * sn * ax - sn * ay) * b[i]
                b[i] = (-1j * sn * ax + sn * ay) * a[i] + (c + 1j * sn * az) * b[i]
                a[i] = na
            xi = xi * ca + cb * draws_x[k]
            eps = eps * ea + eb * draws_e[k]
            k += 1
            if mode == MODE_RECORD:
                _bloch_nb(a, b, weight, group, n_groups, rec[i_rec])
                i_rec += 1
        if mode == MODE_FILTER:
            for g in range(n_groups):
                filt[i_filt, g] = acc[g]
            i_filt += 1
    out = np.empty((nb, 2), dtype=np.complex128)
    out[:, 0] = a
    out[:, 1] = b
    return out


# ---------------------------------------------------------------------------
# dense state


def _dense_numpy(psi0, h0, fz, fx, fy, gx, gy, gz, seq_n, seq_h, seq_hx, seq_hy, seq_mode,
                 sigma, tau_c, sig_e, tau_e, draws_x, draws_e, f_omega, f_phase, n_sub,
                 rec, snap, filt):
    psi = psi0.copy()
    xi = sigma * draws_x[0]
    eps = sig_e * draws_e[0]
    k = 1
    i_rec = i_snap = i_filt = 0
    n_groups = gz.shape[0]

    def mag(p):
        m = np.empty((n_groups, 3))
        for g in range(n_groups):
            m[g, 0] = 2 * np.real(np.vdot(p, gx[g] @ p))
            m[g, 1] = 2 * np.real(np.vdot(p, gy[g] @ p))
            m[g, 2] = 2 * np.dot(gz[g], np.abs(p) ** 2)
        return m

    for s in range(len(seq_n)):
        h = seq_h[s]
        ge = 0.0 if seq_mode[s] >= NO_DRIVE_NOISE else 1.0
        mode = seq_mode[s] % NO_DRIVE_NOISE
        ca, cb = _ou_coeffs(h, sigma, tau_c)
        ea, eb = _ou_coeffs(h, sig_e, tau_e)
        if mode == MODE_SNAPSHOT:
            snap[i_snap] = mag(psi)
            i_snap += 1
        acc = np.zeros(n_groups)
        for j in range(seq_n[s]):
            ham = h0 + xi * fz + (1.0 + ge * eps) * (seq_hx[s] * fx + seq_hy[s] * fy)
            lam, v = np.linalg.eigh(ham)
            c = v.conj().T @ psi
            if mode == MODE_FILTER:
                dtau = h / n_sub
                for q in range(n_sub):
                    tau = (q + 0.5) * dtau
                    p = v @ (np.exp(-1j * lam * tau) * c)
                    pop = np.abs(p) ** 2
                    sq = np.sign(np.sin(f_omega * (j * h + tau) + f_phase))
                    acc += 2 * (gz @ pop) * sq * dtau
            psi = v @ (np.exp(-1j * lam * h) * c)
            xi = xi * ca + cb * draws_x[k]
            eps = eps * ea + eb * draws_e[k]
            k += 1
            if mode == MODE_RECORD:
                rec[i_rec] = mag(psi)
                i_rec += 1
        if mode == MODE_FILTER:
            filt[i_filt] = acc
            i_filt += 1
    return psi


@njit
def _mag_dense_nb(p, gx, gy, gz, out):
    n_groups = gz.shape[0]
    d = p.shape[0]
    pc = np.conj(p)
    for g in range(n_groups):
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for r in range(d):
            tx = 0.0 + 0.0j
            ty = 0.0 + 0.0j
            for q in range(d):
                tx += gx[g, r, q] * p[q]
                ty += gy[g, r, q] * p[q]
            sx += (pc[r] * tx).real
            sy += (pc[r] * ty).real
            sz += gz[g, r] * (p[r].real ** 2 + p[r].imag ** 2)
        out[g, 0] = 2.0 * sx
        out[g, 1] = 2.0 * sy
        out[g, 2] = 2.0 * sz


@njit
def _dense_numba(psi0, h0, fz, fx, fy, gx, gy, gz, seq_n, seq_h, seq_hx, seq_hy, seq_mode,
                 sigma, tau_c, sig_e, tau_e, draws_x, draws_e, f_omega, f_phase, n_sub,
                 rec, snap, filt):
    psi = psi0.copy()
    d = psi.shape[0]
    n_groups = gz.shape[0]
    xi = sigma * draws_x[0]
    eps = sig_e * draws_e[0]
    k = 1
    i_rec = 0
    i_snap = 0
    i_filt = 0
    acc = np.zeros(n_groups)
    ham = np.empty((d, d), dtype=np.complex128)
    c = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    for s in range(seq_n.shape[0]):
        h = seq_h[s]
        ge = 0.0 if seq_mode[s] >= NO_DRIVE_NOISE else 1.0
        mode = seq_mode[s] % NO_DRIVE_NOISE
        ca = np.exp(-h / tau_c)
        cb = sigma * np.sqrt(-np.expm1(-2.0 * h / tau_c))
        ea = np.exp(-h / tau_e)
        eb = sig_e * np.sqrt(-np.expm1(-2.0 * h / tau_e))
        if mode == MODE_SNAPSHOT:
            _mag_dense_nb(psi, gx, gy, gz, snap[i_snap])
            i_snap += 1
        for g in range(n_groups):
            acc[g] = 0.0
        for j in range(seq_n[s]):
            dx = (1.0 + ge * eps) * seq_hx[s]
            dy = (1.0 + ge * eps) * seq_hy[s]
            for r in range(d):
                for q in range(d):
                    ham[r, q] = h0[r, q] + xi * fz[r, q] + dx * fx[r, q] + dy * fy[r, q]
            lam, v = np.linalg.eigh(ham)
            for r in range(d):
                acc_c = 0.0 + 0.0j
                for q in range(d):
                    acc_c += np.conj(v[q, r]) * psi[q]
                c[r] = acc_c
            if mode == MODE_FILTER:
                dtau = h / n_sub
                for qq in range(n_sub):
                    tau = (qq + 0.5) * dtau
                    for r in range(d):
                        tmp[r] = np.exp(-1j * lam[r] * tau) * c[r]
                    sq = np.sign(np.sin(f_omega * (j * h + tau) + f_phase))
                    for r in range(d):
                        pr = 0.0 + 0.0j
                        for q in range(d):
                            pr += v[r, q] * tmp[q]
                        pop = pr.real ** 2 + pr.imag ** 2
                        for g in range(n_groups):
                            acc[g] += 2.0 * gz[g, r] * pop * sq * dtau
            for r in range(d):
                tmp[r] = np.exp(-1j * lam[r] * h) * c[r]
            for r in range(d):
                pr = 0.0 + 0.0j
                for q in range(d):
                    pr += v[r, q] * tmp[q]
                psi[r] = pr
            xi = xi * ca + cb * draws_x[k]
            eps = eps * ea + eb * draws_e[k]
            k += 1
            if mode == MODE_RECORD:
                _mag_dense_nb(psi, gx, gy, gz, rec[i_rec])
                i_rec += 1
        if mode == MODE_FILTER:
            for g in range(n_groups):
                filt[i_filt, g] = acc[g]
            i_filt += 1
    return psi


# ---------------------------------------------------------------------------
# public entry points


def _outputs(seq_n, seq_mode, n_groups):
    seq_n = np.asarray(seq_n)
    seq_mode = np.asarray(seq_mode) % NO_DRIVE_NOISE
    n_rec = int(seq_n[seq_mode == MODE_RECORD].sum())
    n_snap = int(np.count_nonzero(seq_mode == MODE_SNAPSHOT))
    n_filt = int(np.count_nonzero(seq_mode == MODE_FILTER))
    return (
        np.zeros((n_rec, n_groups, 3)),
        np.zeros((n_snap, n_groups, 3)),
        np.zeros((n_filt, n_groups)),
    )


def _program_arrays(program):
    return (
        np.ascontiguousarray(program["n"], dtype=np.int64),
        np.ascontiguousarray(program["h"], dtype=np.float64),
        np.ascontiguousarray(program["hx"], dtype=np.float64),
        np.ascontiguousarray(program["hy"], dtype=np.float64),
        np.ascontiguousarray(program["mode"], dtype=np.int64),
    )


def spin_half_program(psi0, dz, weight, group, n_groups, program, noise, draws_x, draws_e,
                      filter_omega=0.0, filter_phase=0.0, n_sub=1, use_numba=None):
    """Run a program on independent spin-1/2 branches.

    Parameters
    ----------
    psi0 : (nb, 2) complex array
        Initial spinor of every branch.
    dz : (nb,) float array
        Static z term of every branch (rad/s).
    weight, group : (nb,) arrays
        Magnetization weight and group index per branch.
    program : mapping
        Arrays ``n, h, hx, hy, mode`` (one entry per stage occurrence).
    noise : tuple
        ``(sigma, tau_c, sigma_eps, tau_eps)``.
    draws_x, draws_e : float arrays
        Standard normal draws, ``total_steps + 1`` each.

    Returns
    -------
    psi : (nb, 2) complex array
    rec, snap, filt : float arrays
    """
    seq = _program_arrays(program)
    rec, snap, filt = _outputs(seq[0], seq[4], n_groups)
    use_numba = HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    fn = _spin_half_numba if use_numba else _spin_half_numpy
    sigma, tau_c, sig_e, tau_e = (float(x) for x in noise)
    psi = fn(
        np.ascontiguousarray(psi0, dtype=np.complex128),
        np.ascontiguousarray(dz, dtype=np.float64),
        np.ascontiguousarray(weight, dtype=np.float64),
        np.ascontiguousarray(group, dtype=np.int64),
        int(n_groups), *seq, sigma, tau_c, sig_e, tau_e,
        np.ascontiguousarray(draws_x, dtype=np.float64),
        np.ascontiguousarray(draws_e, dtype=np.float64),
        float(filter_omega), float(filter_phase), int(n_sub), rec, snap, filt,
    )
    return psi, rec, snap, filt


def dense_program(psi0, h0, fz, fx, fy, gx, gy, gz, program, noise, draws_x, draws_e,
                  filter_omega=0.0, filter_phase=0.0, n_sub=1, use_numba=None):
    """Run a program on one dense pure state.

    ``h0, fz, fx, fy`` are ``(d, d)`` matrices (rad/s for ``h0``); ``gx, gy``
    are ``(G, d, d)`` per-group operators and ``gz`` is the ``(G, d)``
    diagonal of the per-group ``F_z``. Other arguments as in
    :func:`spin_half_program`.
    """
    seq = _program_arrays(program)
    n_groups = gz.shape[0]
    rec, snap, filt = _outputs(seq[0], seq[4], n_groups)
    use_numba = HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)
    fn = _dense_numba if use_numba else _dense_numpy
    sigma, tau_c, sig_e, tau_e = (float(x) for x in noise)
    c = lambda m: np.ascontiguousarray(m, dtype=np.complex128)  # noqa: E731
    psi = fn(
        c(psi0), c(h0), c(fz), c(fx), c(fy), c(gx), c(gy),
        np.ascontiguousarray(gz, dtype=np.float64), *seq, sigma, tau_c, sig_e, tau_e,
        np.ascontiguousarray(draws_x, dtype=np.float64),
        np.ascontiguousarray(draws_e, dtype=np.float64),
        float(filter_omega), float(filter_phase), int(n_sub), rec, snap, filt,
    )
    return psi, rec, snap, filt
