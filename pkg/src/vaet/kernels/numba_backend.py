"""numba trajectory integrators.

State vectors are electronic-major: index = elec * n_vib + n, donor block
first. All four integrators share conventions:

  * expectation values are taken against the normalized state;
  * the colored-noise solvers advance with classic RK4 on the half grid
    h = dt/2 (noise, correlation, and kernel tables are sampled at h);
  * the memory shift int_0^t C(t-s) u(s) ds is a trapezoid over committed
    half-grid samples of u = gamma_e * <L>, with the active stage supplying
    the endpoint value; u at the midpoint is committed from the third-stage
    input state, u at the step end from the renormalized result;
  * status 0 means a clean run, 1 means the norm left [1e-3, 1e3] or went
    non-finite (the caller resamples such trajectories).

No fastmath: summation order is part of the reproducibility contract.
"""

import numpy as np
from numba import njit

_NORM2_LO = 1e-6
_NORM2_HI = 1e6


@njit(cache=True, nogil=True)
def _norm2(psi):
    acc = 0.0
    for i in range(psi.size):
        acc += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    return acc


@njit(cache=True, nogil=True)
def run_closed(h_mat, psi0, dt, n_steps, out_stride, renorm):
    """RK4 on dpsi/dt = -i H psi."""
    d = psi0.size
    n_out = n_steps // out_stride + 1
    out = np.empty((n_out, d), dtype=np.complex128)
    psi = psi0.copy()
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    out[0] = psi
    for step in range(n_steps):
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += h_mat[i, j] * psi[j]
            k1[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + 0.5 * dt * k1[i]
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += h_mat[i, j] * tmp[j]
            k2[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + 0.5 * dt * k2[i]
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += h_mat[i, j] * tmp[j]
            k3[i] = -1j * acc
        for i in range(d):
            tmp[i] = psi[i] + dt * k3[i]
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += h_mat[i, j] * tmp[j]
            k4[i] = -1j * acc
        for i in range(d):
            psi[i] = psi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        nrm2 = _norm2(psi)
        if not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI:
            return out, 1
        if renorm:
            inv = 1.0 / np.sqrt(nrm2)
            for i in range(d):
                psi[i] *= inv
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


@njit(cache=True, nogil=True)
def _markov_drift(h_mat, phi, g2, coupling_x, dest):
    """Deterministic right-hand side: -iH phi plus the quadratic damping."""
    d = phi.size
    nv = d // 2
    nrm2 = _norm2(phi)
    if coupling_x:
        s = 0.0
        for n in range(nv):
            s += (np.conj(phi[n]) * phi[nv + n]).real
        e = 2.0 * s / nrm2
    else:
        a = 0.0
        for n in range(nv):
            a += phi[n].real * phi[n].real + phi[n].imag * phi[n].imag
            a -= (phi[nv + n].real * phi[nv + n].real
                  + phi[nv + n].imag * phi[nv + n].imag)
        e = a / nrm2
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += h_mat[i, j] * phi[j]
        if coupling_x:
            li = phi[nv + i] if i < nv else phi[i - nv]
        else:
            li = phi[i] if i < nv else -phi[i]
        dest[i] = (-1j * acc
                   - 0.5 * g2 * (phi[i] - 2.0 * e * li + e * e * phi[i]))


@njit(cache=True, nogil=True)
def run_markov(h_mat, psi0, z_re, gamma_e, dt, out_stride, renorm, coupling_x):
    """Split-step white-noise solver.

    RK4 advances the deterministic drift (Hamiltonian plus quadratic
    damping, stage-local expectation); the stochastic term then applies as
    an Euler-Maruyama kick with the post-drift expectation. A one-stage
    Euler drift warps the spectrum enough to detune the slow vibronic
    resonances that carry the transfer at small delta.

    Noise operator L = sigma_x (coupling_x) or sigma_z, both squaring to
    the identity, so the quadratic drift reduces to
    -(gamma_e^2/2) (1 - 2<L> L + <L>^2) psi. z_re holds one real sample per
    step with variance 1/dt; the Ito increment is z_re[j] * dt.
    """
    d = psi0.size
    nv = d // 2
    n_steps = z_re.size
    n_out = n_steps // out_stride + 1
    out = np.empty((n_out, d), dtype=np.complex128)
    psi = psi0.copy()
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    out[0] = psi
    g2 = gamma_e * gamma_e
    half = 0.5 * dt
    for step in range(n_steps):
        _markov_drift(h_mat, psi, g2, coupling_x, k1)
        for i in range(d):
            tmp[i] = psi[i] + half * k1[i]
        _markov_drift(h_mat, tmp, g2, coupling_x, k2)
        for i in range(d):
            tmp[i] = psi[i] + half * k2[i]
        _markov_drift(h_mat, tmp, g2, coupling_x, k3)
        for i in range(d):
            tmp[i] = psi[i] + dt * k3[i]
        _markov_drift(h_mat, tmp, g2, coupling_x, k4)
        for i in range(d):
            psi[i] = psi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i]
                                          + 2.0 * k3[i] + k4[i])
        nrm2 = _norm2(psi)
        if not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI:
            return out, 1
        if coupling_x:
            s = 0.0
            for n in range(nv):
                s += (np.conj(psi[n]) * psi[nv + n]).real
            e = 2.0 * s / nrm2
            for n in range(nv):
                tmp[n] = psi[nv + n]
                tmp[nv + n] = psi[n]
        else:
            a = 0.0
            for n in range(nv):
                a += psi[n].real * psi[n].real + psi[n].imag * psi[n].imag
                a -= (psi[nv + n].real * psi[nv + n].real
                      + psi[nv + n].imag * psi[nv + n].imag)
            e = a / nrm2
            for n in range(nv):
                tmp[n] = psi[n]
                tmp[nv + n] = -psi[nv + n]
        dw = z_re[step] * dt
        for i in range(d):
            psi[i] = psi[i] + gamma_e * (tmp[i] - e * psi[i]) * dw
        nrm2 = _norm2(psi)
        if not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI:
            return out, 1
        if renorm:
            inv = 1.0 / np.sqrt(nrm2)
            for i in range(d):
                psi[i] = psi[i] * inv
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


@njit(cache=True, nogil=True)
def _shift_base(c_half, u_hist, t_idx, mem_len):
    """Trapezoid over committed history: sum_j w_j C[t_idx - j] u[j],
    j up to t_idx - 1. Lag indices at or beyond mem_len are dropped.
    The half-weight of the j = 0 endpoint is applied outside the hot
    loop so the loop body stays branch-free."""
    j0 = t_idx - (mem_len - 1)
    if j0 < 0:
        j0 = 0
    acc = 0.0 + 0.0j
    for j in range(j0, t_idx):
        acc += c_half[t_idx - j] * u_hist[j]
    if j0 == 0 and t_idx > 0:
        acc -= 0.5 * c_half[t_idx] * u_hist[0]
    return acc


@njit(cache=True, nogil=True)
def run_nm_diag(h_mat, psi0, z_half, c_half, g0_half, g1_half,
                gamma_e, delta_sys, dt, out_stride, renorm):
    """RK4 colored-noise solver, sigma_z system-bath coupling.

    Stage derivative at half-grid index m with state phi:

      -i H phi
      + gamma_e (sz - <sz>) phi * (z[m] + shift)
      + g0[m] gamma_e^2 (<sz> sz - <sz>^2) phi
      + i g1[m] gamma_e^2 delta_sys [ sx phi + i <sz> sy phi
                                      - (<sx> + i <sz><sy>) phi ]
    """
    d = psi0.size
    nv = d // 2
    n_half = z_half.size
    n_steps = (n_half - 1) // 2
    mem_len = c_half.size
    c0 = c_half[0]
    h = 0.5 * dt
    n_out = n_steps // out_stride + 1
    out = np.empty((n_out, d), dtype=np.complex128)
    psi = psi0.copy()
    u_hist = np.zeros(n_half, dtype=np.complex128)
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    phi2 = np.empty(d, dtype=np.complex128)
    phi3 = np.empty(d, dtype=np.complex128)
    phi4 = np.empty(d, dtype=np.complex128)
    out[0] = psi
    g2 = gamma_e * gamma_e

    nrm2 = _norm2(psi)
    ez0 = 0.0
    for n in range(nv):
        ez0 += (psi[n].real * psi[n].real + psi[n].imag * psi[n].imag)
        ez0 -= (psi[nv + n].real * psi[nv + n].real
                + psi[nv + n].imag * psi[nv + n].imag)
    u_hist[0] = gamma_e * ez0 / nrm2

    for step in range(n_steps):
        m0 = 2 * step
        # stage 1: committed endpoint
        base1 = _shift_base(c_half, u_hist, m0, mem_len)
        _nm_diag_rhs(h_mat, psi, z_half[m0], h * (base1 + 0.5 * c0 * u_hist[m0])
                     if m0 > 0 else 0.0 * c0,
                     g0_half[m0], g1_half[m0], gamma_e, g2, delta_sys, nv, k1)
        for i in range(d):
            phi2[i] = psi[i] + h * k1[i]
        # stages 2 and 3 share the committed base at m0 + 1
        base21 = _shift_base(c_half, u_hist, m0 + 1, mem_len)
        ez2 = _ez_of(phi2, nv)
        _nm_diag_rhs(h_mat, phi2, z_half[m0 + 1],
                     h * (base21 + 0.5 * c0 * gamma_e * ez2),
                     g0_half[m0 + 1], g1_half[m0 + 1], gamma_e, g2, delta_sys,
                     nv, k2)
        for i in range(d):
            phi3[i] = psi[i] + h * k2[i]
        u_hist[m0 + 1] = gamma_e * _ez_of(phi3, nv)
        _nm_diag_rhs(h_mat, phi3, z_half[m0 + 1],
                     h * (base21 + 0.5 * c0 * u_hist[m0 + 1]),
                     g0_half[m0 + 1], g1_half[m0 + 1], gamma_e, g2, delta_sys,
                     nv, k3)
        for i in range(d):
            phi4[i] = psi[i] + dt * k3[i]
        base4 = _shift_base(c_half, u_hist, m0 + 2, mem_len)
        ez4 = _ez_of(phi4, nv)
        _nm_diag_rhs(h_mat, phi4, z_half[m0 + 2],
                     h * (base4 + 0.5 * c0 * gamma_e * ez4),
                     g0_half[m0 + 2], g1_half[m0 + 2], gamma_e, g2, delta_sys,
                     nv, k4)
        for i in range(d):
            psi[i] = psi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i]
                                          + k4[i])
        nrm2 = _norm2(psi)
        if not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI:
            return out, 1
        if renorm:
            inv = 1.0 / np.sqrt(nrm2)
            for i in range(d):
                psi[i] *= inv
        u_hist[m0 + 2] = gamma_e * _ez_of(psi, nv)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


@njit(cache=True, nogil=True)
def _ez_of(phi, nv):
    nrm2 = _norm2(phi)
    acc = 0.0
    for n in range(nv):
        acc += (phi[n].real * phi[n].real + phi[n].imag * phi[n].imag)
        acc -= (phi[nv + n].real * phi[nv + n].real
                + phi[nv + n].imag * phi[nv + n].imag)
    return acc / nrm2


@njit(cache=True, nogil=True)
def _ex_of(phi, nv):
    nrm2 = _norm2(phi)
    s = 0.0 + 0.0j
    for n in range(nv):
        s += np.conj(phi[n]) * phi[nv + n]
    return 2.0 * s.real / nrm2


@njit(cache=True, nogil=True)
def _nm_diag_rhs(h_mat, phi, z_val, shift, g0_val, g1_val, gamma_e, g2,
                 delta_sys, nv, k_out):
    d = phi.size
    nrm2 = _norm2(phi)
    s = 0.0 + 0.0j
    ez = 0.0
    for n in range(nv):
        s += np.conj(phi[n]) * phi[nv + n]
        ez += (phi[n].real * phi[n].real + phi[n].imag * phi[n].imag)
        ez -= (phi[nv + n].real * phi[nv + n].real
               + phi[nv + n].imag * phi[nv + n].imag)
    ez /= nrm2
    ex = 2.0 * s.real / nrm2
    ey = 2.0 * s.imag / nrm2
    zt = z_val + shift
    coef_sub = ex + 1j * ez * ey
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += h_mat[i, j] * phi[j]
        if i < nv:
            szp = phi[i]
            sxp = phi[nv + i]
            syp = -1j * phi[nv + i]
        else:
            szp = -phi[i]
            sxp = phi[i - nv]
            syp = 1j * phi[i - nv]
        k_out[i] = (-1j * acc
                    + gamma_e * (szp - ez * phi[i]) * zt
                    + g0_val * g2 * (ez * szp - ez * ez * phi[i])
                    + 1j * g1_val * g2 * delta_sys
                    * (sxp + 1j * ez * syp - coef_sub * phi[i]))


@njit(cache=True, nogil=True)
def run_nm_offdiag(h_mat, psi0, z_half, c_half, g0_half, g1_half, sq,
                   gamma_e, epsilon_sys, gamma_sys, dt, out_stride, renorm):
    """RK4 colored-noise solver, sigma_x system-bath coupling.

    Stage derivative at half-grid index m with state phi:

      -i H phi
      + gamma_e (sx - <sx>) phi * (z[m] + shift)
      + g0[m] gamma_e^2 (<sx> sx - <sx>^2) phi
      - i g1[m] gamma_e^2 [ epsilon_sys (sz - <sz>)
                            + 2 gamma_sys (sz x - <sz x>) ] phi

    sq[n] = sqrt(n + 1) encodes the mode displacement x = b + b'.
    """
    d = psi0.size
    nv = d // 2
    n_half = z_half.size
    n_steps = (n_half - 1) // 2
    mem_len = c_half.size
    c0 = c_half[0]
    h = 0.5 * dt
    n_out = n_steps // out_stride + 1
    out = np.empty((n_out, d), dtype=np.complex128)
    psi = psi0.copy()
    u_hist = np.zeros(n_half, dtype=np.complex128)
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    k4 = np.empty(d, dtype=np.complex128)
    phi2 = np.empty(d, dtype=np.complex128)
    phi3 = np.empty(d, dtype=np.complex128)
    phi4 = np.empty(d, dtype=np.complex128)
    out[0] = psi
    g2 = gamma_e * gamma_e

    u_hist[0] = gamma_e * _ex_of(psi, nv)

    for step in range(n_steps):
        m0 = 2 * step
        base1 = _shift_base(c_half, u_hist, m0, mem_len)
        _nm_offdiag_rhs(h_mat, psi, z_half[m0],
                        h * (base1 + 0.5 * c0 * u_hist[m0])
                        if m0 > 0 else 0.0 * c0,
                        g0_half[m0], g1_half[m0], sq, gamma_e, g2,
                        epsilon_sys, gamma_sys, nv, k1)
        for i in range(d):
            phi2[i] = psi[i] + h * k1[i]
        base21 = _shift_base(c_half, u_hist, m0 + 1, mem_len)
        ex2 = _ex_of(phi2, nv)
        _nm_offdiag_rhs(h_mat, phi2, z_half[m0 + 1],
                        h * (base21 + 0.5 * c0 * gamma_e * ex2),
                        g0_half[m0 + 1], g1_half[m0 + 1], sq, gamma_e, g2,
                        epsilon_sys, gamma_sys, nv, k2)
        for i in range(d):
            phi3[i] = psi[i] + h * k2[i]
        u_hist[m0 + 1] = gamma_e * _ex_of(phi3, nv)
        _nm_offdiag_rhs(h_mat, phi3, z_half[m0 + 1],
                        h * (base21 + 0.5 * c0 * u_hist[m0 + 1]),
                        g0_half[m0 + 1], g1_half[m0 + 1], sq, gamma_e, g2,
                        epsilon_sys, gamma_sys, nv, k3)
        for i in range(d):
            phi4[i] = psi[i] + dt * k3[i]
        base4 = _shift_base(c_half, u_hist, m0 + 2, mem_len)
        ex4 = _ex_of(phi4, nv)
        _nm_offdiag_rhs(h_mat, phi4, z_half[m0 + 2],
                        h * (base4 + 0.5 * c0 * gamma_e * ex4),
                        g0_half[m0 + 2], g1_half[m0 + 2], sq, gamma_e, g2,
                        epsilon_sys, gamma_sys, nv, k4)
        for i in range(d):
            psi[i] = psi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i]
                                          + k4[i])
        nrm2 = _norm2(psi)
        if not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI:
            return out, 1
        if renorm:
            inv = 1.0 / np.sqrt(nrm2)
            for i in range(d):
                psi[i] *= inv
        u_hist[m0 + 2] = gamma_e * _ex_of(psi, nv)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


@njit(cache=True, nogil=True)
def _nm_offdiag_rhs(h_mat, phi, z_val, shift, g0_val, g1_val, sq, gamma_e,
                    g2, epsilon_sys, gamma_sys, nv, k_out):
    d = phi.size
    nrm2 = _norm2(phi)
    s = 0.0 + 0.0j
    ez = 0.0
    for n in range(nv):
        s += np.conj(phi[n]) * phi[nv + n]
        ez += (phi[n].real * phi[n].real + phi[n].imag * phi[n].imag)
        ez -= (phi[nv + n].real * phi[nv + n].real
               + phi[nv + n].imag * phi[nv + n].imag)
    ez /= nrm2
    ex = 2.0 * s.real / nrm2
    zt = z_val + shift
    # sz x phi and its expectation (x tridiagonal: sq[n-1] below, sq[n] above)
    exz = 0.0
    for n in range(nv):
        lo = sq[n - 1] * phi[n - 1] if n > 0 else 0.0 + 0.0j
        hi = sq[n] * phi[n + 1] if n < nv - 1 else 0.0 + 0.0j
        xd = lo + hi
        lo_a = sq[n - 1] * phi[nv + n - 1] if n > 0 else 0.0 + 0.0j
        hi_a = sq[n] * phi[nv + n + 1] if n < nv - 1 else 0.0 + 0.0j
        xa = lo_a + hi_a
        exz += (np.conj(phi[n]) * xd - np.conj(phi[nv + n]) * xa).real
    exz /= nrm2
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += h_mat[i, j] * phi[j]
        if i < nv:
            n = i
            sxp = phi[nv + i]
            szp = phi[i]
            lo = sq[n - 1] * phi[n - 1] if n > 0 else 0.0 + 0.0j
            hi = sq[n] * phi[n + 1] if n < nv - 1 else 0.0 + 0.0j
            szxp = lo + hi
        else:
            n = i - nv
            sxp = phi[i - nv]
            szp = -phi[i]
            lo = sq[n - 1] * phi[nv + n - 1] if n > 0 else 0.0 + 0.0j
            hi = sq[n] * phi[nv + n + 1] if n < nv - 1 else 0.0 + 0.0j
            szxp = -(lo + hi)
        k_out[i] = (-1j * acc
                    + gamma_e * (sxp - ex * phi[i]) * zt
                    + g0_val * g2 * (ex * sxp - ex * ex * phi[i])
                    - 1j * g1_val * g2
                    * (epsilon_sys * (szp - ez * phi[i])
                       + 2.0 * gamma_sys * (szxp - exz * phi[i])))
