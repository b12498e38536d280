"""Pure-numpy twin of the numba integrators.

Same stage structure, same commit points, same status codes; used when the
VAET_BACKEND env flag selects it or numba is unavailable. Results agree with
the numba path to floating-point reassociation level (different dot-product
orderings), not bitwise.
"""

import numpy as np

_NORM2_LO = 1e-6
_NORM2_HI = 1e6


def _bad(nrm2) -> bool:
    return not np.isfinite(nrm2) or nrm2 < _NORM2_LO or nrm2 > _NORM2_HI


def run_closed(h_mat, psi0, dt, n_steps, out_stride, renorm):
    d = psi0.size
    n_out = n_steps // out_stride + 1
    out = np.empty((n_out, d), dtype=np.complex128)
    psi = psi0.copy()
    out[0] = psi

    def rhs(phi):
        return -1j * (h_mat @ phi)

    for step in range(n_steps):
        k1 = rhs(psi)
        k2 = rhs(psi + 0.5 * dt * k1)
        k3 = rhs(psi + 0.5 * dt * k2)
        k4 = rhs(psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm2 = float(np.vdot(psi, psi).real)
        if _bad(nrm2):
            return out, 1
        if renorm:
            psi = psi / np.sqrt(nrm2)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


def run_markov(h_mat, psi0, z_re, gamma_e, dt, out_stride, renorm, coupling_x):
    """Split-step white-noise solver.

    The deterministic drift (Hamiltonian plus quadratic damping with the
    stage-local expectation) advances by classical RK4; the stochastic term
    applies afterwards as an Euler-Maruyama kick with the post-drift
    expectation. A one-stage Euler drift warps the spectrum enough to
    detune the slow vibronic resonances that carry the transfer at small
    delta, so the drift needs the higher-order stage.

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
    out[0] = psi
    g2 = gamma_e * gamma_e

    def lop(phi):
        if coupling_x:
            return np.concatenate([phi[nv:], phi[:nv]])
        return np.concatenate([phi[:nv], -phi[nv:]])

    def drift(phi):
        nrm2 = float(np.vdot(phi, phi).real)
        lphi = lop(phi)
        e = float(np.vdot(phi, lphi).real) / nrm2
        return (-1j * (h_mat @ phi)
                - 0.5 * g2 * (phi - 2.0 * e * lphi + e * e * phi))

    for step in range(n_steps):
        k1 = drift(psi)
        k2 = drift(psi + 0.5 * dt * k1)
        k3 = drift(psi + 0.5 * dt * k2)
        k4 = drift(psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm2 = float(np.vdot(psi, psi).real)
        if _bad(nrm2):
            return out, 1
        lpsi = lop(psi)
        e = float(np.vdot(psi, lpsi).real) / nrm2
        psi = psi + gamma_e * (lpsi - e * psi) * (z_re[step] * dt)
        nrm2 = float(np.vdot(psi, psi).real)
        if _bad(nrm2):
            return out, 1
        if renorm:
            psi = psi / np.sqrt(nrm2)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


def _shift_base(c_half, u_hist, t_idx, mem_len):
    """Trapezoid over committed history, excluding the t_idx endpoint."""
    if t_idx == 0:
        return 0.0 + 0.0j
    j0 = max(0, t_idx - (mem_len - 1))
    ker = c_half[1: t_idx - j0 + 1][::-1]
    acc = complex(np.dot(ker, u_hist[j0:t_idx]))
    if j0 == 0:
        acc -= 0.5 * c_half[t_idx] * u_hist[0]
    return acc


def _ez(phi, nv):
    nrm2 = float(np.vdot(phi, phi).real)
    return (float(np.vdot(phi[:nv], phi[:nv]).real)
            - float(np.vdot(phi[nv:], phi[nv:]).real)) / nrm2


def _ex(phi, nv):
    nrm2 = float(np.vdot(phi, phi).real)
    return 2.0 * float(np.vdot(phi[:nv], phi[nv:]).real) / nrm2


def _xop(v, sq):
    out = np.zeros_like(v)
    nv = v.size
    if nv > 1:
        out[1:] = sq[: nv - 1] * v[:-1]
        out[:-1] += sq[: nv - 1] * v[1:]
    return out


def run_nm_diag(h_mat, psi0, z_half, c_half, g0_half, g1_half,
                gamma_e, delta_sys, dt, out_stride, renorm):
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
    out[0] = psi
    g2 = gamma_e * gamma_e

    def rhs(phi, m, shift):
        nrm2 = float(np.vdot(phi, phi).real)
        don, acc = phi[:nv], phi[nv:]
        s = complex(np.vdot(don, acc))
        ez = (float(np.vdot(don, don).real)
              - float(np.vdot(acc, acc).real)) / nrm2
        ex = 2.0 * s.real / nrm2
        ey = 2.0 * s.imag / nrm2
        zt = z_half[m] + shift
        szp = np.concatenate([don, -acc])
        sxp = np.concatenate([acc, don])
        syp = np.concatenate([-1j * acc, 1j * don])
        return (-1j * (h_mat @ phi)
                + gamma_e * (szp - ez * phi) * zt
                + g0_half[m] * g2 * (ez * szp - ez * ez * phi)
                + 1j * g1_half[m] * g2 * delta_sys
                * (sxp + 1j * ez * syp - (ex + 1j * ez * ey) * phi))

    u_hist[0] = gamma_e * _ez(psi, nv)
    for step in range(n_steps):
        m0 = 2 * step
        shift1 = (h * (_shift_base(c_half, u_hist, m0, mem_len)
                       + 0.5 * c0 * u_hist[m0]) if m0 > 0 else 0.0 + 0.0j)
        k1 = rhs(psi, m0, shift1)
        phi2 = psi + h * k1
        base21 = _shift_base(c_half, u_hist, m0 + 1, mem_len)
        k2 = rhs(phi2, m0 + 1,
                 h * (base21 + 0.5 * c0 * gamma_e * _ez(phi2, nv)))
        phi3 = psi + h * k2
        u_hist[m0 + 1] = gamma_e * _ez(phi3, nv)
        k3 = rhs(phi3, m0 + 1, h * (base21 + 0.5 * c0 * u_hist[m0 + 1]))
        phi4 = psi + dt * k3
        base4 = _shift_base(c_half, u_hist, m0 + 2, mem_len)
        k4 = rhs(phi4, m0 + 2,
                 h * (base4 + 0.5 * c0 * gamma_e * _ez(phi4, nv)))
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm2 = float(np.vdot(psi, psi).real)
        if _bad(nrm2):
            return out, 1
        if renorm:
            psi = psi / np.sqrt(nrm2)
        u_hist[m0 + 2] = gamma_e * _ez(psi, nv)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0


def run_nm_offdiag(h_mat, psi0, z_half, c_half, g0_half, g1_half, sq,
                   gamma_e, epsilon_sys, gamma_sys, dt, out_stride, renorm):
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
    out[0] = psi
    g2 = gamma_e * gamma_e

    def rhs(phi, m, shift):
        nrm2 = float(np.vdot(phi, phi).real)
        don, acc = phi[:nv], phi[nv:]
        ez = (float(np.vdot(don, don).real)
              - float(np.vdot(acc, acc).real)) / nrm2
        ex = 2.0 * float(np.vdot(don, acc).real) / nrm2
        zt = z_half[m] + shift
        xd = _xop(don, sq)
        xa = _xop(acc, sq)
        szxp = np.concatenate([xd, -xa])
        exz = (float(np.vdot(don, xd).real)
               - float(np.vdot(acc, xa).real)) / nrm2
        szp = np.concatenate([don, -acc])
        sxp = np.concatenate([acc, don])
        return (-1j * (h_mat @ phi)
                + gamma_e * (sxp - ex * phi) * zt
                + g0_half[m] * g2 * (ex * sxp - ex * ex * phi)
                - 1j * g1_half[m] * g2
                * (epsilon_sys * (szp - ez * phi)
                   + 2.0 * gamma_sys * (szxp - exz * phi)))

    u_hist[0] = gamma_e * _ex(psi, nv)
    for step in range(n_steps):
        m0 = 2 * step
        shift1 = (h * (_shift_base(c_half, u_hist, m0, mem_len)
                       + 0.5 * c0 * u_hist[m0]) if m0 > 0 else 0.0 + 0.0j)
        k1 = rhs(psi, m0, shift1)
        phi2 = psi + h * k1
        base21 = _shift_base(c_half, u_hist, m0 + 1, mem_len)
        k2 = rhs(phi2, m0 + 1,
                 h * (base21 + 0.5 * c0 * gamma_e * _ex(phi2, nv)))
        phi3 = psi + h * k2
        u_hist[m0 + 1] = gamma_e * _ex(phi3, nv)
        k3 = rhs(phi3, m0 + 1, h * (base21 + 0.5 * c0 * u_hist[m0 + 1]))
        phi4 = psi + dt * k3
        base4 = _shift_base(c_half, u_hist, m0 + 2, mem_len)
        k4 = rhs(phi4, m0 + 2,
                 h * (base4 + 0.5 * c0 * gamma_e * _ex(phi4, nv)))
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm2 = float(np.vdot(psi, psi).real)
        if _bad(nrm2):
            return out, 1
        if renorm:
            psi = psi / np.sqrt(nrm2)
        u_hist[m0 + 2] = gamma_e * _ex(psi, nv)
        if (step + 1) % out_stride == 0:
            out[(step + 1) // out_stride] = psi
    return out, 0
