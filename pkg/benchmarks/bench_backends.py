#!/usr/bin/env python3
"""Time the compiled kernels against the pure-numpy fallback.

Feeds one identical colored-noise trajectory through both backends for
the diagonal and off-diagonal memory schemes and reports wall time,
speedup, and the worst state-vector deviation between the two outputs.
The deviation stays at the reassociation level (~1e-12) because both
paths evaluate the same arithmetic in different groupings.

Run from the repo root after installation:

    python3 benchmarks/bench_backends.py --steps 2000
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vaet.bath import BathSpec, CorrelationTable, correlation_function, \
    memory_kernels
from vaet.hilbert import SystemParams, build_hamiltonian, donor_ground_state
from vaet.kernels import numpy_backend
from vaet.noise import derive_seed, sample_noise
from vaet.propagator import resolve_dt

try:
    from vaet.kernels import numba_backend
except ImportError:
    numba_backend = None

_MEM_TAIL_REL = 1e-3


def _problem(n_steps: int, fock_dim: int, seed: int):
    """Same table assembly as the production path: real quadrature of the
    correlation normalized to C(0) = 1, unit-variance real drive, and the
    tail-mass memory cutoff."""
    system = SystemParams(epsilon=0.1487, delta=1e-4, omega_v=0.1487,
                          gamma=0.05, fock_dim=fock_dim)
    bath = BathSpec(family="structured", alpha=0.08, temperature=0.025,
                    gamma_E=0.01, omega_0=0.1, beta=0.005)
    dt = resolve_dt(system, None)
    h = 0.5 * dt
    t_half = np.arange(2 * n_steps + 1) * h
    corr = correlation_function(bath, t_half)
    c_hat = (corr.values.real / corr.c0).astype(np.complex128)
    kern = memory_kernels(CorrelationTable(dt=h, values=c_hat))
    tail_mass = np.cumsum(np.abs(c_hat.real)[::-1])[::-1]
    above = np.nonzero(tail_mass > _MEM_TAIL_REL * tail_mass[0])[0]
    mem_len = min(max(int(above[-1]) + 2 if above.size else 2, 2),
                  t_half.size)
    scale = np.sqrt(2.0 / corr.c0)
    z = (sample_noise(bath, t_half, derive_seed(seed, 0)).z.real
         * scale).astype(np.complex128)
    h_mat = build_hamiltonian(system)
    psi0 = donor_ground_state(fock_dim)
    sq = np.sqrt(np.arange(1, fock_dim + 1, dtype=np.float64))
    return system, bath, h_mat, psi0, z, c_hat[:mem_len], kern, sq, dt


def _time(fn, *args, repeats: int = 3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out, status = fn(*args)
        best = min(best, time.perf_counter() - t0)
    if status != 0:
        raise RuntimeError(f"kernel reported bad status {status}")
    return out, best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--fock", type=int, default=2)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    system, bath, h_mat, psi0, z, c_mem, kern, sq, dt = _problem(
        args.steps, args.fock, args.seed)
    gamma_e = bath.gamma_E
    print(f"steps={args.steps} fock_dim={args.fock} dt={dt:.4g} "
          f"mem_len={c_mem.size} (of {kern.g0.size} half-grid points)")

    cases = {
        "nm_diag": (("run_nm_diag",),
                    (h_mat, psi0, z, c_mem, kern.g0, kern.g1,
                     gamma_e, system.delta, dt, 10, True)),
        "nm_offdiag": (("run_nm_offdiag",),
                       (h_mat, psi0, z, c_mem, kern.g0, kern.g1, sq,
                        gamma_e, system.epsilon, system.gamma, dt, 10,
                        True)),
    }
    for name, ((fn_name,), call_args) in cases.items():
        np_fn = getattr(numpy_backend, fn_name)
        out_np, t_np = _time(np_fn, *call_args, repeats=args.repeats)
        if numba_backend is not None:
            nb_fn = getattr(numba_backend, fn_name)
            nb_fn(*call_args)  # warm the JIT cache before timing
            out_nb, t_nb = _time(nb_fn, *call_args, repeats=args.repeats)
            dev = float(np.max(np.abs(out_np - out_nb)))
            line = (f"{name:11s}: numpy {t_np * 1e3:8.1f} ms   "
                    f"numba {t_nb * 1e3:8.1f} ms   "
                    f"speedup {t_np / t_nb:5.1f}x   max|dpsi| {dev:.2e}")
        else:
            line = f"{name:11s}: numpy {t_np * 1e3:8.1f} ms   (numba absent)"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
