"""Bath spectral densities, correlation functions, and memory kernels.

Two spectral-density families are supported:

  ohmic       J(w) = 2 a w exp(-w/w_c)
  structured  J(w) = a w0^2 w / ((w0^2 - w^2)^2 + beta^2 w^2)

The correlation function is

  C(t) = (1/pi) * int_0^inf J(w) [coth(w/2T) cos(wt) - i sin(wt)] dw,

evaluated by adaptive Gauss-Kronrod panel quadrature on [0, Omega_max].
The w -> 0 end is regular because J(w) coth(w/2T) -> 2T * J(w)/w.

Memory kernels on a uniform grid:

  g0(t) = int_0^t C(u) du
  g1(t) = int_0^t u C(u) du
  g2(t) = int_0^t ds (t-s) C(t-s) g0(s)

computed with a cumulative per-interval parabolic rule (fourth order at
every grid index, no even/odd segment split) and an FFT convolution for g2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, DomainError, QuadratureError

# Gauss-Kronrod 15-point rule (QUADPACK dqk15 constants), positive half.
_XGK_HALF = np.array(
    [
        0.991455371120813,
        0.949107912342759,
        0.864864423359769,
        0.741531185599394,
        0.586087235467691,
        0.405845151377397,
        0.207784955007898,
        0.0,
    ]
)
_WGK_HALF = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
    ]
)
_WG_HALF = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
    ]
)


def _build_gk15():
    x = np.concatenate([-_XGK_HALF[:-1], _XGK_HALF[::-1]])
    order = np.argsort(x)
    x = x[order]
    wk = np.concatenate([_WGK_HALF[:-1], _WGK_HALF[::-1]])[order]
    wg = np.zeros(15)
    # Gauss-7 nodes sit at the odd Kronrod positions.
    wg[1::2] = np.concatenate([_WG_HALF[:-1], _WG_HALF[::-1]])
    return x, wk, wg


_GK_X, _GK_WK, _GK_WG = _build_gk15()


@dataclass(frozen=True)
class BathSpec:
    """Bath family, parameters, temperature, and stochastic coupling strength.

    family      : 'ohmic' or 'structured'
    alpha       : dimensionless coupling strength
    temperature : k_B T in eV
    gamma_E     : stochastic coupling operator strength (eV)
    omega_c     : ohmic cutoff (eV), required for the ohmic family
    omega_0     : structured peak frequency (eV), required for structured
    beta        : structured linewidth (eV), required for structured
    """

    family: str
    alpha: float
    temperature: float
    gamma_E: float = 0.0
    omega_c: float | None = None
    omega_0: float | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.family not in ("ohmic", "structured"):
            raise ConfigurationError(
                f"bath family must be 'ohmic' or 'structured', got {self.family!r}"
            )
        if self.alpha < 0.0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if self.temperature <= 0.0:
            raise DomainError(
                f"temperature must be > 0 (eV), got {self.temperature}"
            )
        if self.gamma_E < 0.0:
            raise DomainError(f"gamma_E must be >= 0, got {self.gamma_E}")
        if self.family == "ohmic":
            if self.omega_c is None or self.omega_c <= 0.0:
                raise ConfigurationError(
                    "ohmic family requires omega_c > 0"
                )
        else:
            if self.omega_0 is None or self.omega_0 <= 0.0:
                raise ConfigurationError(
                    "structured family requires omega_0 > 0"
                )
            if self.beta is None or self.beta < 0.0:
                raise ConfigurationError(
                    "structured family requires beta >= 0"
                )


@dataclass(frozen=True)
class CorrelationTable:
    """C(t) sampled on the uniform grid t_k = k*dt, k = 0..len(values)-1."""

    dt: float
    values: np.ndarray = field(repr=False)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))

    @property
    def c0(self) -> float:
        return float(self.values[0].real)


@dataclass(frozen=True)
class KernelTable:
    """g0, g1, g2 on the same uniform grid as the source CorrelationTable."""

    dt: float
    g0: np.ndarray = field(repr=False)
    g1: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)


def spectral_density(spec: BathSpec, omega) -> np.ndarray:
    """J(omega) for the selected family. Rejects negative frequencies."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise DomainError("spectral_density requires omega >= 0")
    if spec.family == "ohmic":
        j = 2.0 * spec.alpha * w * np.exp(-w / spec.omega_c)
    else:
        w0sq = spec.omega_0 ** 2
        denom = (w0sq - w * w) ** 2 + (spec.beta ** 2) * w * w
        with np.errstate(divide="ignore", invalid="ignore"):
            j = np.where(denom > 0.0, spec.alpha * w0sq * w / denom, np.inf)
        # beta = 0 leaves a pole at w = w0; J stays +inf there and the
        # quadrature reports non-convergence.
        j = np.where(w == 0.0, 0.0, j)
    if np.isscalar(omega):
        return float(j)
    return j


def j_over_omega(spec: BathSpec, omega) -> np.ndarray:
    """J(omega)/omega with its finite omega -> 0 limit."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise DomainError("j_over_omega requires omega >= 0")
    if spec.family == "ohmic":
        val = 2.0 * spec.alpha * np.exp(-w / spec.omega_c)
    else:
        w0sq = spec.omega_0 ** 2
        denom = (w0sq - w * w) ** 2 + (spec.beta ** 2) * w * w
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(denom > 0.0, spec.alpha * w0sq / denom, np.inf)
    if np.isscalar(omega):
        return float(val)
    return val


def _x_coth_x(x: np.ndarray) -> np.ndarray:
    """x*coth(x), regular at 0 (series below 1e-4 avoids 0/0)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = safe / np.tanh(safe)
    return np.where(small, 1.0 + x * x / 3.0, out)


def thermal_weight(spec: BathSpec, omega) -> np.ndarray:
    """J(omega)*coth(omega/2T), via the regular form 2T*(J/w)*x*coth(x)."""
    w = np.asarray(omega, dtype=float)
    x = w / (2.0 * spec.temperature)
    return j_over_omega(spec, w) * 2.0 * spec.temperature * _x_coth_x(x)


def omega_max(spec: BathSpec) -> float:
    """Upper quadrature cutoff: max(50 T, 20 * characteristic frequency)."""
    w_char = spec.omega_c if spec.family == "ohmic" else spec.omega_0
    return max(50.0 * spec.temperature, 20.0 * w_char)


@dataclass(frozen=True)
class QuadraturePlan:
    """Frozen node/weight sets for evaluating C(t) as two dot products."""

    omega: np.ndarray = field(repr=False)
    weight_re: np.ndarray = field(repr=False)  # includes 1/pi and coth factor
    weight_im: np.ndarray = field(repr=False)  # includes 1/pi
    n_panels: int = 0


_PLAN_CACHE: dict = {}


def _panel_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """GK15 nodes and half-widths for each panel [edges[i], edges[i+1]]."""
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GK_X[None, :]
    return nodes, half


def _refine_panels(spec: BathSpec, tau_probes: np.ndarray, rtol: float,
                   max_panels: int) -> np.ndarray:
    """Adaptively subdivide [0, Omega_max] until every probe integrand
    integrates to rtol (relative to C(0)) by the GK15-vs-G7 estimate."""
    w_max = omega_max(spec)
    tau_max = float(np.max(tau_probes))
    # Initial grid: resolve the spectral feature and the fastest probe
    # oscillation (two wavelengths per panel is ample for GK15).
    w_feat = (spec.omega_c if spec.family == "ohmic" else max(spec.beta, 1e-12))
    width = min(w_feat / 4.0, w_max / 32.0)
    if tau_max > 0.0:
        width = min(width, 4.0 * np.pi / tau_max)
    n0 = int(np.clip(np.ceil(w_max / width), 32, 4096))
    edges = np.linspace(0.0, w_max, n0 + 1)

    scale = None
    for _ in range(60):
        nodes, half = _panel_nodes(edges)
        flat = nodes.ravel()
        f_re = thermal_weight(spec, flat).reshape(nodes.shape) / np.pi
        f_im = (spectral_density(spec, flat).reshape(nodes.shape)) / np.pi
        if not (np.all(np.isfinite(f_re)) and np.all(np.isfinite(f_im))):
            raise QuadratureError(
                "correlation quadrature hit a non-finite integrand "
                f"(family={spec.family}, beta={spec.beta}); the spectral "
                "density has a pole on the integration path"
            )
        err = np.zeros(len(half))
        for tau in tau_probes:
            phase = nodes * tau
            for f, trig in ((f_re, np.cos(phase)), (f_im, np.sin(phase))):
                g = f * trig
                k_val = half * (g @ _GK_WK)
                g_val = half * (g @ _GK_WG)
                err = np.maximum(err, np.abs(k_val - g_val))
                if tau == 0.0 and f is f_re:
                    scale = float(np.abs(k_val.sum()))
        tol = rtol * max(scale, 1e-300)
        if err.sum() <= tol:
            return edges
        if len(half) >= max_panels:
            raise QuadratureError(
                "correlation quadrature failed to converge: "
                f"{len(half)} panels on [0, {w_max:g}], residual error "
                f"{err.sum():.3e} vs tolerance {tol:.3e} "
                f"(family={spec.family})"
            )
        split = err > tol / (2.0 * len(half))
        if not np.any(split):
            split[np.argmax(err)] = True
        new_edges = [edges[0]]
        for i in range(len(half)):
            if split[i]:
                new_edges.append(0.5 * (edges[i] + edges[i + 1]))
            new_edges.append(edges[i + 1])
        edges = np.array(new_edges)
    raise QuadratureError(
        "correlation quadrature exceeded the refinement iteration cap "
        f"({len(edges) - 1} panels, family={spec.family})"
    )


def quadrature_plan(spec: BathSpec, t_max: float,
                    rtol: float = 1e-8) -> QuadraturePlan:
    """Build (or fetch) the node/weight plan valid out to lag t_max."""
    key = (spec, round(float(t_max), 9), rtol)
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan
    if t_max > 0.0:
        probes = np.array([0.0, t_max / 64.0, t_max / 16.0, t_max / 4.0, t_max])
    else:
        probes = np.array([0.0])
    edges = _refine_panels(spec, probes, rtol, max_panels=20000)
    nodes, half = _panel_nodes(edges)
    flat = nodes.ravel()
    wk = (half[:, None] * _GK_WK[None, :]).ravel()
    plan = QuadraturePlan(
        omega=flat,
        weight_re=wk * thermal_weight(spec, flat) / np.pi,
        weight_im=wk * spectral_density(spec, flat) / np.pi,
        n_panels=len(half),
    )
    _PLAN_CACHE[key] = plan
    return plan


def correlation_function(spec: BathSpec, t_grid) -> CorrelationTable:
    """C(t) on a uniform non-negative grid, by adaptive GK15 quadrature."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise ConfigurationError("t_grid must be a non-empty 1D array")
    if np.any(t < 0.0):
        raise DomainError("correlation_function requires t >= 0")
    if len(t) > 1:
        steps = np.diff(t)
        dt = float(steps[0])
        if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise ConfigurationError("t_grid must be uniform")
    else:
        dt = 0.0
    plan = quadrature_plan(spec, float(t[-1]))
    values = np.empty(len(t), dtype=np.complex128)
    block = max(1, int(8.0e6 // max(len(plan.omega), 1)))
    for i in range(0, len(t), block):
        phase = np.outer(t[i:i + block], plan.omega)
        values[i:i + block] = (
            np.cos(phase) @ plan.weight_re
            - 1j * (np.sin(phase) @ plan.weight_im)
        )
    return CorrelationTable(dt=dt, values=values)


def correlation_at(spec: BathSpec, tau: float) -> complex:
    """C at a single lag (sign handled via C(-t) = conj C(t))."""
    a = abs(float(tau))
    plan = quadrature_plan(spec, a)
    phase = plan.omega * a
    val = complex(np.cos(phase) @ plan.weight_re
                  - 1j * (np.sin(phase) @ plan.weight_im))
    return val if tau >= 0.0 else np.conj(val)


def _cumulative_parabolic(f: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral of uniformly sampled f, exact for parabolas.

    Each increment integrates the parabola through (f[k-2], f[k-1], f[k])
    over the last interval; the first interval uses the forward parabola.
    Third order globally, so halving the step cuts the error eightfold.
    """
    n = len(f)
    out = np.zeros(n, dtype=np.complex128)
    if n == 1:
        return out
    if n == 2:
        out[1] = 0.5 * dt * (f[0] + f[1])
        return out
    out[1] = dt / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
    inc = dt / 12.0 * (-f[:-2] + 8.0 * f[1:-1] + 5.0 * f[2:])
    out[2:] = out[1] + np.cumsum(inc)
    return out


def memory_kernels(corr: CorrelationTable) -> KernelTable:
    """g0, g1, g2 from a tabulated correlation function."""
    c = np.asarray(corr.values, dtype=np.complex128)
    dt = corr.dt
    t = corr.t
    g0 = _cumulative_parabolic(c, dt)
    g1 = _cumulative_parabolic(t * c, dt)
    # g2(t) = int_0^t (t-s) C(t-s) g0(s) ds: a convolution of u*C(u) with g0.
    # Both factors vanish at index 0, so the plain convolution sum already
    # carries trapezoidal end weights.
    f = t * c
    n = len(c)
    if n >= 2:
        g2 = fftconvolve(f, g0)[:n] * dt
    else:
        g2 = np.zeros(1, dtype=np.complex128)
    g2[0] = 0.0
    return KernelTable(dt=dt, g0=g0, g1=g1, g2=g2)


def kernel_commutator_term(l_op: np.ndarray) -> np.ndarray:
    """The operator factor [L^dag, L] multiplying g2 in the expanded
    generator; identically zero for Hermitian coupling operators."""
    return l_op.conj().T @ l_op - l_op @ l_op.conj().T


def reorganization_energy_bath(spec: BathSpec) -> float:
    """lambda_bath = (1/pi) int_0^inf J(w)/w dw (integral convention)."""
    w_max = omega_max(spec)
    # Non-oscillatory integrand: reuse the GK machinery with tau = 0 probes.
    edges = _refine_lambda(spec, w_max)
    nodes, half = _panel_nodes(edges)
    f = j_over_omega(spec, nodes.ravel()).reshape(nodes.shape) / np.pi
    if not np.all(np.isfinite(f)):
        raise QuadratureError(
            "reorganization-energy quadrature hit a non-finite integrand "
            f"(family={spec.family}, beta={spec.beta})"
        )
    return float((half * (f @ _GK_WK)).sum())


def _refine_lambda(spec: BathSpec, w_max: float,
                   rtol: float = 1e-10, max_panels: int = 8000) -> np.ndarray:
    w_feat = (spec.omega_c if spec.family == "ohmic" else max(spec.beta, 1e-12))
    n0 = int(np.clip(np.ceil(w_max / (w_feat / 4.0)), 32, 2048))
    edges = np.linspace(0.0, w_max, n0 + 1)
    for _ in range(50):
        nodes, half = _panel_nodes(edges)
        f = j_over_omega(spec, nodes.ravel()).reshape(nodes.shape) / np.pi
        if not np.all(np.isfinite(f)):
            raise QuadratureError(
                "reorganization-energy quadrature hit a non-finite "
                f"integrand (family={spec.family}, beta={spec.beta})"
            )
        k_val = half * (f @ _GK_WK)
        g_val = half * (f @ _GK_WG)
        err = np.abs(k_val - g_val)
        tol = rtol * max(abs(k_val.sum()), 1e-300)
        if err.sum() <= tol:
            return edges
        if len(half) >= max_panels:
            raise QuadratureError(
                "reorganization-energy quadrature failed to converge "
                f"({len(half)} panels, residual {err.sum():.3e})"
            )
        split = err > tol / (2.0 * len(half))
        if not np.any(split):
            split[np.argmax(err)] = True
        new_edges = [edges[0]]
        for i in range(len(half)):
            if split[i]:
                new_edges.append(0.5 * (edges[i] + edges[i + 1]))
            new_edges.append(edges[i + 1])
        edges = np.array(new_edges)
    raise QuadratureError("reorganization-energy refinement cap exceeded")


def reorganization_energy_caption(spec: BathSpec) -> float:
    """Figure-caption convention lambda = alpha * omega_c / 2 (ohmic only)."""
    if spec.family != "ohmic":
        raise ConfigurationError(
            "the caption reorganization-energy convention is defined for "
            "the ohmic family only"
        )
    return 0.5 * spec.alpha * spec.omega_c


def reorganization_energy_mode(gamma: float, omega_v: float) -> float:
    """lambda_mode = 2 gamma^2 / omega_v for the sigma_z (b+b') coupling."""
    if omega_v <= 0.0:
        raise DomainError(f"omega_v must be > 0, got {omega_v}")
    return 2.0 * gamma * gamma / omega_v


def lambda_total(spec: BathSpec, gamma: float, omega_v: float,
                 convention: str = "caption") -> float:
    """lambda_bath + lambda_mode under the named bath convention."""
    if convention == "caption":
        lam_b = reorganization_energy_caption(spec)
    elif convention == "integral":
        lam_b = reorganization_energy_bath(spec)
    else:
        raise ConfigurationError(
            f"convention must be 'caption' or 'integral', got {convention!r}"
        )
    return lam_b + reorganization_energy_mode(gamma, omega_v)
