"""Population traces and relaxation-rate extraction.

Rate protocol: donor population decay toward its stationary value is fit by
ordinary least squares on (t, ln|P_D - P_inf|). Points within 1e-6 of the
stationary value are excluded, at least 20 usable points are required, and
the fit window opens at the earliest decile of the usable range whose fit
reaches r^2 >= 0.98 (falling back to the best decile, flagged). The fitted
relaxation rate k_rel = k_f + k_b and the stationary value
P_inf = k_b / (k_f + k_b) determine the directional rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR_EV_PS
from .errors import DataError, FitError

_ZERO_BAND = 1e-6
_MIN_FIT_POINTS = 20
_R2_TARGET = 0.98
_R2_WARN = 0.9


@dataclass(frozen=True)
class PopulationTrace:
    """Electronic observables on the ps time grid."""

    t_ps: np.ndarray = field(repr=False)
    p_d: np.ndarray = field(repr=False)
    p_a: np.ndarray = field(repr=False)
    re_coh: np.ndarray = field(repr=False)
    im_coh: np.ndarray = field(repr=False)

    @classmethod
    def from_ensemble(cls, result) -> "PopulationTrace":
        coh = result.coherence
        return cls(
            t_ps=np.asarray(result.t_ps, dtype=float),
            p_d=result.populations[:, 0].copy(),
            p_a=result.populations[:, 1].copy(),
            re_coh=coh.real.copy(),
            im_coh=coh.imag.copy(),
        )


def populations(rho: np.ndarray, trace_tol: float = 1e-6) -> np.ndarray:
    """Electronic populations [P_D, P_A] from a density matrix.

    Accepts a purely electronic 2x2 matrix or a full electronic-major
    (2n x 2n) one, whose vibrational blocks are traced out; a leading time
    axis is optional and preserved in the output shape.
    """
    rho = np.asarray(rho)
    single = rho.ndim == 2
    if single:
        rho = rho[None]
    if (rho.ndim != 3 or rho.shape[1] != rho.shape[2]
            or rho.shape[1] % 2 or rho.shape[1] < 2):
        raise DataError(
            f"expected a (2n x 2n) density matrix or a stack of them, "
            f"got shape {np.asarray(rho).shape}"
        )
    tr = np.einsum("tii->t", rho).real
    worst = float(np.max(np.abs(tr - 1.0)))
    if worst > trace_tol:
        raise DataError(
            f"density-matrix trace deviates from 1 by {worst:.3e} "
            f"(tolerance {trace_tol:g})"
        )
    nv = rho.shape[1] // 2
    diag = np.einsum("tii->ti", rho).real
    out = np.stack([diag[:, :nv].sum(axis=1), diag[:, nv:].sum(axis=1)],
                   axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class StationaryEstimate:
    value: float
    n_tail: int
    flags: tuple = ()


def estimate_stationary(p: np.ndarray, tail_fraction: float = 0.2,
                        t: np.ndarray | None = None) -> StationaryEstimate:
    """Tail mean of a population series, flagged when it still trends.

    Uses the last tail_fraction of the series, never fewer than 50 points
    (or the whole series when shorter). The flag fires when the fitted tail
    slope moves the mean by more than three standard errors across the tail.
    """
    p = np.asarray(p, dtype=float)
    n = len(p)
    if n == 0:
        raise DataError("empty population series")
    k = max(int(round(tail_fraction * n)), 50)
    k = min(k, n)
    tail = p[n - k:]
    value = float(tail.mean())
    flags = []
    if k >= 3:
        x = np.arange(k, dtype=float) if t is None else np.asarray(t[n - k:])
        slope = np.polyfit(x, tail, 1)[0]
        se = tail.std(ddof=1) / np.sqrt(k) if k > 1 else 0.0
        if abs(slope) * (x[-1] - x[0]) > 3.0 * se and se > 0.0:
            flags.append("stationary_trend")
    return StationaryEstimate(value=value, n_tail=k, flags=tuple(flags))


@dataclass(frozen=True)
class RateFit:
    """Exponential-relaxation fit of a donor population trace."""

    k_rel: float          # ps^-1
    p_inf: float
    t0: float             # window start, ps
    r_squared: float
    window: tuple         # (first index, last index) into the input arrays
    k_stderr: float = 0.0
    flags: tuple = ()

    @property
    def k_forward(self) -> float:
        return self.k_rel * (1.0 - self.p_inf)

    @property
    def k_backward(self) -> float:
        return self.k_rel * self.p_inf


def _ols_line(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    denom = float(np.dot(x - x.mean(), x - x.mean()))
    if len(x) > 2 and denom > 0.0:
        slope_se = np.sqrt(ss_res / (len(x) - 2) / denom)
    else:
        slope_se = 0.0
    return slope, intercept, r2, slope_se


def choose_fit_window(t_ps: np.ndarray, log_dev: np.ndarray) -> tuple:
    """Earliest decile start reaching r^2 >= 0.98, else the best one.

    Returns (start_index, r_squared, flags) over the given usable series.
    """
    n = len(log_dev)
    starts = sorted({int(np.floor(d * n / 10.0)) for d in range(10)})
    best = None
    for s in starts:
        if n - s < _MIN_FIT_POINTS:
            break
        _, _, r2, _ = _ols_line(t_ps[s:], log_dev[s:])
        if best is None or r2 > best[1]:
            best = (s, r2)
        if r2 >= _R2_TARGET:
            return s, r2, ()
    if best is None:
        raise FitError(
            f"no fit window with at least {_MIN_FIT_POINTS} points available"
        )
    return best[0], best[1], ("window_fallback",)


def extract_rate(t_ps: np.ndarray, p_d: np.ndarray,
                 p_inf: float | None = None,
                 window: tuple | None = None) -> RateFit:
    """Fit k_rel from the log-linear decay of |P_D - P_inf|."""
    t_ps = np.asarray(t_ps, dtype=float)
    p_d = np.asarray(p_d, dtype=float)
    if t_ps.shape != p_d.shape:
        raise DataError("t_ps and p_d must have matching shapes")
    flags = []
    if p_inf is None:
        est = estimate_stationary(p_d, t=t_ps)
        p_inf = est.value
        flags.extend(est.flags)

    dev = p_d - p_inf
    usable = np.abs(dev) > _ZERO_BAND
    idx = np.nonzero(usable)[0]
    if len(idx) < _MIN_FIT_POINTS:
        raise FitError(
            f"only {len(idx)} points lie more than {_ZERO_BAND:g} from the "
            f"stationary value; need {_MIN_FIT_POINTS}"
        )
    # Keep the leading contiguous usable run: once the trace settles into the
    # zero band, later noisy excursions carry no rate information.
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    stop = idx[breaks[0]] + 1 if len(breaks) else idx[-1] + 1
    sel = idx[idx < stop]
    if len(sel) < _MIN_FIT_POINTS:
        sel = idx
        flags.append("noncontiguous_window")
    t_u = t_ps[sel]
    log_dev = np.log(np.abs(dev[sel]))

    if window is None:
        s, _, wflags = choose_fit_window(t_u, log_dev)
        flags.extend(wflags)
        lo, hi = sel[s], sel[-1]
    else:
        lo, hi = window
        inside = (sel >= lo) & (sel <= hi)
        if int(inside.sum()) < _MIN_FIT_POINTS:
            raise FitError(
                f"window {window} holds {int(inside.sum())} usable points; "
                f"need {_MIN_FIT_POINTS}"
            )
        s = int(np.argmax(inside))

    mask = (sel >= lo) & (sel <= hi)
    x = t_ps[sel[mask]]
    y = np.log(np.abs(dev[sel[mask]]))
    slope, _, r2, slope_se = _ols_line(x, y)
    k_rel = -slope
    if k_rel < 0.0:
        flags.append("negative_rate")
    if r2 < _R2_WARN:
        flags.append("poor_fit")
    return RateFit(
        k_rel=float(k_rel),
        p_inf=float(p_inf),
        t0=float(x[0]),
        r_squared=float(r2),
        window=(int(lo), int(hi)),
        k_stderr=float(slope_se),
        flags=tuple(flags),
    )


def instantaneous_rate(t_ps: np.ndarray, p_d: np.ndarray,
                       p_inf: float) -> np.ndarray:
    """Diagnostic -d ln|P_D - P_inf| / dt; NaN inside the zero band."""
    dev = np.abs(np.asarray(p_d, dtype=float) - p_inf)
    out = np.full(len(dev), np.nan)
    ok = dev > _ZERO_BAND
    if int(ok.sum()) >= 3:
        grad = np.gradient(np.log(dev[ok]), np.asarray(t_ps)[ok])
        out[ok] = -grad
    return out


def trace_from_arrays(t_ev_inv: np.ndarray, rho: np.ndarray) -> PopulationTrace:
    """Convenience builder from a bare (t, rho) pair in energy-time units."""
    pops = populations(rho)
    nv = rho.shape[1] // 2
    coh = (rho[:, 0, 1] if nv == 1
           else np.einsum("tnn->t", rho[:, :nv, nv:]))
    return PopulationTrace(
        t_ps=np.asarray(t_ev_inv) * HBAR_EV_PS,
        p_d=pops[:, 0],
        p_a=pops[:, 1],
        re_coh=coh.real.copy(),
        im_coh=coh.imag.copy(),
    )
