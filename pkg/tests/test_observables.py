"""Population reduction and exponential-relaxation rate extraction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vaet.errors import DataError, FitError
from vaet.observables import (
    PopulationTrace,
    estimate_stationary,
    extract_rate,
    instantaneous_rate,
    populations,
    trace_from_arrays,
)


def _two_state_trace(k_rel, p_inf, t_max=4.0, n=401):
    t = np.linspace(0.0, t_max, n)
    return t, p_inf + (1.0 - p_inf) * np.exp(-k_rel * t)


def test_populations_from_density_blocks():
    rho = np.diag([0.3, 0.1, 0.25, 0.35]).astype(np.complex128)
    p = populations(rho, trace_tol=1e-9)
    assert_allclose(p, [0.4, 0.6], atol=1e-12)


def test_populations_rejects_trace_violation():
    rho = np.diag([0.9, 0.0, 0.0, 0.0]).astype(np.complex128)
    with pytest.raises(DataError):
        populations(rho, trace_tol=1e-6)


def test_stationary_estimate_uses_tail():
    p = np.concatenate([np.linspace(1.0, 0.4, 50), np.full(50, 0.4)])
    est = estimate_stationary(p, tail_fraction=0.2)
    assert est.value == pytest.approx(0.4, abs=1e-12)


def test_rate_recovery_exact_given_p_inf():
    t, p = _two_state_trace(5.0, 0.3)
    fit = extract_rate(t, p, p_inf=0.3)
    assert fit.k_rel == pytest.approx(5.0, abs=1e-10)
    assert fit.r_squared > 1.0 - 1e-12
    assert fit.k_stderr < 1e-10


def test_rate_recovery_with_estimated_stationary_value():
    t, p = _two_state_trace(5.0, 0.3, t_max=6.0, n=601)
    fit = extract_rate(t, p)
    assert fit.p_inf == pytest.approx(0.3, abs=1e-6)
    assert fit.k_rel == pytest.approx(5.0, rel=1e-4)


def test_forward_backward_split():
    # k_f = 3.5, k_b = 1.5: relaxation rate is the sum and the stationary
    # donor population is k_b over the sum.
    k_f, k_b = 3.5, 1.5
    t, p = _two_state_trace(k_f + k_b, k_b / (k_f + k_b))
    fit = extract_rate(t, p, p_inf=k_b / (k_f + k_b))
    assert fit.k_forward == pytest.approx(k_f, rel=1e-6)
    assert fit.k_backward == pytest.approx(k_b, rel=1e-6)


def test_rate_fit_explicit_window():
    t, p = _two_state_trace(2.0, 0.5)
    fit = extract_rate(t, p, p_inf=0.5, window=(10, 200))
    assert fit.window == (10, 200)
    assert fit.k_rel == pytest.approx(2.0, abs=1e-9)


def test_growing_deviation_flags_negative_rate():
    # Population drifting away from the claimed stationary value.
    t = np.linspace(0.0, 2.0, 200)
    p = 0.4 + 0.05 * np.exp(0.8 * t)
    fit = extract_rate(t, p, p_inf=0.4)
    assert fit.k_rel < 0.0
    assert "negative_rate" in fit.flags


def test_flat_trace_raises():
    t = np.linspace(0.0, 2.0, 100)
    with pytest.raises(FitError):
        extract_rate(t, np.full(100, 0.5), p_inf=0.5)


def test_mismatched_shapes_rejected():
    with pytest.raises(DataError):
        extract_rate(np.arange(5.0), np.arange(6.0))


def test_instantaneous_rate_constant_for_pure_exponential():
    t, p = _two_state_trace(4.0, 0.2, t_max=1.0, n=201)
    k_t = instantaneous_rate(t, p, 0.2)
    good = np.isfinite(k_t)
    assert good.sum() > 150
    assert_allclose(k_t[good][5:-5], 4.0, rtol=1e-3)


def test_instantaneous_rate_nan_inside_zero_band():
    t = np.linspace(0.0, 1.0, 50)
    k_t = instantaneous_rate(t, np.full(50, 0.5), 0.5)
    assert np.all(np.isnan(k_t))


def test_trace_round_trip_from_arrays():
    t = np.linspace(0.0, 100.0, 11)
    rho = np.zeros((11, 2, 2), dtype=np.complex128)
    rho[:, 0, 0] = np.linspace(1.0, 0.6, 11)
    rho[:, 1, 1] = 1.0 - rho[:, 0, 0]
    rho[:, 0, 1] = 0.1 + 0.05j
    rho[:, 1, 0] = np.conj(rho[:, 0, 1])
    trace = trace_from_arrays(t, rho)
    assert isinstance(trace, PopulationTrace)
    from vaet.constants import HBAR_EV_PS
    assert_allclose(trace.t_ps, t * HBAR_EV_PS)
    assert_allclose(trace.p_d + trace.p_a, 1.0, atol=1e-12)
    assert_allclose(trace.re_coh, 0.1, atol=1e-12)
    assert_allclose(trace.im_coh, 0.05, atol=1e-12)
