"""Rate scans: seeding, checkpointing, resume, and order independence."""

import json
import os
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vaet.bath import BathSpec
from vaet.errors import ConfigurationError, DataError, EnsembleError
from vaet.hilbert import SystemParams, build_hamiltonian, spectral_norm
from vaet.io import read_trace_csv
from vaet.noise import derive_seed
from vaet.observables import extract_rate
from vaet.propagator import PropagatorConfig, run_ensemble
from vaet.ratetheory import MJParams
from vaet.sweep import (
    RateMap,
    SweepSpec,
    activationless_bias,
    common_grid,
    compare_to_mj,
    run_sweep,
)

SYSTEM = SystemParams(epsilon=0.1487, delta=0.01, omega_v=0.1, gamma=0.0,
                      fock_dim=2)
BATH = BathSpec(family="ohmic", alpha=5e-4, temperature=0.025, gamma_E=0.08,
                omega_c=0.5)


def _spec(axes, duration_ps=0.2, n_traj=10, seed=77, **prop_kw):
    prop = PropagatorConfig(scheme="markov", dt=None, n_steps=1, n_traj=4,
                            master_seed=seed, chunk_size=5, **prop_kw)
    return SweepSpec(system=SYSTEM, bath=BATH, prop=prop, coupling="diagonal",
                     duration_ps=duration_ps,
                     axes=axes, master_seed=seed, n_traj=n_traj, p_inf=0.5)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        _spec(axes=(("tilt", np.array([0.1])),))
    with pytest.raises(ConfigurationError):
        _spec(axes=())
    with pytest.raises(ConfigurationError):
        _spec(axes=(("epsilon", np.array([])),))


def test_common_grid_honors_explicit_dt():
    spec = _spec(axes=(("epsilon", np.array([0.1, 0.2])),))
    spec = replace(spec, prop=replace(spec.prop, dt=0.05))
    dt, n_steps = common_grid(spec)
    assert dt == 0.05
    assert n_steps >= spec.duration_ps / 6.582e-4 / dt - 1


def test_common_grid_uses_stiffest_point():
    spec = _spec(axes=(("epsilon", np.array([0.05, 0.8])),))
    dt, _ = common_grid(spec)
    worst = spectral_norm(build_hamiltonian(replace(SYSTEM, epsilon=0.8)))
    assert dt == pytest.approx(0.1 / worst)


def test_single_point_sweep_matches_direct_run():
    eps = 0.12
    spec = _spec(axes=(("epsilon", np.array([eps])),))
    result = run_sweep(spec)
    assert result.shape == (1,)

    dt, n_steps = common_grid(spec)
    prop = replace(spec.prop, dt=dt, n_steps=n_steps,
                   master_seed=derive_seed(spec.master_seed, 0),
                   n_traj=spec.n_traj)
    ens = run_ensemble(replace(SYSTEM, epsilon=eps), BATH, prop, "diagonal")
    fit = extract_rate(ens.t_ps, ens.populations[:, 0], p_inf=0.5)
    assert result.k[0] == pytest.approx(fit.k_rel, rel=1e-12)
    assert result.p_inf[0] == 0.5


def test_order_permutation_is_invisible():
    axes = (("epsilon", np.linspace(0.08, 0.2, 4)),)
    a = run_sweep(_spec(axes))
    b = run_sweep(_spec(axes), order=[3, 1, 0, 2])
    assert np.array_equal(a.k, b.k)
    assert np.array_equal(a.p_inf, b.p_inf)
    assert np.array_equal(a.r2, b.r2)
    with pytest.raises(ConfigurationError):
        run_sweep(_spec(axes), order=[0, 1, 2])


def test_resume_from_truncated_checkpoint(tmp_path):
    axes = (("epsilon", np.linspace(0.08, 0.2, 4)),)
    full_ck = str(tmp_path / "full.jsonl")
    fresh = run_sweep(_spec(axes), checkpoint_path=full_ck)
    lines = open(full_ck, encoding="utf-8").read().strip().splitlines()
    assert len(lines) == 4

    # Simulate an interrupted run: keep only the first two records.
    part_ck = str(tmp_path / "part.jsonl")
    with open(part_ck, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines[:2]) + "\n")
    resumed = run_sweep(_spec(axes), checkpoint_path=part_ck)
    assert np.array_equal(fresh.k, resumed.k)
    assert np.array_equal(fresh.stderr, resumed.stderr)
    # The completed checkpoint now holds every point exactly once.
    recs = [json.loads(s) for s in open(part_ck, encoding="utf-8")]
    assert sorted(r["point"] for r in recs) == [0, 1, 2, 3]


def test_resume_refuses_mismatched_parameters(tmp_path):
    axes = (("epsilon", np.array([0.1, 0.15])),)
    ck = str(tmp_path / "ck.jsonl")
    run_sweep(_spec(axes), checkpoint_path=ck)
    shifted = (("epsilon", np.array([0.1, 0.16])),)
    with pytest.raises(DataError):
        run_sweep(_spec(shifted), checkpoint_path=ck)


def test_budget_exhaustion_keeps_checkpoint(tmp_path):
    axes = (("epsilon", np.linspace(0.08, 0.2, 4)),)
    ck = str(tmp_path / "ck.jsonl")
    with pytest.raises(EnsembleError, match="budget"):
        run_sweep(_spec(axes), checkpoint_path=ck, budget_s=0.0)
    assert os.path.exists(ck)
    # The budget only interrupts between points; resuming finishes the job.
    done = run_sweep(_spec(axes), checkpoint_path=ck)
    assert np.all(np.isfinite(done.k))


def test_flagged_points_dump_their_trace(tmp_path):
    # A barely damped oscillation fits the exponential model poorly; the
    # sweep must then write the underlying trace next to the number.
    osc_system = replace(SYSTEM, delta=0.08)
    weak = replace(BATH, gamma_E=0.002)
    prop = PropagatorConfig(scheme="markov", dt=None, n_steps=1, n_traj=4,
                            master_seed=5, chunk_size=5)
    spec = SweepSpec(system=osc_system, bath=weak, prop=prop,
                     coupling="diagonal", duration_ps=0.25,
                     axes=(("epsilon", np.array([0.0])),),
                     master_seed=5, n_traj=6, p_inf=0.0)
    out = run_sweep(spec, trace_dir=str(tmp_path))
    rec = out.records[0]
    assert rec["flags"], "expected a quality flag on the oscillatory fit"
    assert "trace_path" in rec
    echo, cols = read_trace_csv(rec["trace_path"])
    assert len(cols["t_ps"]) > 10


def test_rate_map_argmax_skips_nan():
    rm = RateMap(axis_names=("epsilon",),
                 axis_values=(np.array([0.1, 0.2, 0.3]),),
                 k=np.array([np.nan, 0.5, 0.2]),
                 p_inf=np.full(3, 0.5), r2=np.ones(3),
                 stderr=np.zeros(3))
    assert rm.argmax() == (0.2,)
    assert rm.shape == (3,)


def test_activationless_bias_combines_both_reservoirs():
    bath = BathSpec(family="ohmic", alpha=0.05, temperature=0.025,
                    gamma_E=0.05, omega_c=0.5)
    assert activationless_bias(bath, 0.1, 0.1487) == pytest.approx(
        0.0125 + 0.02 / 0.1487, rel=1e-12)


def test_compare_to_mj_reports_peak_offset():
    eps = np.linspace(0.05, 0.25, 5)
    k = np.array([0.1, 0.2, 0.9, 0.3, 0.1])
    rm = RateMap(axis_names=("epsilon",), axis_values=(eps,), k=k,
                 p_inf=np.full(5, 0.5), r2=np.ones(5), stderr=np.zeros(5))
    base = MJParams(epsilon=0.15, delta=0.001, gamma=0.1, omega_v=0.1487,
                    lambda_s=0.0125, temperature=0.025)
    rep = compare_to_mj(rm, base)
    assert rep["peak_sim_eps"] == pytest.approx(0.15)
    assert np.isfinite(rep["peak_offset_steps"])
    assert "median" in rep["summary"]


def test_two_axis_sweep_shape():
    axes = (("epsilon", np.array([0.1, 0.15])),
            ("gamma_E", np.array([0.05, 0.08, 0.1])))
    out = run_sweep(_spec(axes, n_traj=6))
    assert out.shape == (2, 3)
    assert out.k.shape == (2, 3)
    assert len(out.records) == 6
