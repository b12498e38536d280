"""Parameter scans of the extracted transfer rate.

Every grid point runs an independent ensemble whose master seed derives
from the sweep seed and the point's flat index, so results do not depend on
execution order and a permuted or resumed run reproduces the same RateMap
bitwise. An append-only JSONL checkpoint holds one finished record per
point; resuming skips points whose parameters match the checkpoint.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bath import BathSpec, reorganization_energy_caption
from .constants import HBAR_EV_PS
from .errors import ConfigurationError, DataError, EnsembleError, VaetError
from .hilbert import SystemParams, build_hamiltonian, spectral_norm
from .io import write_trace_csv
from .noise import derive_seed
from .observables import PopulationTrace, extract_rate
from .propagator import PropagatorConfig, run_ensemble
from .ratetheory import MJParams, mj_curve

SYSTEM_AXES = ("epsilon", "delta", "omega_v", "gamma")
BATH_AXES = ("alpha", "gamma_E", "temperature", "omega_c", "omega_0", "beta")

_FAIL_FRACTION = 0.10


@dataclass(frozen=True)
class SweepSpec:
    """A 1D or 2D scan over system/bath parameters."""

    system: SystemParams
    bath: BathSpec
    prop: PropagatorConfig
    coupling: str
    duration_ps: float
    axes: tuple            # ((name, values), ...) with 1 or 2 entries
    master_seed: int
    n_traj: int | None = None
    p_inf: float | None = None

    def __post_init__(self) -> None:
        if len(self.axes) not in (1, 2):
            raise ConfigurationError(
                f"sweep needs 1 or 2 axes, got {len(self.axes)}"
            )
        for name, values in self.axes:
            if name not in SYSTEM_AXES + BATH_AXES:
                raise ConfigurationError(
                    f"unknown sweep axis {name!r}; system axes "
                    f"{SYSTEM_AXES}, bath axes {BATH_AXES}"
                )
            if len(values) < 1:
                raise ConfigurationError(f"axis {name!r} has no values")
        if self.duration_ps <= 0.0:
            raise ConfigurationError(
                f"duration_ps must be > 0, got {self.duration_ps}"
            )


@dataclass
class RateMap:
    """Fitted rates over the scan grid (NaN marks failed points)."""

    axis_names: tuple
    axis_values: tuple
    k: np.ndarray = field(repr=False)
    p_inf: np.ndarray = field(repr=False)
    r2: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    flags: list = field(repr=False, default_factory=list)
    records: list = field(repr=False, default_factory=list)

    @property
    def shape(self) -> tuple:
        return tuple(len(v) for v in self.axis_values)

    def argmax(self) -> tuple:
        """Axis coordinates of the largest finite rate."""
        k = np.where(np.isfinite(self.k), self.k, -np.inf)
        flat = int(np.argmax(k))
        idx = np.unravel_index(flat, self.shape)
        return tuple(float(self.axis_values[a][i]) for a, i in enumerate(idx))


def _apply_axes(system: SystemParams, bath: BathSpec, assignment: dict):
    sys_kw = {k: v for k, v in assignment.items() if k in SYSTEM_AXES}
    bath_kw = {k: v for k, v in assignment.items() if k in BATH_AXES}
    if sys_kw:
        system = replace(system, **sys_kw)
    if bath_kw:
        bath = replace(bath, **bath_kw)
    return system, bath


def common_grid(spec: SweepSpec) -> tuple:
    """One (dt, n_steps) pair valid for every point of the scan."""
    duration = spec.duration_ps / HBAR_EV_PS
    if spec.prop.dt is not None:
        dt = spec.prop.dt
    else:
        worst = 0.0
        shape = tuple(len(v) for _, v in spec.axes)
        for flat in range(int(np.prod(shape))):
            idx = np.unravel_index(flat, shape)
            assignment = {name: float(vals[i])
                          for (name, vals), i in zip(spec.axes, idx)}
            sys_p, _ = _apply_axes(spec.system, spec.bath, assignment)
            worst = max(worst, spectral_norm(build_hamiltonian(sys_p)))
        if worst <= 0.0:
            raise ConfigurationError("cannot derive dt: zero Hamiltonian")
        dt = 0.1 / worst
    stride = spec.prop.out_stride
    n_steps = int(np.ceil(duration / dt))
    n_steps = ((n_steps + stride - 1) // stride) * stride
    return dt, n_steps


def _load_checkpoint(path: str) -> dict:
    records = {}
    if path is None or not os.path.exists(path):
        return records
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            records[int(rec["point"])] = rec
    return records


def _params_match(rec: dict, assignment: dict) -> bool:
    old = rec.get("params", {})
    if set(old) != set(assignment):
        return False
    return all(np.isclose(old[k], assignment[k], rtol=1e-12, atol=0.0)
               for k in assignment)


def _dump_point_trace(trace_dir: str, flat: int, result) -> str:
    path = os.path.join(trace_dir, f"point_{flat:04d}_trace.csv")
    write_trace_csv(path, PopulationTrace.from_ensemble(result))
    return path


def run_sweep(spec: SweepSpec, checkpoint_path: str | None = None,
              resume: bool = True, order=None,
              budget_s: float | None = None,
              trace_dir: str | None = None) -> RateMap:
    """Execute the scan, one seeded ensemble and rate fit per grid point.

    Points whose fit carries flags (oscillatory dynamics, fallback
    windows) get their full population trace written under trace_dir,
    when given, instead of standing on the fitted number alone.
    """
    shape = tuple(len(v) for _, v in spec.axes)
    total = int(np.prod(shape))
    dt, n_steps = common_grid(spec)
    n_traj = spec.n_traj if spec.n_traj is not None else spec.prop.n_traj

    records = _load_checkpoint(checkpoint_path) if resume else {}
    t_start = time.monotonic()
    failures = sum(1 for r in records.values() if r.get("error"))
    exec_order = list(order) if order is not None else list(range(total))
    if sorted(exec_order) != list(range(total)):
        raise ConfigurationError(
            "order must be a permutation of all point indices"
        )

    fh = open(checkpoint_path, "a", encoding="utf-8") if checkpoint_path else None
    try:
        for flat in exec_order:
            idx = np.unravel_index(flat, shape)
            assignment = {name: float(vals[i])
                          for (name, vals), i in zip(spec.axes, idx)}
            if flat in records:
                if not _params_match(records[flat], assignment):
                    raise DataError(
                        f"checkpoint point {flat} was produced with "
                        f"{records[flat].get('params')} but the sweep now "
                        f"asks for {assignment}; refusing to mix"
                    )
                continue
            if budget_s is not None and time.monotonic() - t_start > budget_s:
                raise EnsembleError(
                    f"sweep exceeded its {budget_s:g} s budget after "
                    f"{len(records)} of {total} points; checkpoint retained"
                )
            point_seed = derive_seed(spec.master_seed, flat)
            rec = {"point": flat, "params": assignment, "seed": point_seed}
            result = None
            try:
                sys_p, bath_p = _apply_axes(spec.system, spec.bath, assignment)
                prop_p = replace(spec.prop, dt=dt, n_steps=n_steps,
                                 master_seed=point_seed, n_traj=n_traj)
                result = run_ensemble(sys_p, bath_p, prop_p, spec.coupling)
                fit = extract_rate(result.t_ps, result.populations[:, 0],
                                   p_inf=spec.p_inf)
                rec.update(k_ps_inv=fit.k_rel, p_inf=fit.p_inf,
                           r2=fit.r_squared, stderr=fit.k_stderr,
                           flags=list(fit.flags), error=None)
                if trace_dir is not None and fit.flags:
                    rec["trace_path"] = _dump_point_trace(trace_dir, flat,
                                                          result)
            except VaetError as exc:
                failures += 1
                rec.update(k_ps_inv=None, p_inf=None, r2=None, stderr=None,
                           flags=[], error=str(exc))
                if trace_dir is not None and result is not None:
                    rec["trace_path"] = _dump_point_trace(trace_dir, flat,
                                                          result)
                if failures > _FAIL_FRACTION * total:
                    records[flat] = rec
                    if fh is not None:
                        fh.write(json.dumps(rec) + "\n")
                        fh.flush()
                    raise EnsembleError(
                        f"{failures} of {total} sweep points failed "
                        f"(> {_FAIL_FRACTION:.0%}); last error: {exc}"
                    ) from exc
            records[flat] = rec
            if fh is not None:
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
    finally:
        if fh is not None:
            fh.close()

    k = np.full(shape, np.nan)
    p_inf = np.full(shape, np.nan)
    r2 = np.full(shape, np.nan)
    stderr = np.full(shape, np.nan)
    flags = [()] * total
    ordered = []
    for flat in range(total):
        rec = records.get(flat)
        ordered.append(rec)
        if rec is None or rec.get("error"):
            continue
        idx = np.unravel_index(flat, shape)
        k[idx] = rec["k_ps_inv"]
        p_inf[idx] = rec["p_inf"]
        r2[idx] = rec["r2"]
        stderr[idx] = rec["stderr"]
        flags[flat] = tuple(rec.get("flags", ()))
    return RateMap(
        axis_names=tuple(name for name, _ in spec.axes),
        axis_values=tuple(np.asarray(vals, dtype=float)
                          for _, vals in spec.axes),
        k=k, p_inf=p_inf, r2=r2, stderr=stderr,
        flags=flags, records=ordered,
    )


def activationless_bias(bath: BathSpec, gamma: float, omega_v: float) -> float:
    """Predicted rate-maximizing bias: caption-convention bath
    reorganization energy plus the mode term 2 gamma^2 / omega_v."""
    return reorganization_energy_caption(bath) + 2.0 * gamma * gamma / omega_v


def compare_to_mj(ratemap: RateMap, base: MJParams,
                  literature_convention: bool = False) -> dict:
    """Analytic comb evaluated on a 1D bias scan, with ratios."""
    if len(ratemap.axis_names) != 1 or ratemap.axis_names[0] != "epsilon":
        raise ConfigurationError(
            "compare_to_mj needs a 1D sweep over the 'epsilon' axis"
        )
    eps = ratemap.axis_values[0]
    k_mj = mj_curve(base, eps, literature_convention)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = ratemap.k / k_mj
    finite = np.isfinite(ratio) & (k_mj > 0.0)
    frac_above = float(np.mean(ratio[finite] > 1.0)) if finite.any() else np.nan
    median = float(np.median(ratio[finite])) if finite.any() else np.nan
    k_sim = np.where(np.isfinite(ratemap.k), ratemap.k, -np.inf)
    step = abs(eps[1] - eps[0]) if len(eps) > 1 else np.nan
    peak_sim = float(eps[int(np.argmax(k_sim))])
    peak_mj = float(eps[int(np.argmax(k_mj))])
    offset = abs(peak_sim - peak_mj) / step if step and np.isfinite(step) else 0.0
    return {
        "epsilon": eps, "k_sim": ratemap.k.copy(), "k_mj": k_mj,
        "ratio": ratio,
        "ratio_median": median,
        "frac_sim_above": frac_above,
        "peak_sim_eps": peak_sim,
        "peak_mj_eps": peak_mj,
        "peak_offset_steps": float(offset),
        "summary": (
            f"median k_sim/k_mj = {median:.3g}; "
            f"{frac_above:.0%} of points above the analytic curve; "
            f"peak offset {offset:.1f} grid step(s)"
        ),
    }
