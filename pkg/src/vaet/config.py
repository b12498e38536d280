"""TOML run configuration.

Layout:

  [system]   epsilon_ev, delta_ev, omega_v_ev, gamma_ev, fock_dim
  [bath]     family, alpha, omega_c_ev | (omega_0_ev, beta_ev),
             temperature_k XOR temperature_ev, gamma_e_ev
  [run]      scheme, coupling, duration_ps, dt_ev_inv, n_traj, master_seed,
             out_stride, n_workers, chunk_size, renormalize,
             store_full_density
  [sweep]    axis, min, max, count (or values); optional axis2 block;
             optional n_traj, p_inf
  [outputs]  directory

Unknown sections or keys are rejected. Validation is collective: every
problem found is reported in a single error, not just the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib as _toml
except ImportError:             # python < 3.11
    import tomli as _toml

from .bath import BathSpec
from .constants import HBAR_EV_PS, kelvin_to_ev
from .errors import ConfigurationError, VaetError
from .hilbert import SystemParams
from .propagator import COUPLINGS, SCHEMES, PropagatorConfig, resolve_dt

_SYSTEM_KEYS = {"epsilon_ev", "delta_ev", "omega_v_ev", "gamma_ev", "fock_dim"}
_BATH_KEYS = {"family", "alpha", "omega_c_ev", "omega_0_ev", "beta_ev",
              "temperature_k", "temperature_ev", "gamma_e_ev"}
_RUN_KEYS = {"scheme", "coupling", "duration_ps", "dt_ev_inv", "n_traj",
             "master_seed", "out_stride", "n_workers", "chunk_size",
             "renormalize", "store_full_density"}
_SWEEP_KEYS = {"axis", "min", "max", "count", "values",
               "axis2", "min2", "max2", "count2", "values2",
               "n_traj", "p_inf"}
_OUTPUT_KEYS = {"directory"}
_SECTIONS = {"system": _SYSTEM_KEYS, "bath": _BATH_KEYS, "run": _RUN_KEYS,
             "sweep": _SWEEP_KEYS, "outputs": _OUTPUT_KEYS}


@dataclass
class RunConfig:
    """Validated, unit-resolved run description."""

    system: SystemParams
    bath: BathSpec | None
    prop: PropagatorConfig
    coupling: str
    duration_ps: float
    sweep: dict | None = None
    outputs: dict = field(default_factory=dict)
    recipe: str | None = None
    # False when run.dt_ev_inv was derived rather than user-set; sweeps
    # then rederive the step from the worst-case grid point.
    dt_explicit: bool = True


def _num(section, key, data, errs, required=False, default=None, kind=float,
         positive=False, nonneg=False):
    if key not in data:
        if required:
            errs.append(f"[{section}] missing required key {key!r}")
        return default
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        errs.append(f"[{section}] {key} must be a number, got {val!r}")
        return default
    if kind is int and (isinstance(val, float) and not val.is_integer()):
        errs.append(f"[{section}] {key} must be an integer, got {val!r}")
        return default
    val = kind(val)
    if positive and val <= 0:
        errs.append(f"[{section}] {key} must be > 0, got {val}")
        return default
    if nonneg and val < 0:
        errs.append(f"[{section}] {key} must be >= 0, got {val}")
        return default
    return val


def _str(section, key, data, errs, required=False, default=None,
         choices=None):
    if key not in data:
        if required:
            errs.append(f"[{section}] missing required key {key!r}")
        return default
    val = data[key]
    if not isinstance(val, str):
        errs.append(f"[{section}] {key} must be a string, got {val!r}")
        return default
    if choices is not None and val not in choices:
        errs.append(f"[{section}] {key} must be one of {choices}, got {val!r}")
        return default
    return val


def _bool(section, key, data, errs, default):
    if key not in data:
        return default
    val = data[key]
    if not isinstance(val, bool):
        errs.append(f"[{section}] {key} must be a boolean, got {val!r}")
        return default
    return val


def parse_config(data: dict, recipe: str | None = None) -> RunConfig:
    """Build a RunConfig from parsed TOML data, reporting every violation."""
    errs: list[str] = []
    for section in data:
        if section not in _SECTIONS:
            errs.append(f"unknown section [{section}]")
        elif not isinstance(data[section], dict):
            errs.append(f"[{section}] must be a table")
    for section, allowed in _SECTIONS.items():
        body = data.get(section)
        if isinstance(body, dict):
            for key in body:
                if key not in allowed:
                    errs.append(f"[{section}] unknown key {key!r}")

    sys_d = data.get("system") if isinstance(data.get("system"), dict) else {}
    bath_d = data.get("bath") if isinstance(data.get("bath"), dict) else {}
    run_d = data.get("run") if isinstance(data.get("run"), dict) else {}
    sweep_d = data.get("sweep") if isinstance(data.get("sweep"), dict) else None
    out_d = data.get("outputs") if isinstance(data.get("outputs"), dict) else {}

    if "system" not in data:
        errs.append("missing required section [system]")
    if "run" not in data:
        errs.append("missing required section [run]")

    epsilon = _num("system", "epsilon_ev", sys_d, errs, required=True)
    delta = _num("system", "delta_ev", sys_d, errs, required=True)
    omega_v = _num("system", "omega_v_ev", sys_d, errs, required=True,
                   positive=True)
    gamma = _num("system", "gamma_ev", sys_d, errs, default=0.0)
    fock_dim = _num("system", "fock_dim", sys_d, errs, default=2, kind=int,
                    positive=True)

    scheme = _str("run", "scheme", run_d, errs, required=True,
                  choices=SCHEMES)
    coupling = _str("run", "coupling", run_d, errs, default="diagonal",
                    choices=COUPLINGS)
    duration_ps = _num("run", "duration_ps", run_d, errs, required=True,
                       positive=True)
    dt = _num("run", "dt_ev_inv", run_d, errs, positive=True)
    n_traj = _num("run", "n_traj", run_d, errs, default=100, kind=int,
                  positive=True)
    master_seed = _num("run", "master_seed", run_d, errs, default=0, kind=int,
                       nonneg=True)
    out_stride = _num("run", "out_stride", run_d, errs, default=1, kind=int,
                      positive=True)
    n_workers = _num("run", "n_workers", run_d, errs, default=1, kind=int,
                     positive=True)
    chunk_size = _num("run", "chunk_size", run_d, errs, default=25, kind=int,
                      positive=True)
    renorm = _bool("run", "renormalize", run_d, errs, True)
    store_full = _bool("run", "store_full_density", run_d, errs, False)

    bath = None
    if bath_d:
        family = _str("bath", "family", bath_d, errs, required=True,
                      choices=("ohmic", "structured"))
        alpha = _num("bath", "alpha", bath_d, errs, required=True,
                     nonneg=True)
        gamma_e = _num("bath", "gamma_e_ev", bath_d, errs, default=0.0,
                       nonneg=True)
        t_k = _num("bath", "temperature_k", bath_d, errs, positive=True)
        t_ev = _num("bath", "temperature_ev", bath_d, errs, positive=True)
        if (t_k is None) == (t_ev is None):
            errs.append(
                "[bath] exactly one of temperature_k or temperature_ev "
                "is required"
            )
            temperature = None
        else:
            temperature = kelvin_to_ev(t_k) if t_k is not None else t_ev
        omega_c = _num("bath", "omega_c_ev", bath_d, errs, positive=True)
        omega_0 = _num("bath", "omega_0_ev", bath_d, errs, positive=True)
        beta = _num("bath", "beta_ev", bath_d, errs, nonneg=True)
        if family == "ohmic":
            if omega_c is None:
                errs.append("[bath] ohmic family requires omega_c_ev")
            for k in ("omega_0_ev", "beta_ev"):
                if k in bath_d:
                    errs.append(f"[bath] {k} does not apply to the ohmic family")
        elif family == "structured":
            if omega_0 is None:
                errs.append("[bath] structured family requires omega_0_ev")
            if beta is None:
                errs.append("[bath] structured family requires beta_ev")
            if "omega_c_ev" in bath_d:
                errs.append(
                    "[bath] omega_c_ev does not apply to the structured family"
                )
        if not errs:
            try:
                bath = BathSpec(family=family, alpha=alpha,
                                temperature=temperature, gamma_E=gamma_e,
                                omega_c=omega_c, omega_0=omega_0, beta=beta)
            except VaetError as exc:
                errs.append(str(exc))

    if scheme == "closed" and bath_d:
        offending = [k for k in ("alpha", "gamma_e_ev")
                     if bath_d.get(k) not in (None, 0, 0.0)]
        if offending:
            errs.append(
                "closed scheme admits no environment coupling; remove "
                + ", ".join(f"[bath] {k}={bath_d[k]!r}" for k in offending)
            )
    if scheme in ("markov", "nonmarkov") and not bath_d:
        errs.append(f"scheme {scheme!r} requires a [bath] section")

    sweep = None
    if sweep_d is not None:
        sweep = _parse_sweep(sweep_d, errs)

    system = None
    if not errs:
        try:
            system = SystemParams(epsilon=epsilon, delta=delta,
                                  omega_v=omega_v, gamma=gamma,
                                  fock_dim=fock_dim)
        except VaetError as exc:
            errs.append(str(exc))

    prop = None
    if not errs:
        if scheme == "closed":
            n_traj = 1
        try:
            dt_res = resolve_dt(system, dt)
            duration = duration_ps / HBAR_EV_PS
            n_steps = int(np.ceil(duration / dt_res))
            n_steps = ((n_steps + out_stride - 1) // out_stride) * out_stride
            prop = PropagatorConfig(
                scheme=scheme, dt=dt_res, n_steps=n_steps, n_traj=n_traj,
                master_seed=master_seed, renormalize_each_step=renorm,
                out_stride=out_stride, n_workers=n_workers,
                chunk_size=chunk_size, store_full_density=store_full,
            )
        except VaetError as exc:
            errs.append(str(exc))

    if errs:
        raise ConfigurationError(
            "invalid configuration:\n" + "\n".join(f"  - {e}" for e in errs)
        )
    return RunConfig(system=system, bath=bath, prop=prop, coupling=coupling,
                     duration_ps=duration_ps, sweep=sweep,
                     outputs=dict(out_d), recipe=recipe,
                     dt_explicit="dt_ev_inv" in run_d)


def _parse_sweep(sweep_d: dict, errs: list) -> dict | None:
    axis = _str("sweep", "axis", sweep_d, errs, required=True)
    out = {"axes": []}

    def axis_values(suffix: str):
        vals = sweep_d.get("values" + suffix)
        if vals is not None:
            if (not isinstance(vals, list) or len(vals) == 0
                    or not all(isinstance(v, (int, float))
                               and not isinstance(v, bool) for v in vals)):
                errs.append(f"[sweep] values{suffix} must be a non-empty "
                            "list of numbers")
                return None
            return np.asarray(vals, dtype=float)
        lo = _num("sweep", "min" + suffix, sweep_d, errs, required=True)
        hi = _num("sweep", "max" + suffix, sweep_d, errs, required=True)
        count = _num("sweep", "count" + suffix, sweep_d, errs, required=True,
                     kind=int, positive=True)
        if None in (lo, hi, count):
            return None
        return np.linspace(lo, hi, count)

    vals = axis_values("")
    if axis is not None and vals is not None:
        out["axes"].append((axis, vals))
    axis2 = _str("sweep", "axis2", sweep_d, errs)
    if axis2 is not None:
        vals2 = axis_values("2")
        if vals2 is not None:
            out["axes"].append((axis2, vals2))
    out["n_traj"] = _num("sweep", "n_traj", sweep_d, errs, kind=int,
                         positive=True)
    out["p_inf"] = _num("sweep", "p_inf", sweep_d, errs)
    return out if out["axes"] else None


def load_config(path: str, recipe: str | None = None) -> RunConfig:
    with open(path, "rb") as fh:
        data = _toml.load(fh)
    return parse_config(data, recipe=recipe)


def canonical_dict(cfg: RunConfig) -> dict:
    """Flat, sorted key/value view used for metadata echo in outputs."""
    out = {
        "system.epsilon_ev": cfg.system.epsilon,
        "system.delta_ev": cfg.system.delta,
        "system.omega_v_ev": cfg.system.omega_v,
        "system.gamma_ev": cfg.system.gamma,
        "system.fock_dim": cfg.system.fock_dim,
        "run.scheme": cfg.prop.scheme,
        "run.coupling": cfg.coupling,
        "run.duration_ps": cfg.duration_ps,
        "run.dt_ev_inv": cfg.prop.dt,
        "run.n_steps": cfg.prop.n_steps,
        "run.n_traj": cfg.prop.n_traj,
        "run.master_seed": cfg.prop.master_seed,
        "run.out_stride": cfg.prop.out_stride,
        "run.n_workers": cfg.prop.n_workers,
        "run.chunk_size": cfg.prop.chunk_size,
        "run.renormalize": cfg.prop.renormalize_each_step,
        "run.store_full_density": cfg.prop.store_full_density,
    }
    if cfg.bath is not None:
        out.update({
            "bath.family": cfg.bath.family,
            "bath.alpha": cfg.bath.alpha,
            "bath.temperature_ev": cfg.bath.temperature,
            "bath.gamma_e_ev": cfg.bath.gamma_E,
        })
        if cfg.bath.omega_c is not None:
            out["bath.omega_c_ev"] = cfg.bath.omega_c
        if cfg.bath.omega_0 is not None:
            out["bath.omega_0_ev"] = cfg.bath.omega_0
        if cfg.bath.beta is not None:
            out["bath.beta_ev"] = cfg.bath.beta
    if cfg.sweep is not None:
        for pos, (axis, values) in enumerate(cfg.sweep["axes"]):
            suffix = "" if pos == 0 else "2"
            out[f"sweep.axis{suffix}"] = axis
            out[f"sweep.values{suffix}"] = [float(v) for v in values]
        if cfg.sweep.get("n_traj") is not None:
            out["sweep.n_traj"] = cfg.sweep["n_traj"]
        if cfg.sweep.get("p_inf") is not None:
            out["sweep.p_inf"] = cfg.sweep["p_inf"]
    if cfg.outputs.get("directory"):
        out["outputs.directory"] = cfg.outputs["directory"]
    if cfg.recipe:
        out["recipe"] = cfg.recipe
    return dict(sorted(out.items()))


def from_canonical(flat: dict) -> RunConfig:
    """Rebuild a RunConfig from a canonical_dict echo.

    The derived run.n_steps entry is dropped and recomputed; feeding the
    echoed dt and duration through parse_config reproduces it exactly.
    """
    data: dict = {}
    for key, val in flat.items():
        if key == "recipe" or key == "run.n_steps":
            continue
        section, _, name = key.partition(".")
        data.setdefault(section, {})[name] = val
    return parse_config(data, recipe=flat.get("recipe"))
