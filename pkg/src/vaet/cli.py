"""Command line front end.

Commands:

  simulate         one ensemble run -> trace.csv + metadata.json
  sweep            configured parameter scan -> ratemap.csv + checkpoint
  mj               analytic vibronic rate comb on a bias grid -> mj.csv
  kernels          bath correlation and memory kernels -> kernels.csv
  noise-selftest   covariance check of synthesized noise -> pass/fail
  validate-config  parse a config and report every violation

Outputs land in --out, falling back to the config's [outputs] directory,
then $VAET_OUTPUT_DIR, then the working directory. Every file embeds the
resolved config echo and the master seed. On failure a command removes
the files it wrote in that invocation (sweep checkpoints are kept so the
scan can resume) and exits nonzero with a one-line error on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bath import correlation_function, memory_kernels, \
    reorganization_energy_caption
from .config import RunConfig, canonical_dict, load_config
from .errors import ConfigurationError, DataError, VaetError
from .io import (write_kernels_csv, write_metadata_json, write_mj_csv,
                 write_noise_selftest_csv, write_ratemap_csv,
                 write_trace_csv)
from .noise import covariance_selftest
from .observables import PopulationTrace
from .propagator import run_ensemble
from .ratetheory import MJParams, mj_curve
from .recipes import load_recipe
from .sweep import SweepSpec, common_grid, run_sweep

# default lag grids for the noise self-test; the Ohmic spectrum carries
# support out to tens of eV, so its grid must be fine enough for the
# synthesis lattice (max frequency 2*pi/h) to cover it
_SELFTEST_GRID = {"ohmic": (0.25, 256), "structured": (2.0, 256)}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaet",
        description="stochastic simulator of vibrationally assisted "
                    "electron transfer in a biased two-level system",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", metavar="FILE",
                        help="TOML run configuration")
        sp.add_argument("--recipe", metavar="NAME",
                        help="named preset shipped with the package")
        sp.add_argument("--seed", type=int, metavar="N",
                        help="override the master seed")
        sp.add_argument("--out", metavar="DIR",
                        help="output directory")
        sp.add_argument("--traj", type=int, metavar="N",
                        help="override the trajectory count")
        sp.add_argument("--threads", type=int, metavar="N",
                        help="worker threads for ensemble chunks")

    add_common(sub.add_parser("simulate", help="run one ensemble"))
    sp = sub.add_parser("sweep", help="run the configured parameter scan")
    add_common(sp)
    sp.add_argument("--no-resume", action="store_true",
                    help="ignore an existing checkpoint")
    sp.add_argument("--budget-s", type=float, metavar="S",
                    help="abort (checkpoint retained) past this wall time")
    sp = sub.add_parser("mj", help="analytic rate comb on a bias grid")
    add_common(sp)
    sp.add_argument("--epsilon-grid", required=True, metavar="MIN:MAX:COUNT")
    sp.add_argument("--lambda-s", type=float, metavar="EV",
                    help="bath reorganization energy override")
    sp.add_argument("--literature-convention", action="store_true",
                    help="center the m-th channel at lambda_s + m*omega_v")
    add_common(sub.add_parser("kernels",
                              help="tabulate C(t) and memory kernels"))
    sp = sub.add_parser("noise-selftest",
                        help="covariance check of synthesized noise")
    add_common(sp)
    sp.add_argument("--paths", type=int, default=2000, metavar="M")
    add_common(sub.add_parser("validate-config", help="validate and exit"))
    return parser


def _load_cfg(args) -> RunConfig:
    if bool(args.config) == bool(args.recipe):
        raise ConfigurationError(
            "exactly one of --config or --recipe is required"
        )
    cfg = load_config(args.config) if args.config else load_recipe(args.recipe)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.traj is not None:
        overrides["n_traj"] = args.traj
    if args.threads is not None:
        overrides["n_workers"] = args.threads
    if overrides:
        cfg.prop = replace(cfg.prop, **overrides)
    return cfg


def _resolve_out(args, cfg: RunConfig) -> str:
    out = (args.out or cfg.outputs.get("directory")
           or os.environ.get("VAET_OUTPUT_DIR") or ".")
    os.makedirs(out, exist_ok=True)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _metadata(cfg: RunConfig, command: str, outputs: list,
              extra: dict | None = None) -> dict:
    payload = {
        "tool": "vaet",
        "version": __version__,
        "command": command,
        "recipe": cfg.recipe,
        "master_seed": cfg.prop.master_seed,
        "config": canonical_dict(cfg),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    if extra:
        payload.update(extra)
    return _jsonable(payload)


def _cleanup(paths: list) -> None:
    for path in paths:
        try:
            os.unlink(path)
        except OSError:
            pass


def _cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    if cfg.sweep is not None:
        raise ConfigurationError(
            "config declares a [sweep] section; use the sweep command"
        )
    out = _resolve_out(args, cfg)
    result = run_ensemble(cfg.system, cfg.bath, cfg.prop,
                          coupling=cfg.coupling)
    trace = PopulationTrace.from_ensemble(result)
    trace_path = os.path.join(out, "trace.csv")
    meta_path = os.path.join(out, "metadata.json")
    written = []
    try:
        write_trace_csv(trace_path, trace, echo=canonical_dict(cfg))
        written.append(trace_path)
        write_metadata_json(meta_path, _metadata(
            cfg, "simulate", [trace_path],
            extra={"n_traj_used": result.n_traj_used,
                   "convergence": result.convergence_diag},
        ))
        written.append(meta_path)
    except BaseException:
        _cleanup(written)
        raise
    print(f"wrote {trace_path} ({len(trace.t_ps)} samples, "
          f"{result.n_traj_used} trajectories)")
    print(f"wrote {meta_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    if cfg.sweep is None:
        raise ConfigurationError(
            "config has no [sweep] section; nothing to scan"
        )
    out = _resolve_out(args, cfg)
    prop = cfg.prop
    if not cfg.dt_explicit:
        # rederive the step from the stiffest grid point, not the base one
        prop = replace(prop, dt=None)
    n_traj = args.traj if args.traj is not None else cfg.sweep.get("n_traj")
    spec = SweepSpec(
        system=cfg.system, bath=cfg.bath, prop=prop, coupling=cfg.coupling,
        duration_ps=cfg.duration_ps,
        axes=tuple((name, vals) for name, vals in cfg.sweep["axes"]),
        master_seed=cfg.prop.master_seed, n_traj=n_traj,
        p_inf=cfg.sweep.get("p_inf"),
    )
    dt, n_steps = common_grid(spec)
    ckpt = os.path.join(out, "checkpoint.jsonl")
    ratemap = run_sweep(spec, checkpoint_path=ckpt,
                        resume=not args.no_resume,
                        budget_s=args.budget_s, trace_dir=out)
    map_path = os.path.join(out, "ratemap.csv")
    meta_path = os.path.join(out, "metadata.json")
    written = []
    try:
        write_ratemap_csv(map_path, ratemap, echo=canonical_dict(cfg))
        written.append(map_path)
        n_failed = sum(1 for r in ratemap.records
                       if r is None or r.get("error"))
        write_metadata_json(meta_path, _metadata(
            cfg, "sweep", [map_path, ckpt],
            extra={"dt_ev_inv": dt, "n_steps": n_steps,
                   "n_points": len(ratemap.records),
                   "n_failed": n_failed,
                   "argmax": list(ratemap.argmax())},
        ))
        written.append(meta_path)
    except BaseException:
        _cleanup(written)
        raise
    print(f"wrote {map_path} ({len(ratemap.records)} points)")
    print(f"wrote {meta_path}; argmax at {ratemap.argmax()}")
    return 0


def _parse_epsilon_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(
            f"--epsilon-grid must be MIN:MAX:COUNT, got {text!r}"
        )
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigurationError(f"bad --epsilon-grid {text!r}: {exc}")
    if count < 1 or hi < lo:
        raise ConfigurationError(
            f"--epsilon-grid needs MIN <= MAX and COUNT >= 1, got {text!r}"
        )
    return np.linspace(lo, hi, count)


def _cmd_mj(args) -> int:
    cfg = _load_cfg(args)
    eps = _parse_epsilon_grid(args.epsilon_grid)
    if args.lambda_s is not None:
        lambda_s = args.lambda_s
    elif cfg.bath is None:
        raise ConfigurationError("mj needs a [bath] section or --lambda-s")
    else:
        try:
            lambda_s = reorganization_energy_caption(cfg.bath)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{exc}; pass --lambda-s instead")
    if cfg.bath is None:
        raise ConfigurationError(
            "mj needs a [bath] section for the temperature"
        )
    base = MJParams(epsilon=cfg.system.epsilon, delta=cfg.system.delta,
                    gamma=cfg.system.gamma, omega_v=cfg.system.omega_v,
                    lambda_s=lambda_s, temperature=cfg.bath.temperature)
    k = mj_curve(base, eps, literature_convention=args.literature_convention)
    echo = canonical_dict(cfg)
    echo["mj.lambda_s_ev"] = lambda_s
    echo["mj.literature_convention"] = args.literature_convention
    out = _resolve_out(args, cfg)
    mj_path = os.path.join(out, "mj.csv")
    meta_path = os.path.join(out, "metadata.json")
    written = []
    try:
        write_mj_csv(mj_path, eps, k, echo=echo)
        written.append(mj_path)
        write_metadata_json(meta_path, _metadata(
            cfg, "mj", [mj_path],
            extra={"lambda_s_ev": lambda_s,
                   "literature_convention": args.literature_convention,
                   "peak_epsilon_ev": float(eps[int(np.argmax(k))])},
        ))
        written.append(meta_path)
    except BaseException:
        _cleanup(written)
        raise
    print(f"wrote {mj_path} ({len(eps)} rows)")
    return 0


def _cmd_kernels(args) -> int:
    cfg = _load_cfg(args)
    if cfg.bath is None:
        raise ConfigurationError("kernels needs a [bath] section")
    t = np.arange(cfg.prop.n_steps + 1) * cfg.prop.dt
    corr = correlation_function(cfg.bath, t)
    kern = memory_kernels(corr)
    out = _resolve_out(args, cfg)
    k_path = os.path.join(out, "kernels.csv")
    meta_path = os.path.join(out, "metadata.json")
    written = []
    try:
        write_kernels_csv(k_path, corr, kern, echo=canonical_dict(cfg))
        written.append(k_path)
        write_metadata_json(meta_path, _metadata(
            cfg, "kernels", [k_path],
            extra={"c0": corr.c0, "n_points": len(t)},
        ))
        written.append(meta_path)
    except BaseException:
        _cleanup(written)
        raise
    print(f"wrote {k_path} ({len(t)} points)")
    return 0


def _cmd_noise_selftest(args) -> int:
    cfg = _load_cfg(args)
    if cfg.bath is None:
        raise ConfigurationError("noise-selftest needs a [bath] section")
    if args.paths < 4:
        raise ConfigurationError("--paths must be at least 4")
    h, n_lags = _SELFTEST_GRID[cfg.bath.family]
    t = np.arange(n_lags) * h
    report = covariance_selftest(cfg.bath, t, args.paths,
                                 cfg.prop.master_seed)
    out = _resolve_out(args, cfg)
    csv_path = os.path.join(out, "noise_covariance.csv")
    write_noise_selftest_csv(csv_path, report, echo=canonical_dict(cfg))
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: {report.frac_within:.1%} of {report.n_lags} lags "
          f"within band {report.band:.3e} "
          f"(max dev {report.max_dev:.3e}, {report.n_paths} paths); "
          f"wrote {csv_path}")
    return 0 if report.passed else 1


def _cmd_validate_config(args) -> int:
    try:
        cfg = _load_cfg(args)
    except ConfigurationError as exc:
        print(str(exc))
        return 2
    bits = [f"scheme={cfg.prop.scheme}", f"coupling={cfg.coupling}",
            f"duration_ps={cfg.duration_ps:g}",
            f"dt_ev_inv={cfg.prop.dt:.6g}", f"n_steps={cfg.prop.n_steps}",
            f"n_traj={cfg.prop.n_traj}"]
    if cfg.bath is not None:
        bits.append(f"bath={cfg.bath.family}")
    if cfg.sweep is not None:
        names = "x".join(name for name, _ in cfg.sweep["axes"])
        sizes = "x".join(str(len(v)) for _, v in cfg.sweep["axes"])
        bits.append(f"sweep={names}[{sizes}]")
    print("OK: " + ", ".join(bits))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "mj": _cmd_mj,
    "kernels": _cmd_kernels,
    "noise-selftest": _cmd_noise_selftest,
    "validate-config": _cmd_validate_config,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except VaetError as exc:
        msg = "; ".join(line.strip() for line in str(exc).splitlines()
                        if line.strip())
        print(f"vaet: error: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, (ConfigurationError, DataError)) else 1
    except OSError as exc:
        print(f"vaet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
