"""CSV and metadata writers.

Every CSV opens with '# key = value' comment lines echoing the resolved
configuration, then a header row. Files are written to a temp path in the
same directory and atomically renamed; a failed write leaves no partial
file behind.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import DataError


def _format(val) -> str:
    if isinstance(val, float):
        return format(val, ".12g")
    return str(val)


def _atomic_write(path: str, write_body) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory,
                       f".{os.path.basename(path)}.tmp{os.getpid()}")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_echo(fh, echo: dict | None) -> None:
    if not echo:
        return
    for key, val in echo.items():
        fh.write(f"# {key} = {_format(val)}\n")


def write_trace_csv(path: str, trace, echo: dict | None = None) -> None:
    def body(fh):
        _write_echo(fh, echo)
        fh.write("t_ps,P_D,P_A,re_coh,im_coh\n")
        for row in zip(trace.t_ps, trace.p_d, trace.p_a,
                       trace.re_coh, trace.im_coh):
            fh.write(",".join(_format(float(v)) for v in row) + "\n")

    _atomic_write(path, body)


def write_ratemap_csv(path: str, ratemap, echo: dict | None = None) -> None:
    names = ratemap.axis_names
    shape = ratemap.shape

    def body(fh):
        _write_echo(fh, echo)
        fh.write(f"# axis1 = {names[0]}\n")
        if len(names) > 1:
            fh.write(f"# axis2 = {names[1]}\n")
        fh.write("axis1,axis2,k_ps_inv,r2,P_inf,stderr,flags\n")
        total = int(np.prod(shape))
        for flat in range(total):
            idx = np.unravel_index(flat, shape)
            a1 = ratemap.axis_values[0][idx[0]]
            a2 = ratemap.axis_values[1][idx[1]] if len(shape) > 1 else ""
            flags = ";".join(ratemap.flags[flat]) if ratemap.flags else ""
            rec = ratemap.records[flat] if ratemap.records else None
            if rec is not None and rec.get("error"):
                flags = ";".join(filter(None, [flags, "failed"]))
            vals = [ratemap.k[idx], ratemap.r2[idx], ratemap.p_inf[idx],
                    ratemap.stderr[idx]]
            cells = [_format(float(a1)),
                     _format(float(a2)) if a2 != "" else ""]
            cells += ["" if v is None or not np.isfinite(v)
                      else _format(float(v)) for v in vals]
            cells.append(flags)
            fh.write(",".join(cells) + "\n")

    _atomic_write(path, body)


def write_kernels_csv(path: str, corr, kern, echo: dict | None = None) -> None:
    if len(corr.values) != len(kern.g0):
        raise DataError("correlation and kernel tables differ in length")

    def body(fh):
        _write_echo(fh, echo)
        fh.write("t,ReC,ImC,Reg0,Img0,Reg1,Img1,Reg2,Img2\n")
        t = corr.t
        for i in range(len(t)):
            row = (t[i],
                   corr.values[i].real, corr.values[i].imag,
                   kern.g0[i].real, kern.g0[i].imag,
                   kern.g1[i].real, kern.g1[i].imag,
                   kern.g2[i].real, kern.g2[i].imag)
            fh.write(",".join(_format(float(v)) for v in row) + "\n")

    _atomic_write(path, body)


def write_mj_csv(path: str, epsilon_grid, k_ps, echo: dict | None = None) -> None:
    eps = np.asarray(epsilon_grid, dtype=float)
    k = np.asarray(k_ps, dtype=float)
    if eps.shape != k.shape:
        raise DataError("epsilon grid and rate array differ in shape")

    def body(fh):
        _write_echo(fh, echo)
        fh.write("epsilon_ev,k_ps_inv\n")
        for e, kv in zip(eps, k):
            fh.write(f"{_format(float(e))},{_format(float(kv))}\n")

    _atomic_write(path, body)


def write_noise_selftest_csv(path: str, report,
                             echo: dict | None = None) -> None:
    def body(fh):
        _write_echo(fh, echo)
        fh.write(f"# n_paths = {report.n_paths}\n")
        fh.write(f"# band = {_format(float(report.band))}\n")
        fh.write(f"# frac_within = {_format(float(report.frac_within))}\n")
        fh.write(f"# passed = {report.passed}\n")
        fh.write("t,ReC_target,ImC_target,ReC_emp,ImC_emp,abs_dev\n")
        dev = np.abs(report.empirical - report.target)
        for i in range(report.n_lags):
            row = (report.t[i],
                   report.target[i].real, report.target[i].imag,
                   report.empirical[i].real, report.empirical[i].imag,
                   dev[i])
            fh.write(",".join(_format(float(v)) for v in row) + "\n")

    _atomic_write(path, body)


def write_metadata_json(path: str, payload: dict) -> None:
    def body(fh):
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _atomic_write(path, body)


def read_csv_with_echo(path: str):
    """Parse one of the package's CSVs back into (echo, columns, rows).

    rows holds raw string cells; numeric conversion is the caller's choice
    (the flags column of a rate map is not numeric).
    """
    echo = {}
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                body = line[2:]
                if " = " in body:
                    key, val = body.split(" = ", 1)
                    echo[key] = val
                continue
            cells = line.split(",")
            if header is None:
                header = cells
            else:
                rows.append(cells)
    if header is None:
        raise DataError(f"{path} holds no header row")
    return echo, header, rows


def read_trace_csv(path: str):
    """(echo, dict of float arrays keyed by column name)."""
    echo, header, rows = read_csv_with_echo(path)
    data = np.array([[float(c) for c in row] for row in rows])
    return echo, {name: data[:, i] for i, name in enumerate(header)}
