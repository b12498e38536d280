"""CSV round trips and the atomic-write guarantee."""

import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vaet.errors import DataError
from vaet.io import (
    read_csv_with_echo,
    read_trace_csv,
    write_metadata_json,
    write_trace_csv,
)
from vaet.observables import PopulationTrace


def _trace(n=20):
    t = np.linspace(0.0, 1.0, n)
    return PopulationTrace(t_ps=t, p_d=np.exp(-t), p_a=1.0 - np.exp(-t),
                           re_coh=np.full(n, 0.01), im_coh=np.zeros(n))


def test_trace_round_trip(tmp_path):
    path = str(tmp_path / "trace.csv")
    write_trace_csv(path, _trace(), echo={"run.scheme": "markov",
                                          "run.dt_ev_inv": 0.25})
    echo, cols = read_trace_csv(path)
    assert echo["run.scheme"] == "markov"
    assert float(echo["run.dt_ev_inv"]) == 0.25
    assert set(cols) == {"t_ps", "P_D", "P_A", "re_coh", "im_coh"}
    assert_allclose(cols["P_D"], np.exp(-cols["t_ps"]), atol=1e-10)


def test_write_is_atomic_on_failure(tmp_path):
    path = str(tmp_path / "trace.csv")
    write_trace_csv(path, _trace())
    before = open(path, "rb").read()

    class Broken:
        t_ps = np.array([0.0, 1.0])

        def __getattr__(self, name):
            raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        write_trace_csv(path, Broken())
    # Old content survives and no temp litter remains.
    assert open(path, "rb").read() == before
    assert [f for f in os.listdir(tmp_path) if f.startswith(".")] == []


def test_metadata_json_is_sorted_and_newline_terminated(tmp_path):
    path = str(tmp_path / "meta.json")
    write_metadata_json(path, {"b": 1, "a": [1, 2]})
    text = open(path, encoding="utf-8").read()
    assert text.endswith("\n")
    assert text.index("\"a\"") < text.index("\"b\"")


def test_reader_requires_header(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("# only = echo\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_csv_with_echo(str(empty))
