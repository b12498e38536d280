"""Shared pytest wiring.

The terminal summary hook prints one PASS/FAIL line per acceptance
criterion so a long -v run still ends with a compact scoreboard.
"""

import numpy as np
import pytest

# Criterion label by test-name prefix; the order here is the print order.
_CRITERIA = [
    ("test_c01", "C01 biased closed run keeps the acceptor dark"),
    ("test_c02", "C02 closed tunneling oscillation matches sin^2"),
    ("test_c03", "C03 vibronic rate comb internal consistency"),
    ("test_c04", "C04 white-noise rate ridge peaks at the matched bias"),
    ("test_c05", "C05 coupling-operator dichotomy on the weak ohmic bath"),
    ("test_c06", "C06 structured-bath population beats"),
    ("test_c07", "C07 colored-noise covariance fidelity"),
    ("test_c08", "C08 memory-kernel oracles"),
    ("test_c09", "C09 rate-extraction oracles"),
    ("test_c10", "C10 ensemble density sanity and error scaling"),
    ("test_c11", "C11 seeded determinism across runs and workers"),
]

_WORD = {"passed": "PASS", "failed": "FAIL", "error": "FAIL",
         "skipped": "SKIP"}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = {}
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, ()):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if status == "passed" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            for prefix, label in _CRITERIA:
                if name.startswith(prefix):
                    # Failures win over an earlier PASS from another phase.
                    if rows.get(prefix, (None, "PASS"))[1] != "FAIL":
                        rows[prefix] = (label, _WORD[status])
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for prefix, label in _CRITERIA:
        if prefix in rows:
            label, word = rows[prefix]
            terminalreporter.write_line(f"{label}: {word}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
