"""Backend selection for the trajectory integrators.

VAET_BACKEND=numpy forces the pure-numpy twin; VAET_BACKEND=numba requires
numba and fails loudly without it; unset prefers numba and falls back.
Both backends expose run_closed / run_markov / run_nm_diag / run_nm_offdiag
with identical signatures and status-code semantics.
"""

import os

from ..errors import ConfigurationError

_requested = os.environ.get("VAET_BACKEND", "").strip().lower()

if _requested == "numpy":
    from . import numpy_backend as _impl
    BACKEND = "numpy"
elif _requested in ("", "numba"):
    try:
        from . import numba_backend as _impl
        BACKEND = "numba"
    except ImportError as exc:
        if _requested == "numba":
            raise ConfigurationError(
                f"VAET_BACKEND=numba but the numba backend failed to import: {exc}"
            ) from exc
        from . import numpy_backend as _impl
        BACKEND = "numpy"
else:
    raise ConfigurationError(
        f"VAET_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

run_closed = _impl.run_closed
run_markov = _impl.run_markov
run_nm_diag = _impl.run_nm_diag
run_nm_offdiag = _impl.run_nm_offdiag


def backend_name() -> str:
    return BACKEND
