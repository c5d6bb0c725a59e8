"""Solver kernel selection: compiled extension with pure-numpy fallback.

The accelerated projected-gradient block (`mfista_chunk`) and the PSD-simplex
projection dominate the workbench runtime, so they exist twice: a Cython
extension built at install time and a plain numpy implementation. The
compiled kernel is preferred when importable; set TOMOLAB_PURE_PYTHON=1 to
force the fallback. Both are driven by the shared fit driver and are covered
by the same test suite.
"""

import functools
import os

from . import driver, pgd_py
from .driver import OBJECTIVE_LSQ, OBJECTIVE_MLE

if os.environ.get("TOMOLAB_PURE_PYTHON"):
    _impl = pgd_py
else:
    try:
        from . import pgd_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pgd_py

BACKEND = "python" if _impl is pgd_py else "cython"
project_psd_simplex = _impl.project_psd_simplex
solve_pgd = functools.partial(driver.solve_pgd, _impl)


def available_backends() -> dict:
    """Importable kernel implementations, keyed by backend name."""
    found = {"python": pgd_py}
    try:
        from . import pgd_cy

        found["cython"] = pgd_cy
    except ImportError:
        pass
    return found


def solver_for(impl) -> "functools.partial":
    """Fit entry point bound to a specific kernel implementation."""
    return functools.partial(driver.solve_pgd, impl)
