"""Kernel backend selection.

The compiled extension is used when importable; set ``RCDYN_PURE_PYTHON=1``
to force the numpy fallback (the test-suite checks both agree).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_compiled = None
if not os.environ.get("RCDYN_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        log.info("compiled kernels unavailable, using numpy fallback")

backend = _compiled if _compiled is not None else _pykernels
BACKEND_NAME = "cython" if _compiled is not None else "python"

LORENZ = 0
ROSSLER = 1


def get_backend(name=None):
    """Return the kernel module: ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def have_compiled():
    return _compiled is not None
