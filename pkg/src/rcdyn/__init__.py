"""Reservoir-computing surrogates of chaotic flows.

Submodules: ``systems`` (reference ODEs), ``reservoir`` (echo-state model),
``analysis`` (diagnostics), ``experiments`` (reproduction recipes) and
``cli``. Attributes are loaded lazily so the CLI can configure threading
before numpy is imported.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "TimeSeries": "timeseries",
    "read_csv": "timeseries",
    "write_csv": "timeseries",
    "ReservoirConfig": "reservoir",
    "ReservoirModel": "reservoir",
    "train": "reservoir",
    "free_run": "reservoir",
    "save_model": "reservoir",
    "load_model": "reservoir",
    "lorenz": "systems",
    "rossler": "systems",
    "integrate": "systems",
}
_SUBMODULES = ("analysis", "cli", "errors", "experiments", "kernels", "reservoir", "systems",
               "timeseries")

__all__ = sorted(_EXPORTS) + list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    if name in _EXPORTS:
        return getattr(importlib.import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
