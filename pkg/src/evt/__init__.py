"""Weakly supervised latent-space manipulation with categorical evidence.

Submodules are imported lazily so the command line entry point can honour
``EVT_THREADS`` before numpy initialises its thread pools.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("nn", "evidence", "metrics", "data", "pipeline", "config",
               "report", "cli")

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
