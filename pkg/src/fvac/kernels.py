"""Backend selection for the RK4IP kernel.

The compiled FFTW kernel is used when it was built; otherwise the numpy
implementation.  ``FVAC_BACKEND=python`` (or ``compiled``) forces a choice.
"""

import os

from . import _kernel_py

try:
    from . import _rk4ip
except ImportError:  # extension not built
    _rk4ip = None

_BACKENDS = {"python": _kernel_py.integrate}
if _rk4ip is not None:
    _BACKENDS["compiled"] = _rk4ip.integrate


def available_backends():
    return sorted(_BACKENDS)


def default_backend():
    forced = os.environ.get("FVAC_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(f"FVAC_BACKEND={forced!r} unavailable; have {available_backends()}")
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


def get_integrator(name=None):
    name = name or default_backend()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}") from None
