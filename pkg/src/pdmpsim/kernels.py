"""Backend selection for the Hodgkin-Huxley segment loop.

The compiled extension ``pdmpsim._kernels`` is used when it was built;
otherwise the pure-Python twin ``pdmpsim._kernels_py`` takes over.  Setting
the environment variable ``PDMPSIM_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

import numpy as np

from .crk import ButcherTableau
from .hitting import BREAKPOINT_SNAP

__all__ = ["BACKEND", "load_backend", "hh_segment_integrator", "available_backends"]

MAX_STAGES = 4


def load_backend(name: str) -> ModuleType:
    """Import a backend by name: ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        return importlib.import_module("pdmpsim._kernels")
    if name == "python":
        return importlib.import_module("pdmpsim._kernels_py")
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    out = []
    for name in ("compiled", "python"):
        try:
            load_backend(name)
        except ImportError:
            continue
        out.append(name)
    return out


def _select() -> tuple[str, ModuleType]:
    if os.environ.get("PDMPSIM_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "compiled", load_backend("compiled")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()


def hh_segment_integrator(params, backend: str | None = None):
    """Segment integrator for an HH model with the signature expected by
    :func:`pdmpsim.hitting.integrate_until_threshold`."""
    from .models import rate_coefficients

    impl = _impl if backend is None else load_backend(backend)
    rate_set = 1 if params.rate_set == "P1" else 2
    bps = np.array(sorted({params.input_on, params.input_off}), dtype=float)
    p = params

    def integrate(tableau: ButcherTableau, theta, y0, t0, h, threshold, t_cap, max_steps):
        if tableau.s > MAX_STAGES:
            raise ValueError(f"compiled segment loop supports at most {MAX_STAGES} stages")
        g_tot = p.g_Na * theta[7] + p.g_K * theta[12] + p.g_L
        e_tot = p.g_Na * theta[7] * p.E_Na + p.g_K * theta[12] * p.E_K + p.g_L * p.E_L
        coef = rate_coefficients(theta)
        return impl.hh_segment(
            np.ascontiguousarray(tableau.A), np.ascontiguousarray(tableau.beta),
            np.ascontiguousarray(tableau.c), coef, float(g_tot), float(e_tot), float(p.C),
            float(p.input_amplitude), float(p.input_on), float(p.input_off), rate_set,
            float(y0[0]), float(t0), float(h), float(threshold), float(t_cap), bps,
            int(min(max_steps, 2**62)), BREAKPOINT_SNAP)

    integrate.backend = impl.__name__.rsplit(".", 1)[-1]
    return integrate
