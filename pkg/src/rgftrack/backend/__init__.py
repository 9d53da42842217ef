"""Numerics backends for the per-pixel hot loops.

Two interchangeable implementations of the same kernels:

* ``_kernels`` — Cython extension, used when built (the default);
* ``numpy_impl`` — vectorized numpy fallback, always available.

Selection happens once at import.  ``RGFTRACK_BACKEND=numpy`` forces the
fallback; ``RGFTRACK_BACKEND=compiled`` fails loudly if the extension is
missing.  Both backends accumulate in a fixed order, so results are
deterministic run to run within a backend.
"""

import os

from . import numpy_impl

_compiled = None
_forced = os.environ.get("RGFTRACK_BACKEND", "").strip().lower()
if _forced not in ("", "numpy", "compiled"):
    raise ValueError(f"RGFTRACK_BACKEND must be 'numpy' or 'compiled', got {_forced!r}")
if _forced != "numpy":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    if _forced == "compiled" and _compiled is None:
        raise ImportError("RGFTRACK_BACKEND=compiled but the extension is not built")

_impl = _compiled if _compiled is not None else numpy_impl


def backend_name():
    """'compiled' when the Cython kernels are active, else 'numpy'."""
    return "numpy" if _impl is numpy_impl else "compiled"


def available_backends():
    names = ["numpy"]
    if _compiled is not None:
        names.append("compiled")
    return names


def impl_for(name=None):
    """Backend module by name (None = the active one)."""
    if name is None:
        return _impl
    if name == "numpy":
        return numpy_impl
    if name == "compiled":
        if _compiled is None:
            raise ValueError("compiled backend is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def raycast_z(vertices, triangles, dirs, prune=True):
    """Nearest positive intersection parameter per ray, NaN for none.

    Rays start at the camera origin with directions given as rows of
    ``dirs``; directions carry a unit z component so the parameter is the
    z-depth of the hit.
    """
    return _impl.raycast_z(vertices, triangles, dirs, prune)


def accumulate_info(depths, y, xc, g, w_mean, w_cov, noise_var, tail_weight,
                    tail_value, log_ratio_max, floor_rel, miss_value):
    """Fused per-pixel feature update accumulation; see numpy_impl for docs."""
    return _impl.accumulate_info(depths, y, xc, g, w_mean, w_cov, noise_var,
                                 tail_weight, tail_value, log_ratio_max,
                                 floor_rel, miss_value)
