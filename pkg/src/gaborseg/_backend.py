"""Kernel backend selection.

The hot loops (im2col/col2im for 3D convolution and the resampling used by
augmentation) exist twice: as numba ``@njit`` kernels and as pure-numpy
vectorized code.  ``GABORSEG_BACKEND=numpy`` forces the numpy path; the
default is numba when it can be imported.
"""
import os
import types
import warnings

AVAILABLE = ("numba", "numpy")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def _requested():
    name = os.environ.get("GABORSEG_BACKEND", "numba").strip().lower()
    if name not in AVAILABLE:
        warnings.warn(f"unknown GABORSEG_BACKEND={name!r}, using numpy")
        return "numpy"
    if name == "numba" and not HAS_NUMBA:
        warnings.warn("numba not importable, falling back to numpy kernels")
        return "numpy"
    return name


def get_kernels(name=None) -> types.ModuleType:
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = name or BACKEND
    if name == "numba":
        from . import _kernels_numba as mod
    elif name == "numpy":
        from . import _kernels_numpy as mod
    else:
        raise ValueError(f"unknown backend {name!r}; expected one of {AVAILABLE}")
    return mod


BACKEND = _requested()
