"""Backend selection for the separable correlation kernel.

The compiled extension is used when it imported successfully and the input
is float64; everything else (other dtypes, missing extension) goes through
the numpy implementation.
"""

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_backend = "compiled" if _ckernels is not None else "python"


def available_backends():
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def get_backend():
    return _backend


def set_backend(name):
    """Force ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _backend
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _ckernels is None:
        raise RuntimeError("compiled kernels are not available in this installation")
    previous, _backend = _backend, name
    return previous


def correlate_sep(x, w, backend=None):
    """Valid-mode separable correlation over the last two axes of ``x``."""
    backend = backend or _backend
    x = np.asarray(x)
    lead = x.shape[:-2]
    if backend == "compiled" and x.dtype == np.float64:
        planes = np.ascontiguousarray(x.reshape((-1,) + x.shape[-2:]))
        out = _ckernels.correlate_sep(planes, np.ascontiguousarray(w, dtype=np.float64))
        return out.reshape(lead + out.shape[-2:])
    return _pykernels.correlate_sep(x, w)
