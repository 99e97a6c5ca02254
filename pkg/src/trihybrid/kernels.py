"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback is used. Setting ``TRIHYBRID_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["BACKEND", "get_backend", "available_backends", "lorentzian_chain", "pinch_amplitudes", "phi_sum"]


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "cython")
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


if _ckernels is not None and os.environ.get("TRIHYBRID_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = get_backend(BACKEND)
lorentzian_chain = _impl.lorentzian_chain
pinch_amplitudes = _impl.pinch_amplitudes
phi_sum = _impl.phi_sum
