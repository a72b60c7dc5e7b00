"""Kernel backend selection.

The compiled extension is used when importable; set ``MISSCOV_BACKEND=python``
to force the numpy fallback (or ``cython`` to fail loudly if it is missing).
"""
import os

_requested = os.environ.get("MISSCOV_BACKEND", "auto").lower()

if _requested == "python":
    from . import _kernels_py as kernels
elif _requested == "cython":
    from . import _kernels as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.NAME


def get_kernels(name=None):
    """Return the kernel module ``name`` ("cython" / "python"), or the active one."""
    if name is None:
        return kernels
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
