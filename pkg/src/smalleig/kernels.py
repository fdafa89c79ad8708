"""Kernel backend selection.

The compiled extension is preferred when present; the pure numpy/Python
fallback is used otherwise.  Set SMALLEIG_KERNELS=py (or =c) to force a
backend, e.g. for the backend-comparison benchmark.
"""

import os

from . import _kernels_py

_choice = os.environ.get("SMALLEIG_KERNELS", "auto")
_impl = None
if _choice in ("auto", "c"):
    try:
        from . import _kernels as _impl
    except ImportError:
        if _choice == "c":
            raise
if _impl is None:
    _impl = _kernels_py

BACKEND = _impl.BACKEND

expansion_of = _impl.expansion_of
exact_dot = _impl.exact_dot
dot_expansions = _impl.dot_expansions
sturm_counts = _impl.sturm_counts
dot_plain = _impl.dot_plain


def get_backend(name):
    """Return a kernel module by name ("c" or "python"); for benchmarks."""
    if name in ("python", "py"):
        return _kernels_py
    if name == "c":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
