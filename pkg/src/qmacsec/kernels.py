"""Backend selection for the enumeration kernels.

The compiled extension is used when it was built; ``QMACSEC_BACKEND=python``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from qmacsec import _scanpy

python_backend = _scanpy

try:
    from qmacsec import _scan as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("QMACSEC_BACKEND", "").lower() != "python":
    backend = compiled_backend
    BACKEND = "cython"
else:
    backend = _scanpy
    BACKEND = "python"


def get(name: str | None = None):
    """Kernel module by name (``"cython"``/``"python"``); default is the active one."""
    if name is None:
        return backend
    if name == "python":
        return _scanpy
    if name == "cython":
        if compiled_backend is None:
            raise ImportError("compiled kernel qmacsec._scan is not built")
        return compiled_backend
    raise ValueError(f"unknown kernel backend {name!r}")
