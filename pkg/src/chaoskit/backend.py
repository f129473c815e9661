"""Kernel backend selection.

The compiled extension is used when importable; set ``CHAOSKIT_BACKEND=python``
to force the numpy fallback.  Both expose the same four functions.
"""
from __future__ import annotations

import os

from chaoskit import _purecore

_forced = os.environ.get("CHAOSKIT_BACKEND", "").strip().lower()

_impl = _purecore
NAME = "python"
if _forced != "python":
    try:
        from chaoskit import _fastcore as _impl  # type: ignore[no-redef]

        NAME = "cython"
    except ImportError:
        if _forced == "cython":
            raise

hermite_table = _impl.hermite_table
product_basis = _impl.product_basis
gradient_basis = _impl.gradient_basis
flow_products = _impl.flow_products


def implementations() -> dict:
    """All importable backends by name (for parity tests and benchmarks)."""
    out = {"python": _purecore}
    try:
        from chaoskit import _fastcore

        out["cython"] = _fastcore
    except ImportError:
        pass
    return out
