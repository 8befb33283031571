"""Kernel backend selection.

The compiled extension is used when importable; set FEDCAST_KERNELS=python to
force the numpy fallback or FEDCAST_KERNELS=compiled to require the extension.
A single process always uses one backend, so runs stay bit-reproducible.
"""

import os

from . import reference

_choice = os.environ.get("FEDCAST_KERNELS", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"FEDCAST_KERNELS must be auto|compiled|python, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise
if _impl is None:
    _impl = reference

BACKEND = _impl.NAME
forward_batch = _impl.forward_batch
backward_batch = _impl.backward_batch

__all__ = ["BACKEND", "forward_batch", "backward_batch", "reference"]
