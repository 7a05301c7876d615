"""Kernel backend selection.

The compiled extension (:mod:`linescan._kernels`) is preferred; the numpy
fallback (:mod:`linescan._kernels_py`) is selected automatically when the
extension is missing. Both produce bit-identical output, so the choice only
affects speed. Set ``LINESCAN_BACKEND=python`` or ``=cython`` to force one.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load_cython():
    from . import _kernels  # noqa: PLC0415
    return _kernels


def _select() -> ModuleType:
    forced = os.environ.get("LINESCAN_BACKEND", "").strip().lower()
    if forced == "python":
        return _kernels_py
    if forced == "cython":
        return _load_cython()  # let the ImportError surface: it was asked for
    if forced:
        raise ValueError(
            f"LINESCAN_BACKEND must be 'python' or 'cython', got {forced!r}")
    try:
        return _load_cython()
    except ImportError:
        return _kernels_py


_active = _select()


def active_backend() -> ModuleType:
    """The kernel module in use."""
    return _active


def active_backend_name() -> str:
    return _active.BACKEND_NAME


def available_backends() -> dict:
    """Name -> module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        out["cython"] = _load_cython()
    except ImportError:
        pass
    return out


def use_backend(name: str) -> None:
    """Switch the active backend at runtime (mainly for tests/benchmarks)."""
    global _active
    mods = available_backends()
    if name not in mods:
        raise ValueError(f"backend {name!r} not available; have {sorted(mods)}")
    _active = mods[name]
