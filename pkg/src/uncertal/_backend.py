"""Kernel backend selection.

The compiled extension is preferred when it imports; otherwise the pure
numpy fallback is used. ``UNCERTAL_BACKEND`` forces the choice explicitly
("compiled" or "pure"), which the benchmark and the parity tests rely on.
"""

from __future__ import annotations

import os
from types import ModuleType


def load_backend(name: str) -> ModuleType:
    """Import a backend by name ("compiled" or "pure")."""
    if name == "pure":
        from . import _purepy
        return _purepy
    if name == "compiled":
        from . import _core  # type: ignore[attr-defined]
        return _core
    raise ValueError(f"unknown backend {name!r} (expected 'compiled' or 'pure')")


def _select() -> ModuleType:
    forced = os.environ.get("UNCERTAL_BACKEND", "").strip().lower()
    if forced in ("pure", "python"):
        return load_backend("pure")
    if forced == "compiled":
        return load_backend("compiled")
    if forced in ("", "auto"):
        try:
            return load_backend("compiled")
        except ImportError:
            return load_backend("pure")
    raise ValueError(
        f"UNCERTAL_BACKEND={forced!r} not understood; use 'compiled' or 'pure'")


kernels = _select()


def backend_name() -> str:
    """Name of the kernel backend in use ("compiled" or "pure")."""
    return kernels.NAME
