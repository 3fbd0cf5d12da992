"""Backend selection for the search and prediction kernels.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_pycore`` takes over. Setting ``REALTREES_PURE=1`` forces the
fallback.
"""
from __future__ import annotations

import os

from . import _pycore

try:  # pragma: no cover - depends on the build
    from . import _core
except ImportError:  # pragma: no cover
    _core = None

_BACKENDS = {"python": _pycore}
if _core is not None:
    _BACKENDS["cython"] = _core


def available() -> list[str]:
    return sorted(_BACKENDS)


def backend(name: str | None = None):
    """Return the kernel module ``name`` or the default one."""
    if name is not None:
        return _BACKENDS[name]
    if os.environ.get("REALTREES_PURE", "") not in ("", "0") or _core is None:
        return _pycore
    return _core
