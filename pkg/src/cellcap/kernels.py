"""Backend selection for the simulator's hot loops.

The compiled extension is used when it imports; otherwise, or when
``CELLCAP_PURE_PYTHON`` is set to a non-empty value other than ``0``, the numpy
implementation takes over.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced_pure = os.environ.get("CELLCAP_PURE_PYTHON", "") not in ("", "0")

if _forced_pure:
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
nearest_torus = _impl.nearest_torus
link_sinr = _impl.link_sinr


def available_backends() -> dict[str, object]:
    """All importable backends by name, for benchmarks and cross-checks."""
    out: dict[str, object] = {"numpy": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
