"""Window-kernel backend selection.

The compiled extension (quanvseg._kernels, built from _kernels.pyx) is
preferred; the pure-NumPy module (quanvseg._kernels_py) is the fallback.
Selection happens once at import.  Set QUANVSEG_BACKEND=ext or =python
to force a choice (ext raises if the extension was never built).
"""

from __future__ import annotations

import os

from .exceptions import ConfigError


def _select():
    want = os.environ.get("QUANVSEG_BACKEND", "auto").strip().lower() or "auto"
    if want not in ("auto", "ext", "python"):
        raise ConfigError(
            f"QUANVSEG_BACKEND must be 'auto', 'ext' or 'python', got {want!r}"
        )
    if want in ("auto", "ext"):
        try:
            from . import _kernels

            return _kernels, "ext"
        except ImportError:
            if want == "ext":
                raise ConfigError(
                    "QUANVSEG_BACKEND=ext but the compiled extension is not installed"
                ) from None
    from . import _kernels_py

    return _kernels_py, "python"


_KERNEL, _NAME = _select()


def kernel():
    """The active kernel module (run_windows provider)."""
    return _KERNEL


def backend_name() -> str:
    """'ext' when the compiled extension is active, else 'python'."""
    return _NAME
