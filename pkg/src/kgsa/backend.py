"""Selects the compiled core when available, the numpy fallback otherwise.

Set ``KGSA_BACKEND=python`` or ``KGSA_BACKEND=compiled`` to force a choice;
forcing ``compiled`` raises if the extension was not built.
"""

from __future__ import annotations

import os

from . import _core_py

_forced = os.environ.get("KGSA_BACKEND")

if _forced == "python":
    _impl = _core_py
elif _forced == "compiled":
    from . import _core as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

sqdist_cross = _impl.sqdist_cross
pair_sqdist = _impl.pair_sqdist
second_neighbors = _impl.second_neighbors
reactor_rk4 = _impl.reactor_rk4


def backend_name() -> str:
    return "python" if _impl is _core_py else "compiled"
