"""Integration-kernel backend selection.

The compiled extension is preferred; the pure-Python twin is the fallback.
Set PLATOON_LAB_BACKEND=python (or =compiled) to force a choice at import
time. Both backends produce bit-identical trajectories.
"""

from __future__ import annotations

import os

_requested = os.environ.get("PLATOON_LAB_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _kernel_py as _impl
    BACKEND = "python"
elif _requested == "compiled":
    from . import _kernel as _impl  # raises if the extension was not built
    BACKEND = "compiled"
else:
    try:
        from . import _kernel as _impl
        BACKEND = "compiled"
    except ImportError:
        from . import _kernel_py as _impl
        BACKEND = "python"

run_closed_loop = _impl.run_closed_loop
