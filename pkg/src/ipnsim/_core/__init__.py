"""Routing kernel backend selection.

Prefers the compiled ``_speedups`` extension; falls back to the pure-Python
reference kernels when the extension is unavailable or when the
``IPNSIM_PURE_PYTHON`` environment variable is set to a non-empty value.
Both backends produce bit-identical results.
"""

import os

from . import fallback

if os.environ.get("IPNSIM_PURE_PYTHON"):
    backend = fallback
    BACKEND_NAME = "python"
else:
    try:
        from . import _speedups as backend  # type: ignore[no-redef]

        BACKEND_NAME = "compiled"
    except ImportError:
        backend = fallback
        BACKEND_NAME = "python"

hop_time = backend.hop_time
dijkstra = backend.dijkstra
bellman_hops = backend.bellman_hops
