"""Hot-kernel backend selection.

Imports the compiled core (perciso._core) when present, otherwise the pure
numpy/scipy fallback.  Set PERCISO_PURE=1 to force the fallback; both expose
the same four functions with identical semantics.
"""

import os

from . import _purekernels

if os.environ.get("PERCISO_PURE", "") == "1":
    _impl = _purekernels
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _purekernels
        BACKEND = "pure"

edge_open_bits = _impl.edge_open_bits
min_labels = _impl.min_labels
max_flow_unit = _impl.max_flow_unit
anneal_connected = _impl.anneal_connected

pure = _purekernels

__all__ = ["BACKEND", "edge_open_bits", "min_labels", "max_flow_unit",
           "anneal_connected", "pure"]
