"""Backend selection for the simulator's hot loops.

The compiled extension is used when it imports; set ``PRPSIM_PURE_PYTHON=1``
to force the pure-Python fallback. Both backends produce identical output.
"""

import os

from . import _kernels_py

UNSEEN = _kernels_py.UNSEEN
FORWARDED = _kernels_py.FORWARDED
BLOCKED = _kernels_py.BLOCKED
REPLIED = _kernels_py.REPLIED

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("PRPSIM_PURE_PYTHON"):
    _active, BACKEND = _compiled, "compiled"
else:
    _active, BACKEND = _kernels_py, "python"

adjacency = _active.adjacency
rreq_fanout = _active.rreq_fanout
neighbor_order = _active.neighbor_order
neighbor_lists = _active.neighbor_lists


def backends():
    """Map of available backend name -> kernel module."""
    found = {"python": _kernels_py}
    if _compiled is not None:
        found["compiled"] = _compiled
    return found
