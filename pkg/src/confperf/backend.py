"""Kernel backend selection.

The compiled extension is used when it imports; ``CONFPERF_PURE=1`` forces the
numpy fallback (the benchmark and the equivalence tests use both).
"""

import os

from . import _purepy

if os.environ.get("CONFPERF_PURE") == "1":
    _impl = _purepy
    NAME = "python"
else:
    try:
        from . import _native as _impl
        NAME = "native"
    except ImportError:  # extension not built
        _impl = _purepy
        NAME = "python"

best_split = _impl.best_split
smo_solve = _impl.smo_solve
build_tree = _impl.build_tree
