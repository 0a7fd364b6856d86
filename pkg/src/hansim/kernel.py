"""Backend selection for the replica kernel.

The compiled extension is used when it imports; ``HANSIM_PURE_PYTHON=1``
forces the pure-Python implementation.
"""

import os

from . import _pykernel

BACKEND = "python"
run_replica = _pykernel.run_replica

if os.environ.get("HANSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernel
    except ImportError:  # extension not built
        pass
    else:
        run_replica = _ckernel.run_replica
        BACKEND = "cython"

python_run_replica = _pykernel.run_replica
