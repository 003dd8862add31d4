"""Hot-loop kernels, compiled when the extension is built.

The Cython module is used when importable; otherwise, or when the
environment variable ``MIMETICNS_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the NumPy implementations are used.  ``BACKEND`` names
the active choice.
"""

import os

import numpy as np

from . import _pykernels

_force_py = os.environ.get("MIMETICNS_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "numpy"


def convection_blocks(coef, test_y, trial_y, test_x, trial_x):
    if _ckernels is None:
        return _pykernels.convection_blocks(coef, test_y, trial_y, test_x, trial_x)
    c = np.ascontiguousarray
    return _ckernels.convection_blocks(c(coef, dtype=float), c(test_y, dtype=float),
                                       c(trial_y, dtype=float), c(test_x, dtype=float),
                                       c(trial_x, dtype=float))
