"""Kernel backend selection.

The compiled module ``mhd2d._kernels`` is used when it imports; otherwise, or when
``MHD2D_PURE_PYTHON`` is set to a non-empty value, the numpy fallback is used.
Both expose: project, stress, assemble, if_rk2_predict, if_rk2_correct, weighted_sum.
"""

import os

from mhd2d import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if not os.environ.get("MHD2D_PURE_PYTHON"):
    try:
        from mhd2d import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

project = _impl.project
stress = _impl.stress
assemble = _impl.assemble
if_rk2_predict = _impl.if_rk2_predict
if_rk2_correct = _impl.if_rk2_correct
weighted_sum = _impl.weighted_sum


def backends() -> dict:
    """All importable backends by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from mhd2d import _kernels as compiled
    except ImportError:
        return out
    out["cython"] = compiled
    return out
