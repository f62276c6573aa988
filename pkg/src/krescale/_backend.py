"""Backend selection for the hot kernels.

The compiled extension is preferred; the NumPy fallback is used when the
extension is missing or when the environment variable KRESCALE_PURE_PYTHON
is set to anything other than "" or "0".  Both backends expose identical
semantics; the wrappers below only normalize dtypes and layout.
"""

import os

import numpy as np

_force_python = os.environ.get("KRESCALE_PURE_PYTHON", "").strip() not in ("", "0")

if _force_python:
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"


def backend_name():
    """Name of the active backend: "compiled" or "python"."""
    return BACKEND


def dft3_core(field):
    arr = np.ascontiguousarray(field, dtype=np.complex128)
    return np.asarray(_impl.dft3(arr))


def circular_conv2_core(inp, ker):
    a = np.ascontiguousarray(inp, dtype=np.float64)
    b = np.ascontiguousarray(ker, dtype=np.float64)
    return np.asarray(_impl.circular_conv2(a, b))


def conv2d_forward_core(inp, weights, stride_h, stride_w, pad_h, pad_w):
    a = np.ascontiguousarray(inp, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    return np.asarray(
        _impl.conv2d_forward(a, w, stride_h, stride_w, pad_h, pad_w)
    )
