"""Plane and kernel resampling.

Grids are resampled with align-corners geometry: output index i maps to the
source coordinate i * (in - 1) / (out - 1), so the first and last samples of
every axis are preserved exactly, and when out = a * (in - 1) + 1 every
source sample reappears at output index a * k.  Out-of-range taps clamp to
the edge sample.

``rescale_kernel`` grows a convolution kernel stack for inputs supersampled
by integer factors (a, b).  Interpolated kernels are attenuated by
1 / (a * b), because the supersampled input feeds a * b times as many
samples into each output; dilation is not attenuated, since the inserted
zeros already discard the same share of the mass.  Biases are never scaled.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadMethod, EmptyShape, ShapeMismatch
from .tensor import Tensor

INTERP_METHODS = ("nearest", "bilinear", "bicubic")
METHODS = INTERP_METHODS + ("dilation",)


@dataclass(frozen=True)
class Scale:
    """Integer supersampling factors for the two spatial axes."""

    a: int
    b: int

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ShapeMismatch(f"scale factor {name} must be an integer")
            if v < 1:
                raise ShapeMismatch(f"scale factor {name} must be >= 1, got {v}")


def target_size(base, factor):
    """Resampled extent for an axis: factor * (base - 1) + 1.

    Odd extents stay odd, the endpoints stay aligned, and factor 1 is the
    identity.
    """
    if base < 1:
        raise EmptyShape(f"base extent must be >= 1, got {base}")
    if factor < 1:
        raise ShapeMismatch(f"factor must be >= 1, got {factor}")
    return factor * (base - 1) + 1


def padding_for(extent):
    """Same-style padding for a kernel extent: floor(extent / 2)."""
    if extent < 1:
        raise EmptyShape(f"kernel extent must be >= 1, got {extent}")
    return extent // 2


def _cubic_weight(t):
    # Catmull-Rom kernel (a = -0.5).
    t = abs(t)
    if t <= 1.0:
        return (1.5 * t - 2.5) * t * t + 1.0
    if t < 2.0:
        return -0.5 * (((t - 5.0) * t + 8.0) * t - 4.0)
    return 0.0


def resample_matrix(in_size, out_size, method):
    """One-axis resampling operator as an (out_size, in_size) matrix.

    Every row sums to one.  The fractional offset is computed from the
    integer division i * (in - 1) by (out - 1), so lattice-aligned rows are
    exact unit rows and resampling at factor 1 is bit-exact.
    """
    if method not in INTERP_METHODS:
        raise BadMethod(f"unknown interpolation method {method!r}")
    if in_size < 1 or out_size < 1:
        raise EmptyShape("sizes must be >= 1")
    if out_size < in_size:
        raise ShapeMismatch(
            f"down-sampling not supported ({in_size} -> {out_size})"
        )
    mat = np.zeros((out_size, in_size))
    if in_size == 1:
        # Constant extension: a single sample covers the whole axis.
        mat[:, 0] = 1.0
        return mat
    if out_size == 1:
        mat[0, 0] = 1.0
        return mat

    den = out_size - 1
    last = in_size - 1
    for i in range(out_size):
        num = i * last
        i0 = num // den
        t = (num - i0 * den) / den
        if method == "nearest":
            j = i0 if t < 0.5 else i0 + 1
            mat[i, min(j, last)] = 1.0
        elif method == "bilinear":
            mat[i, i0] += 1.0 - t
            mat[i, min(i0 + 1, last)] += t
        else:
            taps = (
                (i0 - 1, _cubic_weight(1.0 + t)),
                (i0, _cubic_weight(t)),
                (i0 + 1, _cubic_weight(1.0 - t)),
                (i0 + 2, _cubic_weight(2.0 - t)),
            )
            for j, wt in taps:
                mat[i, min(max(j, 0), last)] += wt
    return mat


def interp2d(plane, method, out_h, out_w):
    """Resample a rank-2 plane to (out_h, out_w) with align-corners geometry."""
    if plane.rank != 2:
        raise ShapeMismatch(f"expected a rank-2 plane, got rank {plane.rank}")
    h, w = plane.shape
    rh = resample_matrix(h, out_h, method)
    rw = resample_matrix(w, out_w, method)
    return Tensor.from_array(rh @ plane.array @ rw.T)


def dilate2d(plane, scale):
    """Insert zeros between samples: out[a*i, b*j] = plane[i, j], rest zero.

    The output extent per axis is target_size, so dilation and interpolation
    produce identically shaped kernels.
    """
    if plane.rank != 2:
        raise ShapeMismatch(f"expected a rank-2 plane, got rank {plane.rank}")
    h, w = plane.shape
    out = np.zeros((target_size(h, scale.a), target_size(w, scale.b)))
    out[:: scale.a, :: scale.b] = plane.array
    return Tensor.from_array(out)


@dataclass(frozen=True)
class KernelStack:
    """Convolution weights (out, in, kh, kw) with a per-output bias."""

    weights: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weights.rank != 4:
            raise ShapeMismatch(
                f"kernel weights must be rank 4, got rank {self.weights.rank}"
            )
        if self.bias.rank != 1:
            raise ShapeMismatch(
                f"bias must be rank 1, got rank {self.bias.rank}"
            )
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeMismatch(
                f"bias length {self.bias.shape[0]} does not match "
                f"{self.weights.shape[0]} output channels"
            )


def rescale_kernel(stack, scale, method):
    """Grow a kernel stack for an input supersampled by (a, b).

    Spatial extents become a * (kh - 1) + 1 and b * (kw - 1) + 1.  With an
    interpolation method the values are attenuated by 1 / (a * b); with
    "dilation" the original values are kept on the coarse lattice and zeros
    fill the gaps.  The bias tensor is returned unchanged.
    """
    if method not in METHODS:
        raise BadMethod(f"unknown method {method!r}")
    if scale.a == 1 and scale.b == 1:
        return KernelStack(stack.weights, stack.bias)
    w = stack.weights.array
    n_out, n_in, kh, kw = w.shape
    if method == "dilation":
        out = np.zeros(
            (n_out, n_in, target_size(kh, scale.a), target_size(kw, scale.b))
        )
        out[:, :, :: scale.a, :: scale.b] = w
    else:
        rh = resample_matrix(kh, target_size(kh, scale.a), method)
        rw = resample_matrix(kw, target_size(kw, scale.b), method)
        out = np.tensordot(w, rh, axes=(2, 1))
        out = np.tensordot(out, rw, axes=(2, 1))
        out *= 1.0 / (scale.a * scale.b)
    return KernelStack(Tensor.from_array(out), stack.bias)
