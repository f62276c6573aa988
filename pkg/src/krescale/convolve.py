"""Brute-force convolution and the scaled-convolution equivalence verifier.

Two convolution regimes live here and stay distinct:

* ``conv3d_direct`` / ``conv3d_scaled``: zero-padded strided cross-correlation
  (the deep-learning convention) used by the network forward pass.
* ``circular_conv3d``: true convolution on the torus, used by the verifier.
  The equivalence claim is a Fourier-series argument, so it holds exactly
  only in the periodic regime; zero padding breaks it at borders.

The verifier builds band-limited periodic fields from explicit cosine
components, supersamples them analytically (no interpolation error), and
checks that 1/(a*b) times the fine-grid circular convolution agrees with the
base-grid convolution at the lattice points (a*m, b*n).  A DFT-product route
recomputes each circular convolution as an independent cross-check.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import circular_conv2_core, conv2d_forward_core, dft3_core
from .errors import ChannelMismatch, EmptyOutput, GridMismatch, ShapeMismatch
from .spectral import _check_freqs, cosine_wave
from .tensor import Tensor


@dataclass(frozen=True)
class ConvConfig:
    """Stride and zero padding for the linear convolution regime."""

    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0
    padding_mode: str = "zeros"

    def __post_init__(self):
        if self.stride_h < 1 or self.stride_w < 1:
            raise ShapeMismatch("strides must be >= 1")
        if self.pad_h < 0 or self.pad_w < 0:
            raise ShapeMismatch("padding must be >= 0")
        if self.padding_mode != "zeros":
            raise ShapeMismatch(f"unsupported padding mode {self.padding_mode!r}")


@dataclass(frozen=True)
class CosineField:
    """A periodic field on an (m, n, c) grid given as a sum of cosines."""

    components: tuple
    m: int
    n: int
    c: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for comp in self.components:
            _check_freqs(comp, self.m, self.n, self.c)


def build_field_tensor(f):
    """Sample the field on its own grid; an empty field is all zeros."""
    total = np.zeros((f.m, f.n, f.c))
    for comp in f.components:
        total += cosine_wave(comp, f.m, f.n, f.c).array
    return Tensor.from_array(total)


def supersample_field(f, scale):
    """Sample the field analytically on the (a*m, b*n, c) grid.

    Each component keeps its integer frequencies, now read against the finer
    grid, so the result is the exact supersample with no interpolation error,
    and subsampling at stride (a, b) recovers the base samples.
    """
    total = np.zeros((scale.a * f.m, scale.b * f.n, f.c))
    for comp in f.components:
        total += cosine_wave(comp, scale.a * f.m, scale.b * f.n, f.c).array
    return Tensor.from_array(total)


def _conv_shapes(inp, kernel, cfg):
    h, w, c_in = inp.shape
    n_out, k_in, kh, kw = kernel.weights.shape
    if k_in != c_in:
        raise ChannelMismatch(
            f"input has {c_in} channels, kernel expects {k_in}"
        )
    out_h = (h + 2 * cfg.pad_h - kh) // cfg.stride_h + 1
    out_w = (w + 2 * cfg.pad_w - kw) // cfg.stride_w + 1
    if out_h < 1 or out_w < 1:
        raise EmptyOutput(
            f"output would be {out_h}x{out_w} for input {h}x{w}, "
            f"kernel {kh}x{kw}, config {cfg}"
        )
    return out_h, out_w, n_out


def conv3d_direct(inp, kernel, cfg):
    """Zero-padded strided cross-correlation plus per-channel bias.

    out[m, n, o] = bias[o]
        + sum_{x, y, c} inp[m*sh + x - ph, n*sw + y - pw, c] * k[o, c, x, y]
    with out-of-range input samples read as zero.
    """
    if inp.rank != 3:
        raise ShapeMismatch(f"expected a rank-3 input, got rank {inp.rank}")
    _conv_shapes(inp, kernel, cfg)
    raw = conv2d_forward_core(
        inp.array,
        kernel.weights.array,
        cfg.stride_h,
        cfg.stride_w,
        cfg.pad_h,
        cfg.pad_w,
    )
    return Tensor.from_array(raw + kernel.bias.array[None, None, :])


def conv3d_scaled(inp, kernel, cfg, scale):
    """The attenuated form: 1/(a*b) times the correlation sum, bias unscaled."""
    if inp.rank != 3:
        raise ShapeMismatch(f"expected a rank-3 input, got rank {inp.rank}")
    _conv_shapes(inp, kernel, cfg)
    raw = conv2d_forward_core(
        inp.array,
        kernel.weights.array,
        cfg.stride_h,
        cfg.stride_w,
        cfg.pad_h,
        cfg.pad_w,
    )
    raw *= 1.0 / (scale.a * scale.b)
    return Tensor.from_array(raw + kernel.bias.array[None, None, :])


def _check_grids(inp, ker):
    if inp.rank != 3 or ker.rank != 3:
        raise GridMismatch("both fields must be rank 3")
    if inp.shape != ker.shape:
        raise GridMismatch(f"grids differ: {inp.shape} vs {ker.shape}")


def circular_conv3d(inp, ker):
    """True circular convolution on the torus, summed over channels.

    out[m, n] = sum_{x, y, c} inp[x, y, c] * ker[(m-x) % M, (n-y) % N, c]
    """
    _check_grids(inp, ker)
    return Tensor.from_array(circular_conv2_core(inp.array, ker.array))


def circular_conv3d_spectral(inp, ker):
    """The same convolution through the frequency domain.

    Per channel, multiply the two 2-D spectra bin by bin, sum the products
    over channels, and invert (the inverse DFT is the conjugated forward
    transform divided by M*N).  Serves as an independent route against the
    spatial summation.
    """
    _check_grids(inp, ker)
    m, n, c = inp.shape
    product = np.zeros((m, n), dtype=np.complex128)
    for ch in range(c):
        fi = dft3_core(inp.array[:, :, ch][:, :, None])[:, :, 0]
        fk = dft3_core(ker.array[:, :, ch][:, :, None])[:, :, 0]
        product += fi * fk
    inverse = np.conj(dft3_core(np.conj(product)[:, :, None])[:, :, 0]) / (m * n)
    return Tensor.from_array(inverse.real)


@dataclass(frozen=True)
class EquivReport:
    """Lattice-point comparison of base vs scaled fine-grid convolution.

    ``dft_gap`` is the worst spatial-vs-spectral disagreement seen while
    computing the two convolutions.
    """

    max_abs_err: float
    passed: bool
    dft_gap: float


def verify_conv_equivalence(input_f, kernel_f, bias, scale, tol):
    """Check f_s(a*m, b*n) == f(m, n) for exactly supersampled fields.

    f is the circular convolution of the base fields plus bias; f_s is
    1/(a*b) times the circular convolution of the analytically supersampled
    fields plus the same bias.  Reports the worst absolute error over the
    base lattice and whether it is within tol.
    """
    if (input_f.m, input_f.n, input_f.c) != (kernel_f.m, kernel_f.n, kernel_f.c):
        raise GridMismatch(
            f"fields on different grids: "
            f"{(input_f.m, input_f.n, input_f.c)} vs "
            f"{(kernel_f.m, kernel_f.n, kernel_f.c)}"
        )
    base_i = build_field_tensor(input_f)
    base_k = build_field_tensor(kernel_f)
    fine_i = supersample_field(input_f, scale)
    fine_k = supersample_field(kernel_f, scale)

    base_spatial = circular_conv3d(base_i, base_k).array
    fine_spatial = circular_conv3d(fine_i, fine_k).array
    dft_gap = max(
        float(np.max(np.abs(base_spatial - circular_conv3d_spectral(base_i, base_k).array))),
        float(np.max(np.abs(fine_spatial - circular_conv3d_spectral(fine_i, fine_k).array))),
    )

    f_base = base_spatial + bias
    f_fine = fine_spatial / (scale.a * scale.b) + bias
    err = float(np.max(np.abs(f_fine[:: scale.a, :: scale.b] - f_base)))
    return EquivReport(max_abs_err=err, passed=err <= tol, dft_gap=dft_gap)
