"""Pure NumPy implementations of the hot kernels.

Selected at import time when the compiled extension is unavailable or when
KRESCALE_PURE_PYTHON is set.  Each function here matches the signature and
semantics of its counterpart in the compiled module exactly.
"""

import numpy as np


def dft3(field):
    """Direct-summation 3-D DFT (negative exponent, no normalization).

    The triple sum is evaluated axis by axis against explicit twiddle
    matrices, which regroups the summation without changing any term.
    """
    m, n, c = field.shape
    em = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m)
    en = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    ec = np.exp(-2j * np.pi * np.outer(np.arange(c), np.arange(c)) / c)
    t = np.tensordot(em, field, axes=(1, 0))
    t = np.tensordot(en, t, axes=(1, 1)).transpose(1, 0, 2)
    return np.tensordot(t, ec, axes=(2, 1))


def circular_conv2(inp, ker):
    """True circular convolution on a torus, summed over channels.

    out[m, n] = sum_{x, y, c} inp[x, y, c] * ker[(m - x) % M, (n - y) % N, c]
    """
    m, n, c = inp.shape
    if m * n * m * n * c <= 8_000_000:
        rows = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
        cols = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        gathered = ker[rows[:, None, :, None], cols[None, :, None, :], :]
        return np.einsum("mnxyc,xyc->mn", gathered, inp)
    out = np.zeros((m, n))
    for x in range(m):
        for y in range(n):
            shifted = np.roll(ker, (x, y), axis=(0, 1))
            out += np.tensordot(inp[x, y, :], shifted, axes=(0, 2))
    return out


def conv2d_forward(inp, weights, stride_h, stride_w, pad_h, pad_w):
    """Strided cross-correlation with zero padding, no bias.

    inp is (H, W, Cin), weights is (O, Cin, KH, KW); output is (Ho, Wo, O).
    """
    h, w, cin = inp.shape
    n_out, _, kh, kw = weights.shape
    out_h = (h + 2 * pad_h - kh) // stride_h + 1
    out_w = (w + 2 * pad_w - kw) // stride_w + 1
    padded = np.zeros((h + 2 * pad_h, w + 2 * pad_w, cin))
    padded[pad_h : pad_h + h, pad_w : pad_w + w, :] = inp
    out = np.zeros((out_h, out_w, n_out))
    for i in range(kh):
        for j in range(kw):
            window = padded[
                i : i + out_h * stride_h : stride_h,
                j : j + out_w * stride_w : stride_w,
                :,
            ]
            out += np.tensordot(window, weights[:, :, i, j], axes=(2, 1))
    return out
