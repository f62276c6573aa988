"""Cosine test fields, the direct-summation DFT, and spectrum verifiers.

For a grid cosine A * cos(2*pi*(u*m/M + v*n/N + w*c/C) + phi) the DFT bin at
(u, v, w) holds A*M*N*C/2 * exp(j*phi), and the conjugate bin at
(-u mod M, -v mod N, -w mod C) holds the conjugate.  When every axis
frequency is self-conjugate (2u = 0 mod M and likewise for v, w) the two bins
coincide and the matched bin holds A*M*N*C*cos(phi) instead.
``matched_bin_value`` implements exactly this closed form, and the verifiers
compare measured bin magnitudes against it:

* ``verify_ratio``: the same cosine sampled on an (a*M, b*N, C) grid scales
  the matched bin by a*b.
* ``verify_attenuation``: zeroing every fine-grid sample off the coarse
  lattice (dilation) divides the matched bin by a*b, because only one sample
  in a*b survives.
"""

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._backend import dft3_core
from .errors import (
    BadFraction,
    BadMethod,
    DegenerateAmplitude,
    EmptyShape,
    FrequencyOutOfRange,
    IndexOutOfRange,
    IoFailure,
    ShapeMismatch,
)
from .tensor import ComplexGrid, Tensor


@dataclass(frozen=True)
class CosineSpec:
    """A single grid cosine: amplitude, integer frequencies, phase."""

    amplitude: float
    u: int
    v: int
    w: int
    phase: float = 0.0


def _check_freqs(spec, m, n, c):
    if m < 1 or n < 1 or c < 1:
        raise EmptyShape(f"grid dimensions must be >= 1, got {(m, n, c)}")
    for f, d, axis in ((spec.u, m, "u"), (spec.v, n, "v"), (spec.w, c, "w")):
        if not 0 <= f < d:
            raise FrequencyOutOfRange(
                f"frequency {axis}={f} outside [0, {d}) for its axis"
            )


def cosine_wave(spec, m, n, c):
    """Sample the cosine on an (m, n, c) grid as a rank-3 tensor."""
    _check_freqs(spec, m, n, c)
    phases = (
        2.0
        * np.pi
        * (
            spec.u * np.arange(m)[:, None, None] / m
            + spec.v * np.arange(n)[None, :, None] / n
            + spec.w * np.arange(c)[None, None, :] / c
        )
        + spec.phase
    )
    return Tensor.from_array(spec.amplitude * np.cos(phases))


def dft3(field):
    """Unnormalized 3-D DFT of a rank-3 tensor by direct summation.

    The negative-exponent sum is evaluated axis by axis, an exact regrouping
    of the triple sum.  No FFT is involved.
    """
    if field.rank != 3:
        raise ShapeMismatch(f"expected a rank-3 field, got rank {field.rank}")
    return ComplexGrid(dft3_core(field.array))


def amplitude_at(grid, u, v, w):
    """Complex value of one spectrum bin."""
    if grid.rank != 3:
        raise ShapeMismatch(f"expected a rank-3 grid, got rank {grid.rank}")
    m, n, c = grid.shape
    for f, d, axis in ((u, m, "u"), (v, n, "v"), (w, c, "w")):
        if not 0 <= f < d:
            raise IndexOutOfRange(f"bin {axis}={f} outside [0, {d})")
    return complex(grid.array[u, v, w])


def matched_bin_value(spec, m, n, c):
    """Closed-form DFT value at bin (u, v, w) for the cosine on (m, n, c).

    Returns A*m*n*c/2 * exp(j*phi), doubled into A*m*n*c*cos(phi) when the
    conjugate image lands on the same bin (every axis self-conjugate).
    """
    _check_freqs(spec, m, n, c)
    half = 0.5 * spec.amplitude * m * n * c
    value = half * cmath.exp(1j * spec.phase)
    if (2 * spec.u) % m == 0 and (2 * spec.v) % n == 0 and (2 * spec.w) % c == 0:
        value += half * cmath.exp(-1j * spec.phase)
    return value


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of one measured-vs-predicted magnitude comparison."""

    measured: float
    predicted: float
    rel_err: float


def _predicted_ratio(spec, num_dims, den_dims):
    """|matched bin on num grid| / |matched bin on den grid| with guards."""
    if spec.amplitude == 0.0:
        raise DegenerateAmplitude("amplitude must be non-zero")
    num = abs(matched_bin_value(spec, *num_dims))
    den = abs(matched_bin_value(spec, *den_dims))
    num_scale = abs(spec.amplitude) * math.prod(num_dims)
    den_scale = abs(spec.amplitude) * math.prod(den_dims)
    if num <= 1e-12 * num_scale or den <= 1e-12 * den_scale:
        raise DegenerateAmplitude(
            "matched bin vanishes (conjugate overlap with cos(phase) = 0)"
        )
    return num / den


def verify_ratio(spec, m, n, c, scale):
    """Compare fine-grid vs base-grid matched-bin magnitudes.

    The same cosine sampled on (a*m, b*n, c) has a matched bin a*b times
    larger; the prediction is taken from the closed form on each grid, so
    conjugate-overlap cases are predicted exactly as well.
    """
    fine_dims = (scale.a * m, scale.b * n, c)
    predicted = _predicted_ratio(spec, fine_dims, (m, n, c))
    base = abs(amplitude_at(dft3(cosine_wave(spec, m, n, c)), spec.u, spec.v, spec.w))
    fine = abs(amplitude_at(dft3(cosine_wave(spec, *fine_dims)), spec.u, spec.v, spec.w))
    measured = fine / base
    return VerifyReport(measured, predicted, abs(measured - predicted) / predicted)


def verify_attenuation(spec, m, n, c, scale):
    """Compare the dilated field's matched bin against the fine-grid one.

    Zeroing every fine-grid sample whose row is not a multiple of a or whose
    column is not a multiple of b leaves the base-grid samples embedded in
    zeros; the matched bin then equals the base-grid closed form, a factor
    1/(a*b) below the fine-grid value.
    """
    fine_dims = (scale.a * m, scale.b * n, c)
    predicted = _predicted_ratio(spec, (m, n, c), fine_dims)
    fine_field = cosine_wave(spec, *fine_dims).array
    dilated = np.zeros_like(fine_field)
    dilated[:: scale.a, :: scale.b, :] = fine_field[:: scale.a, :: scale.b, :]
    fine = abs(amplitude_at(dft3(Tensor.from_array(fine_field)), spec.u, spec.v, spec.w))
    kept = abs(amplitude_at(dft3(Tensor.from_array(dilated)), spec.u, spec.v, spec.w))
    measured = kept / fine
    return VerifyReport(measured, predicted, abs(measured - predicted) / predicted)


@dataclass(frozen=True)
class SpectrumReport:
    """Magnitude spectrum of a plane plus its baseband energy split.

    ``grid`` is the complex spectrum for a single plane and None for the
    averaged spectrum of a kernel stack.
    """

    grid: ComplexGrid | None
    magnitude: Tensor
    log1p_magnitude: Tensor
    baseband_energy: float
    total_energy: float


def _energy_split(magnitude, fraction):
    if not 0.0 < fraction <= 1.0:
        raise BadFraction(f"baseband fraction must be in (0, 1], got {fraction}")
    total = float(np.sum(magnitude**2))
    shifted = np.fft.fftshift(magnitude)
    h, w = magnitude.shape
    ch, cw = h // 2, w // 2
    half_h = int(math.floor(h * fraction / 2.0))
    half_w = int(math.floor(w * fraction / 2.0))
    block = shifted[
        max(ch - half_h, 0) : ch + half_h + 1,
        max(cw - half_w, 0) : cw + half_w + 1,
    ]
    return float(np.sum(block**2)), total


def spectrum_report(plane, fraction):
    """Spectrum of a rank-2 plane with the energy inside the centered
    baseband rectangle covering ``fraction`` of each axis."""
    if plane.rank != 2:
        raise ShapeMismatch(f"expected a rank-2 plane, got rank {plane.rank}")
    spec = dft3_core(plane.array[:, :, None])[:, :, 0]
    magnitude = np.abs(spec)
    baseband, total = _energy_split(magnitude, fraction)
    return SpectrumReport(
        grid=ComplexGrid(spec),
        magnitude=Tensor.from_array(magnitude),
        log1p_magnitude=Tensor.from_array(np.log1p(magnitude)),
        baseband_energy=baseband,
        total_energy=total,
    )


def average_spectrum_report(weights, fraction):
    """Mean magnitude spectrum over every (out, in) plane of a kernel stack.

    The per-plane DFTs are batched in one direct-summation contraction; the
    energy split is computed on the averaged magnitude.
    """
    if weights.rank != 4:
        raise ShapeMismatch(f"expected rank-4 weights, got rank {weights.rank}")
    n_out, n_in, kh, kw = weights.shape
    planes = weights.array.reshape(n_out * n_in, kh, kw)
    em = np.exp(-2j * np.pi * np.outer(np.arange(kh), np.arange(kh)) / kh)
    en = np.exp(-2j * np.pi * np.outer(np.arange(kw), np.arange(kw)) / kw)
    spectra = np.einsum("um,pmn,vn->puv", em, planes, en)
    magnitude = np.mean(np.abs(spectra), axis=0)
    baseband, total = _energy_split(magnitude, fraction)
    return SpectrumReport(
        grid=None,
        magnitude=Tensor.from_array(magnitude),
        log1p_magnitude=Tensor.from_array(np.log1p(magnitude)),
        baseband_energy=baseband,
        total_energy=total,
    )


def export_spectrum(report, sink, fmt):
    """Write a spectrum report to a binary stream.

    csv: header "row,col,magnitude,log1p", one row per bin in row-major
    order, floats printed with 17 significant digits.
    pgm: binary P5, maxval 65535, big-endian 16-bit samples of the
    fftshift-centered log1p magnitude normalized to the full range (all
    zeros when the range is empty).
    """
    mag = report.magnitude.array
    lg = report.log1p_magnitude.array

    def write(payload):
        try:
            sink.write(payload)
        except OSError as exc:
            raise IoFailure(f"write failed: {exc}") from exc

    if fmt == "csv":
        text = io.StringIO()
        writer = csv.writer(text, lineterminator="\n")
        writer.writerow(["row", "col", "magnitude", "log1p"])
        h, w = mag.shape
        for r in range(h):
            for col in range(w):
                writer.writerow(
                    [r, col, f"{mag[r, col]:.17g}", f"{lg[r, col]:.17g}"]
                )
        write(text.getvalue().encode("ascii"))
    elif fmt == "pgm":
        shifted = np.fft.fftshift(lg)
        lo = float(shifted.min())
        hi = float(shifted.max())
        if hi > lo:
            scaled = np.rint((shifted - lo) / (hi - lo) * 65535.0)
        else:
            scaled = np.zeros_like(shifted)
        h, w = shifted.shape
        write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        write(scaled.astype(">u2").tobytes())
    else:
        raise BadMethod(f"unknown export format {fmt!r}")
