"""Bundled models: a small seeded CNN for the agreement harness and a
VGG-16-shaped network for surgery shape checks.

Weights are He-scaled Gaussians from a fixed seed; no training happens here.
The VGG variant keeps every convolution at the real widths (64..512, 3x3,
pad 1) and the real first-fc in_features (512*7*7 = 25088 at 224x224 input),
but narrows the fc output widths: full 4096-wide fc tensors in float64 would
not fit the memory available here once supersampled, and no shape rule
depends on them.
"""

import numpy as np

from .surgery import parse_manifest
from .tensor import Tensor

TOY_CNN_MANIFEST = """\
# seeded 4-class toy: two conv blocks then one spatial fc
input 32 32 1
conv conv1.weight conv1.bias stride 1 1 pad 1 1
relu
maxpool 2 2
conv conv2.weight conv2.bias stride 1 1 pad 1 1
relu
maxpool 2 2
flatten
fc fc.weight fc.bias spatial 16
"""

_VGG16_WIDTHS = (
    (64, 64),
    (128, 128),
    (256, 256, 256),
    (512, 512, 512),
    (512, 512, 512),
)


def _vgg16_manifest_text(fc_features, classes):
    lines = ["input 224 224 3"]
    for block, widths in enumerate(_VGG16_WIDTHS, 1):
        for pos in range(1, len(widths) + 1):
            name = f"conv{block}_{pos}"
            lines.append(f"conv {name}.weight {name}.bias stride 1 1 pad 1 1")
            lines.append("relu")
        lines.append("maxpool 2 2")
    lines.append("flatten")
    lines.append("fc fc1.weight fc1.bias spatial 512")
    lines.append("relu")
    lines.append("fc fc2.weight fc2.bias spatial 0")
    lines.append("relu")
    lines.append("fc fc3.weight fc3.bias spatial 0")
    lines.append("softmax")
    return "\n".join(lines) + "\n"


def _conv_init(rng, n_out, n_in, k):
    std = np.sqrt(2.0 / (n_in * k * k))
    return Tensor.from_array(std * rng.standard_normal((n_out, n_in, k, k)))


def _fc_init(rng, n_out, n_in):
    std = np.sqrt(2.0 / n_in)
    return Tensor.from_array(std * rng.standard_normal((n_out, n_in)))


def _bias_init(rng, n_out, scale=0.05):
    return Tensor.from_array(scale * rng.uniform(-1.0, 1.0, size=n_out))


def _smooth_planes(rng, count, h, w, max_cycles=1.0, terms=3):
    """Random band-limited planes: sums of low-frequency cosines.

    Interpolation approximates the ideal supersample of such fields well,
    which is the regime the rescaling rules address; spectrally white
    weights have no meaningful supersample to approximate.
    """
    ys = np.arange(h)[:, None] / max(h - 1, 1)
    xs = np.arange(w)[None, :] / max(w - 1, 1)
    planes = np.zeros((count, h, w))
    for i in range(count):
        plane = np.full((h, w), rng.uniform(-0.3, 0.3))
        for _ in range(terms):
            fy = rng.uniform(-max_cycles, max_cycles)
            fx = rng.uniform(-max_cycles, max_cycles)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            plane += rng.uniform(0.3, 1.0) * np.cos(
                2.0 * np.pi * (fy * ys + fx * xs) + phase
            )
        planes[i] = plane
    return planes


def _smooth_conv_init(rng, n_out, n_in, k, gain, max_cycles=1.0):
    planes = _smooth_planes(rng, n_out * n_in, k, k, max_cycles=max_cycles)
    std = np.sqrt(np.mean(planes**2))
    return Tensor.from_array(
        (gain / (std * np.sqrt(n_in * k * k))) * planes.reshape(n_out, n_in, k, k)
    )


def _smooth_fc_init(rng, n_out, channels, side, gain, max_cycles=1.0):
    planes = _smooth_planes(rng, n_out * channels, side, side, max_cycles=max_cycles)
    std = np.sqrt(np.mean(planes**2))
    return Tensor.from_array(
        (gain / (std * np.sqrt(channels) * side))
        * planes.reshape(n_out, channels * side * side)
    )


def toy_cnn_manifest():
    return TOY_CNN_MANIFEST


def toy_cnn(seed=7):
    """The bundled 32x32 toy CNN: (ModelSpec, weights) with seeded weights.

    Kernels and fc rows are smooth random fields rather than white noise
    (see _smooth_planes), mirroring the low-frequency character of trained
    convolution filters.
    """
    rng = np.random.default_rng(seed)
    mc = 0.6
    weights = {
        "conv1.weight": _smooth_conv_init(rng, 8, 1, 3, gain=1.4, max_cycles=mc),
        "conv1.bias": _bias_init(rng, 8),
        "conv2.weight": _smooth_conv_init(rng, 16, 8, 3, gain=1.4, max_cycles=mc),
        "conv2.bias": _bias_init(rng, 16),
        "fc.weight": _smooth_fc_init(rng, 4, 16, 8, gain=1.4, max_cycles=mc),
        "fc.bias": _bias_init(rng, 4),
    }
    return parse_manifest(TOY_CNN_MANIFEST), weights


def vgg16_manifest(fc_features=1024, classes=10):
    return _vgg16_manifest_text(fc_features, classes)


def vgg16(seed=7, fc_features=1024, classes=10):
    """The VGG-16-shaped model: (ModelSpec, weights) with seeded weights."""
    rng = np.random.default_rng(seed)
    weights = {}
    n_in = 3
    for block, widths in enumerate(_VGG16_WIDTHS, 1):
        for pos, n_out in enumerate(widths, 1):
            name = f"conv{block}_{pos}"
            weights[f"{name}.weight"] = _conv_init(rng, n_out, n_in, 3)
            weights[f"{name}.bias"] = _bias_init(rng, n_out)
            n_in = n_out
    weights["fc1.weight"] = _fc_init(rng, fc_features, 512 * 7 * 7)
    weights["fc1.bias"] = _bias_init(rng, fc_features)
    weights["fc2.weight"] = _fc_init(rng, fc_features, fc_features)
    weights["fc2.bias"] = _bias_init(rng, fc_features)
    weights["fc3.weight"] = _fc_init(rng, classes, fc_features)
    weights["fc3.bias"] = _bias_init(rng, classes)
    return parse_manifest(_vgg16_manifest_text(fc_features, classes)), weights
