"""Model manifests, whole-network supersampling, and a minimal forward engine.

A model is a text manifest (layer list plus input dims) and a KTA archive of
named weight tensors.  ``supersample_model`` adapts a model to inputs grown
by integer factors (m, n):

* every conv kernel is rescaled (extent k -> m*(k-1)+1, weights attenuated
  by 1/(m*n) for interpolating methods) and its padding recomputed as
  floor(extent/2); strides stay put,
* except patch-embed convs, which keep their stated padding and multiply
  their stride by (m, n) instead, so the token count is preserved,
* the first fully connected layer declaring spatial structure has each row
  reshaped to (channels, s, s), interpolated to (channels, m*s, n*s),
  attenuated by 1/(m*n), and flattened back,
* adaptive average-pool targets and the manifest input dims are multiplied
  by (m, n), and biases are never touched.

Flattening is channel-major (C, H, W), matching the fc reshape convention.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .convolve import ConvConfig, conv3d_direct
from .errors import (
    BadMethod,
    NoSpatialFc,
    ParseError,
    ShapeError,
    UnknownLayerKind,
)
from .resample import (
    INTERP_METHODS,
    KernelStack,
    Scale,
    padding_for,
    rescale_kernel,
    resample_matrix,
)
from .tensor import Tensor

LAYER_KINDS = (
    "conv",
    "fc",
    "relu",
    "maxpool",
    "avgpool_adaptive",
    "flatten",
    "softmax",
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    weight_name: str = ""
    bias_name: str = ""
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0
    patch_embed: bool = False
    spatial_channels: int = 0
    window: int = 0
    pool_stride: int = 0
    out_h: int = 0
    out_w: int = 0


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple
    input_h: int
    input_w: int
    input_c: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


@dataclass(frozen=True)
class SurgeryPlan:
    m: int
    n: int
    method: str = "bicubic"
    interpolate_fc: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ShapeError(f"factors must be >= 1, got ({self.m}, {self.n})")


def _int_field(tokens, idx, lineno, what, minimum):
    try:
        value = int(tokens[idx])
    except ValueError:
        raise ParseError(lineno, f"{what} must be an integer, got {tokens[idx]!r}")
    if value < minimum:
        raise ParseError(lineno, f"{what} must be >= {minimum}, got {value}")
    return value


def _expect_keyword(tokens, idx, lineno, keyword):
    if idx >= len(tokens) or tokens[idx] != keyword:
        found = tokens[idx] if idx < len(tokens) else "end of line"
        raise ParseError(lineno, f"expected {keyword!r}, got {found}")


def parse_manifest(text):
    """Parse manifest text into a ModelSpec.

    One directive per line, '#' starts a comment, the first directive must
    be ``input H W C``.  Layer grammar:

        conv <weight> <bias> stride <sh> <sw> pad <ph> <pw> [patch_embed]
        fc <weight> <bias> spatial <C>
        relu | maxpool <win> <stride> | avgpool_adaptive <oh> <ow>
        flatten | softmax
    """
    layers = []
    dims = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "input":
            if dims is not None:
                raise ParseError(lineno, "duplicate input directive")
            if layers:
                raise ParseError(lineno, "input must be the first directive")
            if len(tokens) != 4:
                raise ParseError(lineno, "input takes exactly H W C")
            dims = tuple(
                _int_field(tokens, i, lineno, name, 1)
                for i, name in ((1, "H"), (2, "W"), (3, "C"))
            )
            continue
        if dims is None:
            raise ParseError(lineno, "first directive must be input")
        if kind == "conv":
            if len(tokens) < 9:
                raise ParseError(lineno, "conv takes <w> <b> stride <sh> <sw> pad <ph> <pw>")
            _expect_keyword(tokens, 3, lineno, "stride")
            _expect_keyword(tokens, 6, lineno, "pad")
            patch = False
            if len(tokens) == 10:
                if tokens[9] != "patch_embed":
                    raise ParseError(lineno, f"unknown conv flag {tokens[9]!r}")
                patch = True
            elif len(tokens) != 9:
                raise ParseError(lineno, "too many tokens for conv")
            layers.append(
                LayerSpec(
                    kind="conv",
                    weight_name=tokens[1],
                    bias_name=tokens[2],
                    stride_h=_int_field(tokens, 4, lineno, "stride", 1),
                    stride_w=_int_field(tokens, 5, lineno, "stride", 1),
                    pad_h=_int_field(tokens, 7, lineno, "pad", 0),
                    pad_w=_int_field(tokens, 8, lineno, "pad", 0),
                    patch_embed=patch,
                )
            )
        elif kind == "fc":
            if len(tokens) != 5:
                raise ParseError(lineno, "fc takes <w> <b> spatial <C>")
            _expect_keyword(tokens, 3, lineno, "spatial")
            layers.append(
                LayerSpec(
                    kind="fc",
                    weight_name=tokens[1],
                    bias_name=tokens[2],
                    spatial_channels=_int_field(tokens, 4, lineno, "spatial", 0),
                )
            )
        elif kind in ("relu", "flatten", "softmax"):
            if len(tokens) != 1:
                raise ParseError(lineno, f"{kind} takes no arguments")
            layers.append(LayerSpec(kind=kind))
        elif kind == "maxpool":
            if len(tokens) != 3:
                raise ParseError(lineno, "maxpool takes <win> <stride>")
            layers.append(
                LayerSpec(
                    kind="maxpool",
                    window=_int_field(tokens, 1, lineno, "window", 1),
                    pool_stride=_int_field(tokens, 2, lineno, "stride", 1),
                )
            )
        elif kind == "avgpool_adaptive":
            if len(tokens) != 3:
                raise ParseError(lineno, "avgpool_adaptive takes <oh> <ow>")
            layers.append(
                LayerSpec(
                    kind="avgpool_adaptive",
                    out_h=_int_field(tokens, 1, lineno, "out_h", 1),
                    out_w=_int_field(tokens, 2, lineno, "out_w", 1),
                )
            )
        else:
            raise UnknownLayerKind(lineno, f"unknown layer kind {kind!r}")
    if dims is None:
        raise ParseError(1, "manifest has no input directive")
    return ModelSpec(tuple(layers), *dims)


def format_manifest(model):
    """Render a ModelSpec back to canonical manifest text."""
    lines = [f"input {model.input_h} {model.input_w} {model.input_c}"]
    for layer in model.layers:
        if layer.kind == "conv":
            line = (
                f"conv {layer.weight_name} {layer.bias_name} "
                f"stride {layer.stride_h} {layer.stride_w} "
                f"pad {layer.pad_h} {layer.pad_w}"
            )
            if layer.patch_embed:
                line += " patch_embed"
            lines.append(line)
        elif layer.kind == "fc":
            lines.append(
                f"fc {layer.weight_name} {layer.bias_name} "
                f"spatial {layer.spatial_channels}"
            )
        elif layer.kind == "maxpool":
            lines.append(f"maxpool {layer.window} {layer.pool_stride}")
        elif layer.kind == "avgpool_adaptive":
            lines.append(f"avgpool_adaptive {layer.out_h} {layer.out_w}")
        else:
            lines.append(layer.kind)
    return "\n".join(lines) + "\n"


def _layer_tensor(weights, name, idx, kind):
    if name not in weights:
        raise ShapeError(f"layer {idx} ({kind}): tensor {name!r} not in archive")
    return weights[name]


def validate_model(model, weights):
    """Propagate shapes through every layer; returns the per-layer trace.

    The state is (H, W, C) until flatten and a vector afterwards.  Raises
    ShapeError naming the first layer whose weights or input do not fit.
    """
    trace = []
    state = ("hwc", model.input_h, model.input_w, model.input_c)
    for idx, layer in enumerate(model.layers):
        kind = layer.kind
        if kind == "conv":
            if state[0] != "hwc":
                raise ShapeError(f"layer {idx} (conv): needs a spatial input")
            _, h, w, c = state
            wt = _layer_tensor(weights, layer.weight_name, idx, "conv")
            bt = _layer_tensor(weights, layer.bias_name, idx, "conv")
            if wt.rank != 4:
                raise ShapeError(f"layer {idx} (conv): weights must be rank 4")
            n_out, k_in, kh, kw = wt.shape
            if bt.shape != (n_out,):
                raise ShapeError(
                    f"layer {idx} (conv): bias shape {bt.shape} != ({n_out},)"
                )
            if k_in != c:
                raise ShapeError(
                    f"layer {idx} (conv): expects {k_in} channels, input has {c}"
                )
            oh = (h + 2 * layer.pad_h - kh) // layer.stride_h + 1
            ow = (w + 2 * layer.pad_w - kw) // layer.stride_w + 1
            if oh < 1 or ow < 1:
                raise ShapeError(f"layer {idx} (conv): empty output {oh}x{ow}")
            state = ("hwc", oh, ow, n_out)
        elif kind == "relu":
            pass
        elif kind == "maxpool":
            if state[0] != "hwc":
                raise ShapeError(f"layer {idx} (maxpool): needs a spatial input")
            _, h, w, c = state
            oh = (h - layer.window) // layer.pool_stride + 1
            ow = (w - layer.window) // layer.pool_stride + 1
            if oh < 1 or ow < 1:
                raise ShapeError(f"layer {idx} (maxpool): empty output {oh}x{ow}")
            state = ("hwc", oh, ow, c)
        elif kind == "avgpool_adaptive":
            if state[0] != "hwc":
                raise ShapeError(f"layer {idx} (avgpool_adaptive): needs a spatial input")
            _, h, w, c = state
            if layer.out_h > h or layer.out_w > w:
                raise ShapeError(
                    f"layer {idx} (avgpool_adaptive): target exceeds input"
                )
            if h % layer.out_h or w % layer.out_w:
                raise ShapeError(
                    f"layer {idx} (avgpool_adaptive): {h}x{w} not divisible "
                    f"into {layer.out_h}x{layer.out_w} equal cells"
                )
            state = ("hwc", layer.out_h, layer.out_w, c)
        elif kind == "flatten":
            if state[0] != "hwc":
                raise ShapeError(f"layer {idx} (flatten): needs a spatial input")
            _, h, w, c = state
            state = ("vec", c * h * w)
        elif kind == "fc":
            if state[0] != "vec":
                raise ShapeError(f"layer {idx} (fc): needs a flattened input")
            wt = _layer_tensor(weights, layer.weight_name, idx, "fc")
            bt = _layer_tensor(weights, layer.bias_name, idx, "fc")
            if wt.rank != 2:
                raise ShapeError(f"layer {idx} (fc): weights must be rank 2")
            n_out, n_in = wt.shape
            if bt.shape != (n_out,):
                raise ShapeError(
                    f"layer {idx} (fc): bias shape {bt.shape} != ({n_out},)"
                )
            if n_in != state[1]:
                raise ShapeError(
                    f"layer {idx} (fc): in_features {n_in} != input length {state[1]}"
                )
            if layer.spatial_channels > 0:
                if n_in % layer.spatial_channels:
                    raise ShapeError(
                        f"layer {idx} (fc): in_features {n_in} not divisible "
                        f"by {layer.spatial_channels} channels"
                    )
                per = n_in // layer.spatial_channels
                side = math.isqrt(per)
                if side * side != per:
                    raise ShapeError(
                        f"layer {idx} (fc): per-channel size {per} is not square"
                    )
            state = ("vec", n_out)
        elif kind == "softmax":
            pass
        else:
            raise ShapeError(f"layer {idx}: unknown kind {kind!r}")
        trace.append(state[1:] if state[0] == "hwc" else (state[1],))
    return trace


def _interpolate_fc(wt, channels, plan):
    if plan.method == "dilation":
        raise BadMethod(
            "dilation cannot rescale a fully connected layer: the zero-gapped "
            f"extent would not match the m*s target"
        )
    n_out, n_in = wt.shape
    side = math.isqrt(n_in // channels)
    rh = resample_matrix(side, plan.m * side, plan.method)
    rw = resample_matrix(side, plan.n * side, plan.method)
    planes = wt.array.reshape(n_out, channels, side, side)
    grown = np.tensordot(planes, rh, axes=(2, 1))
    grown = np.tensordot(grown, rw, axes=(2, 1))
    grown *= 1.0 / (plan.m * plan.n)
    return Tensor.from_array(
        grown.reshape(n_out, channels * plan.m * side * plan.n * side)
    )


def supersample_model(model, weights, plan):
    """Adapt a validated model to inputs grown by (plan.m, plan.n).

    Returns a new (ModelSpec, weights) pair; untouched tensors are shared
    with the input map.  Raises NoSpatialFc when plan.interpolate_fc is set
    but no fc layer declares spatial structure.
    """
    validate_model(model, weights)
    if plan.interpolate_fc and not any(
        l.kind == "fc" and l.spatial_channels > 0 for l in model.layers
    ):
        raise NoSpatialFc("no fc layer declares spatial channels")
    if plan.m == plan.n == 1:
        return model, dict(weights)
    if plan.m != plan.n and any(
        l.kind == "conv" and l.patch_embed for l in model.layers
    ):
        raise ShapeError("patch_embed layers require m == n")

    scale = Scale(plan.m, plan.n)
    new_weights = dict(weights)
    new_layers = []
    fc_done = False
    for layer in model.layers:
        if layer.kind == "conv":
            stack = KernelStack(
                weights[layer.weight_name], weights[layer.bias_name]
            )
            grown = rescale_kernel(stack, scale, plan.method)
            new_weights[layer.weight_name] = grown.weights
            kh, kw = grown.weights.shape[2], grown.weights.shape[3]
            if layer.patch_embed:
                layer = replace(
                    layer,
                    stride_h=layer.stride_h * plan.m,
                    stride_w=layer.stride_w * plan.n,
                )
            else:
                layer = replace(
                    layer, pad_h=padding_for(kh), pad_w=padding_for(kw)
                )
        elif layer.kind == "fc" and (
            plan.interpolate_fc and not fc_done and layer.spatial_channels > 0
        ):
            wt = weights[layer.weight_name]
            new_weights[layer.weight_name] = _interpolate_fc(
                wt, layer.spatial_channels, plan
            )
            # The per-channel map stays square only for isotropic factors.
            if plan.m != plan.n:
                layer = replace(layer, spatial_channels=0)
            fc_done = True
        elif layer.kind == "avgpool_adaptive":
            layer = replace(
                layer, out_h=layer.out_h * plan.m, out_w=layer.out_w * plan.n
            )
        new_layers.append(layer)

    new_model = ModelSpec(
        tuple(new_layers),
        model.input_h * plan.m,
        model.input_w * plan.n,
        model.input_c,
    )
    validate_model(new_model, new_weights)
    return new_model, new_weights


def forward(model, weights, inp):
    """Evaluate the model on one (H, W, C) input tensor."""
    if inp.rank != 3 or inp.shape != (model.input_h, model.input_w, model.input_c):
        raise ShapeError(
            f"input shape {inp.shape} does not match manifest "
            f"({model.input_h}, {model.input_w}, {model.input_c})"
        )
    state = inp.array
    for idx, layer in enumerate(model.layers):
        kind = layer.kind
        if kind == "conv":
            stack = KernelStack(
                weights[layer.weight_name], weights[layer.bias_name]
            )
            cfg = ConvConfig(
                stride_h=layer.stride_h,
                stride_w=layer.stride_w,
                pad_h=layer.pad_h,
                pad_w=layer.pad_w,
            )
            state = conv3d_direct(Tensor.from_array(state), stack, cfg).array
        elif kind == "relu":
            state = np.maximum(state, 0.0)
        elif kind == "maxpool":
            if state.ndim != 3:
                raise ShapeError(f"layer {idx} (maxpool): needs a spatial input")
            windows = np.lib.stride_tricks.sliding_window_view(
                state, (layer.window, layer.window), axis=(0, 1)
            )[:: layer.pool_stride, :: layer.pool_stride]
            state = windows.max(axis=(3, 4))
        elif kind == "avgpool_adaptive":
            if state.ndim != 3:
                raise ShapeError(f"layer {idx} (avgpool_adaptive): needs a spatial input")
            h, w, c = state.shape
            state = state.reshape(
                layer.out_h, h // layer.out_h, layer.out_w, w // layer.out_w, c
            ).mean(axis=(1, 3))
        elif kind == "flatten":
            if state.ndim != 3:
                raise ShapeError(f"layer {idx} (flatten): needs a spatial input")
            state = state.transpose(2, 0, 1).reshape(-1)
        elif kind == "fc":
            if state.ndim != 1:
                raise ShapeError(f"layer {idx} (fc): needs a flattened input")
            wt = weights[layer.weight_name]
            bt = weights[layer.bias_name]
            if wt.shape[1] != state.shape[0]:
                raise ShapeError(
                    f"layer {idx} (fc): in_features {wt.shape[1]} != "
                    f"input length {state.shape[0]}"
                )
            state = wt.array @ state + bt.array
        elif kind == "softmax":
            shifted = state - state.max()
            exps = np.exp(shifted)
            state = exps / exps.sum()
    return Tensor.from_array(state)


def upsample_input(image, m, n, method):
    """Grow an (H, W, C) image to exactly (m*H, n*W) per channel."""
    if method not in INTERP_METHODS:
        raise BadMethod(f"inputs cannot be upsampled with {method!r}")
    if image.rank != 3:
        raise ShapeError(f"expected a rank-3 image, got rank {image.rank}")
    if m < 1 or n < 1:
        raise ShapeError(f"factors must be >= 1, got ({m}, {n})")
    if m == n == 1:
        return image
    h, w, _ = image.shape
    rh = resample_matrix(h, m * h, method)
    rw = resample_matrix(w, n * w, method)
    out = np.tensordot(rh, image.array, axes=(1, 0))
    out = np.tensordot(rw, out, axes=(1, 1)).transpose(1, 0, 2)
    return Tensor.from_array(out)


@dataclass(frozen=True)
class AgreementReport:
    argmax_match_rate: float
    mean_cosine_sim: float


def logit_agreement(base, surgered, inputs, method):
    """Compare base and surgered outputs over a list of base-resolution inputs.

    Each input runs through the base model as-is and through the surgered
    model after upsampling by the inferred (m, n).  Reports the fraction of
    matching argmax positions and the mean cosine similarity of the output
    vectors.
    """
    base_model, base_weights = base
    surg_model, surg_weights = surgered
    if (
        surg_model.input_h % base_model.input_h
        or surg_model.input_w % base_model.input_w
    ):
        raise ShapeError("surgered input dims are not multiples of the base dims")
    m = surg_model.input_h // base_model.input_h
    n = surg_model.input_w // base_model.input_w
    matches = 0
    sims = []
    for x in inputs:
        lb = forward(base_model, base_weights, x).array.reshape(-1)
        ls = forward(
            surg_model, surg_weights, upsample_input(x, m, n, method)
        ).array.reshape(-1)
        if lb.shape != ls.shape:
            raise ShapeError(
                f"output lengths differ: {lb.shape[0]} vs {ls.shape[0]}"
            )
        matches += int(np.argmax(lb) == np.argmax(ls))
        nb = float(np.linalg.norm(lb))
        ns = float(np.linalg.norm(ls))
        if nb == 0.0 or ns == 0.0:
            sims.append(1.0 if nb == ns else 0.0)
        else:
            sims.append(float(np.dot(lb, ls) / (nb * ns)))
    count = len(inputs)
    if count == 0:
        raise ShapeError("need at least one input")
    return AgreementReport(matches / count, float(np.mean(sims)))


def synth_dataset(seed, count, h, w, c, classes):
    """Deterministic smooth inputs: per class, two Gaussian blobs at
    class-determined positions over a low-frequency cosine background."""
    if count < 1:
        raise ShapeError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    samples = []
    for _ in range(count):
        label = int(rng.integers(0, classes))
        angle = 2.0 * np.pi * label / classes
        plane = np.zeros((h, w))
        for k, (radius, turn) in enumerate(((0.26, 0.0), (0.22, 2.4))):
            cy = h * (0.5 + radius * np.sin(angle + turn))
            cx = w * (0.5 + radius * np.cos(angle + turn))
            cy += float(rng.uniform(-0.02, 0.02)) * h
            cx += float(rng.uniform(-0.02, 0.02)) * w
            amp = float(rng.uniform(0.3, 0.5))
            sigma = float(rng.uniform(0.10, 0.16)) * min(h, w)
            plane += amp * np.exp(
                -((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma * sigma)
            )
        bg_amp = float(rng.uniform(0.05, 0.15))
        fy = int(rng.integers(0, 2))
        fx = int(rng.integers(0, 2))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        plane += bg_amp * np.cos(2.0 * np.pi * (fy * ys / h + fx * xs / w) + phase)
        gains = rng.uniform(0.8, 1.2, size=c)
        image = plane[:, :, None] * gains[None, None, :]
        samples.append((Tensor.from_array(image), label))
    return samples
