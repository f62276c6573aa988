"""Command-line front end.

Subcommands: rescale (grow kernel archives), verify (randomized identity
suites), spectrum (csv/pgm spectrum export), surgery (whole-model
supersampling), agree (base-vs-surgered logit comparison).  Exit codes:
0 success, 1 verification failure, 2 usage or input errors.  All output
tables are tab-separated and deterministic for fixed arguments and seed.
"""

import argparse
import sys

from .errors import KrescaleError
from .resample import METHODS, INTERP_METHODS, KernelStack, Scale, rescale_kernel
from .spectral import average_spectrum_report, export_spectrum, spectrum_report
from .suites import run_attenuation_suite, run_conv_suite, run_ratio_suite
from .surgery import (
    SurgeryPlan,
    format_manifest,
    logit_agreement,
    parse_manifest,
    supersample_model,
    synth_dataset,
    validate_model,
)
from .tensor import Tensor, archive_read_path, archive_write_path

SUITE_DEFAULTS = {
    "ratio": (1000, 1e-9),
    "attenuation": (1000, 1e-9),
    "conv": (100, 1e-6),
}


def _g(x):
    return f"{x:.17g}"


def _shape_str(shape):
    return "x".join(str(d) for d in shape)


def _zero_bias(n_out):
    return Tensor((n_out,), [0.0] * n_out)


def cmd_rescale(args):
    entries = archive_read_path(args.archive)
    if args.tensors:
        selected = [name.strip() for name in args.tensors.split(",") if name.strip()]
        for name in selected:
            if name not in entries:
                raise KrescaleError(f"tensor {name!r} not in archive")
            if entries[name].rank != 4:
                raise KrescaleError(f"tensor {name!r} is not a rank-4 kernel")
        selected = set(selected)
    else:
        selected = {name for name, t in entries.items() if t.rank == 4}

    scale = Scale(args.a, args.b)
    out_entries = {}
    rows = []
    for name, t in entries.items():
        if name in selected:
            bias = entries.get(f"{name}.bias")
            if bias is None or bias.rank != 1 or bias.shape[0] != t.shape[0]:
                bias = _zero_bias(t.shape[0])
            grown = rescale_kernel(KernelStack(t, bias), scale, args.method)
            out_entries[name] = grown.weights
            rows.append((name, t.shape, grown.weights.shape))
        else:
            out_entries[name] = t
            rows.append((name, t.shape, t.shape))
    archive_write_path(args.out, out_entries)

    print("name\tbefore\tafter")
    for name, before, after in rows:
        print(f"{name}\t{_shape_str(before)}\t{_shape_str(after)}")
    print(f"wrote\t{args.out}")
    return 0


def cmd_verify(args):
    if args.suite not in SUITE_DEFAULTS:
        raise KrescaleError(f"unknown suite {args.suite!r}")
    default_trials, default_tol = SUITE_DEFAULTS[args.suite]
    trials = default_trials if args.trials is None else args.trials
    tol = default_tol if args.tol is None else args.tol
    if trials < 1:
        raise KrescaleError(f"trials must be >= 1, got {trials}")
    if tol < 0:
        raise KrescaleError(f"tol must be >= 0, got {tol}")

    if args.suite == "ratio":
        result = run_ratio_suite(trials=trials, seed=args.seed, tol=tol)
    elif args.suite == "attenuation":
        result = run_attenuation_suite(trials=trials, seed=args.seed, tol=tol)
    else:
        result = run_conv_suite(trials=trials, seed=args.seed, tol=tol)

    print(f"suite\t{result.suite}")
    print(f"trials\t{result.trials}")
    print(f"failures\t{result.failures}")
    if args.suite == "conv":
        print(f"worst_abs_err\t{_g(result.worst_abs_err)}")
        print(f"worst_dft_gap\t{_g(result.worst_dft_gap)}")
    else:
        print(f"worst_rel_err\t{_g(result.worst_rel_err)}")
        print(f"worst_abs_err\t{_g(result.worst_abs_err)}")
    print(f"tol\t{_g(tol)}")
    print(f"result\t{'PASS' if result.passed else 'FAIL'}")
    return 0 if result.passed else 1


def cmd_spectrum(args):
    entries = archive_read_path(args.archive)
    if args.tensor not in entries:
        raise KrescaleError(f"tensor {args.tensor!r} not in archive")
    t = entries[args.tensor]
    if t.rank == 2:
        report = spectrum_report(t, args.baseband)
    elif t.rank == 4:
        report = average_spectrum_report(t, args.baseband)
    else:
        raise KrescaleError(
            f"tensor {args.tensor!r} has rank {t.rank}; need rank 2 or 4"
        )
    with open(args.out, "wb") as fh:
        export_spectrum(report, fh, args.format)

    share = (
        report.baseband_energy / report.total_energy
        if report.total_energy > 0.0
        else 0.0
    )
    print(f"tensor\t{args.tensor}")
    print(f"shape\t{_shape_str(report.magnitude.shape)}")
    print(f"baseband_energy\t{_g(report.baseband_energy)}")
    print(f"total_energy\t{_g(report.total_energy)}")
    print(f"baseband_share\t{_g(share)}")
    print(f"wrote\t{args.out}")
    return 0


def _layer_label(layer, weights):
    if layer.kind == "conv":
        n_out, _, kh, kw = weights[layer.weight_name].shape
        tag = f"conv{kh}-{n_out}" if kh == kw else f"conv{kh}x{kw}-{n_out}"
        if layer.patch_embed:
            tag += f"(patch,s{layer.stride_h}x{layer.stride_w})"
        return tag
    if layer.kind == "fc":
        n_out, n_in = weights[layer.weight_name].shape
        return f"FC-{n_out}x{n_in}"
    if layer.kind == "maxpool":
        return f"maxpool{layer.window}/{layer.pool_stride}"
    if layer.kind == "avgpool_adaptive":
        return f"avgpool-{layer.out_h}x{layer.out_w}"
    return layer.kind


def cmd_surgery(args):
    with open(args.manifest, "r", encoding="utf-8") as fh:
        model = parse_manifest(fh.read())
    weights = archive_read_path(args.weights)
    plan = SurgeryPlan(m=args.m, n=args.n, method=args.method, interpolate_fc=args.fc)
    new_model, new_weights = supersample_model(model, weights, plan)

    with open(args.out_manifest, "w", encoding="utf-8") as fh:
        fh.write(format_manifest(new_model))
    archive_write_path(args.out_weights, new_weights)

    print("before\tafter")
    print(
        f"input-{_shape_str((model.input_h, model.input_w, model.input_c))}"
        f"\tinput-{_shape_str((new_model.input_h, new_model.input_w, new_model.input_c))}"
    )
    for old, new in zip(model.layers, new_model.layers):
        print(f"{_layer_label(old, weights)}\t{_layer_label(new, new_weights)}")
    print(f"wrote\t{args.out_manifest}")
    print(f"wrote\t{args.out_weights}")
    return 0


def cmd_agree(args):
    with open(args.manifest, "r", encoding="utf-8") as fh:
        model = parse_manifest(fh.read())
    weights = archive_read_path(args.weights)
    trace = validate_model(model, weights)
    if len(trace[-1]) != 1:
        raise KrescaleError("model must end in a vector of class scores")
    classes = trace[-1][0]

    has_spatial_fc = any(
        l.kind == "fc" and l.spatial_channels > 0 for l in model.layers
    )
    plan = SurgeryPlan(
        m=args.m, n=args.n, method=args.method, interpolate_fc=has_spatial_fc
    )
    surgered = supersample_model(model, weights, plan)
    data = synth_dataset(
        args.seed, args.count, model.input_h, model.input_w, model.input_c, classes
    )
    report = logit_agreement(
        (model, weights), surgered, [x for x, _ in data], args.method
    )

    ok = report.argmax_match_rate >= args.threshold
    print(f"inputs\t{args.count}")
    print(f"classes\t{classes}")
    print(f"argmax_match_rate\t{report.argmax_match_rate:.6f}")
    print(f"mean_cosine_sim\t{report.mean_cosine_sim:.6f}")
    print(f"threshold\t{_g(args.threshold)}")
    print(f"result\t{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="krescale",
        description=(
            "Rescale convolution kernels and whole networks for larger "
            "inputs, and verify the underlying spectral identities."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rescale", help="grow every kernel in a KTA archive")
    p.add_argument("--in", dest="archive", required=True, help="input KTA archive")
    p.add_argument("--out", required=True, help="output KTA archive")
    p.add_argument("--a", type=int, required=True, help="height factor")
    p.add_argument("--b", type=int, required=True, help="width factor")
    p.add_argument("--method", choices=METHODS, default="bicubic")
    p.add_argument(
        "--tensors",
        default="",
        help="comma-separated kernel names (default: every rank-4 entry)",
    )
    p.set_defaults(handler=cmd_rescale)

    p = sub.add_parser("verify", help="run a randomized verification suite")
    p.add_argument("--suite", choices=sorted(SUITE_DEFAULTS), required=True)
    p.add_argument(
        "--trials",
        type=int,
        default=None,
        help="trial count; for the conv suite this is per configuration "
        "(defaults: ratio/attenuation 1000, conv 100)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--tol",
        type=float,
        default=None,
        help="defaults: ratio/attenuation 1e-9, conv 1e-6",
    )
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("spectrum", help="export a tensor's magnitude spectrum")
    p.add_argument("--in", dest="archive", required=True, help="input KTA archive")
    p.add_argument("--tensor", required=True, help="entry name (rank 2 or 4)")
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--format", choices=("csv", "pgm"), default="csv")
    p.add_argument(
        "--baseband",
        type=float,
        default=0.5,
        help="centered fraction of each axis counted as baseband",
    )
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("surgery", help="supersample a whole model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights", required=True, help="KTA archive")
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--m", type=int, required=True, help="height factor")
    p.add_argument("--n", type=int, required=True, help="width factor")
    p.add_argument("--method", choices=METHODS, default="bicubic")
    p.add_argument(
        "--fc",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="interpolate the first spatial fc layer",
    )
    p.set_defaults(handler=cmd_surgery)

    p = sub.add_parser("agree", help="compare base vs surgered model outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights", required=True, help="KTA archive")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=INTERP_METHODS, default="bicubic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--threshold", type=float, default=0.9)
    p.set_defaults(handler=cmd_agree)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except KrescaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
