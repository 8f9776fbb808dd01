"""Command-line front end.

Subcommands: validate, estimate, calibrate, select, synth, ablate, plot.
All machine output is JSON with an embedded run manifest; plots are
self-contained SVG. Exit codes: 0 ok, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import os
import sys
import time
from pathlib import Path

import aline
from aline import calibration, estimators, linefit, selection, svgplot, synth
from aline.bundle import load_bundle, validate_bundle, write_bundle
from aline.errors import AlineError

METHOD_FLAGS = {
    "aline-s": estimators.ALINE_S,
    "aline-d": estimators.ALINE_D,
    "atc": estimators.ATC,
    "doc": estimators.DOC,
    "ac": estimators.AC,
    "gde": estimators.GDE,
}


def _num_threads() -> int:
    raw = os.environ.get("ALINE_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
        if value < 1:
            raise ValueError
    except ValueError:
        print(f"usage error: ALINE_THREADS must be a positive integer, got {raw!r}", file=sys.stderr)
        raise SystemExit(2)
    return value


def _timestamp() -> str:
    # honors SOURCE_DATE_EPOCH so identical runs produce identical bytes
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else int(time.time())
    return datetime.datetime.fromtimestamp(t, datetime.timezone.utc).isoformat()


def _run_manifest(args: argparse.Namespace, bundle_digest: str | None) -> dict:
    options = {
        k: str(v)
        for k, v in sorted(vars(args).items())
        if k not in ("func",) and v is not None
    }
    return {
        "subcommand": args.subcommand,
        "options": options,
        "tool_version": aline.__version__,
        "bundle_digest": bundle_digest,
        "timestamp": _timestamp(),
    }


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, "utf-8")


def _as_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _as_dict(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _as_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_as_dict(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj


# --- subcommands ----------------------------------------------------------


def _cmd_validate(args) -> int:
    bundle = load_bundle(args.bundle)
    report = validate_bundle(bundle)
    payload = {
        "run": _run_manifest(args, bundle.content_digest()),
        "validation": {"ok": report.ok, "issues": [list(i) for i in report.issues]},
    }
    _write_json(payload, args.out)
    return 0 if report.ok else 1


def _cmd_estimate(args) -> int:
    bundle = load_bundle(args.bundle)
    methods = []
    for flag in args.methods.split(","):
        flag = flag.strip().lower()
        if flag not in METHOD_FLAGS:
            raise AlineError(f"unknown method {flag!r}; choose from {', '.join(METHOD_FLAGS)}")
        methods.append(METHOD_FLAGS[flag])
    reports = estimators.estimate(bundle, methods)
    payload = {
        "run": _run_manifest(args, bundle.content_digest()),
        "estimates": [_as_dict(r) for r in reports],
    }
    if bundle.ood_labels is not None:
        payload["mae"] = _as_dict(estimators.evaluate_estimates(reports, bundle))
    _write_json(payload, args.out)
    return 0


def _cmd_calibrate(args) -> int:
    bundle = load_bundle(args.bundle)
    flag = args.estimate_method.strip().lower()
    if flag not in METHOD_FLAGS:
        raise AlineError(f"unknown method {flag!r}; choose from {', '.join(METHOD_FLAGS)}")
    estimate = estimators.estimate(bundle, [METHOD_FLAGS[flag]])[0]
    results = calibration.calibrate_bundle(
        bundle,
        estimate,
        tolerance=args.tolerance,
        num_bins=args.bins,
        num_threads=_num_threads(),
    )
    payload = {
        "run": _run_manifest(args, bundle.content_digest()),
        "results": [_as_dict(r) for r in results],
    }
    _write_json(payload, args.out)
    return 0


def _cmd_select(args) -> int:
    if args.bundles:
        named = {}
        for spec in args.bundles:
            if "=" not in spec:
                raise AlineError(f"--bundles expects NAME=DIR, got {spec!r}")
            name, path = spec.split("=", 1)
            named[name] = load_bundle(path)
        table = selection.selection_gap_table(named)
        payload = {"run": _run_manifest(args, None), "gap_table": _as_dict(table)}
    else:
        if args.bundle is None:
            raise AlineError("select needs --bundle DIR or --bundles NAME=DIR ...")
        bundle = load_bundle(args.bundle)
        report = selection.select_by_id_accuracy(bundle)
        payload = {
            "run": _run_manifest(args, bundle.content_digest()),
            "selection": _as_dict(report),
        }
    _write_json(payload, args.out)
    return 0


def _cmd_synth(args) -> int:
    lo, hi = (float(x) for x in args.id_range.split(","))
    config = synth.SynthConfig(
        num_models=args.models,
        num_id_samples=args.id_samples,
        num_ood_samples=args.ood_samples,
        num_classes=args.classes,
        slope=args.slope,
        bias=args.bias,
        id_accuracy_range=(lo, hi),
        noise=args.noise,
        error_sharing=args.error_sharing,
        confidence_margin=args.margin,
        seed=args.seed,
    )
    generate = synth.generate_anticorrelated if args.anticorrelated else synth.generate_ensemble
    bundle, truth = generate(config)
    write_bundle(bundle, args.out)
    sidecar = {
        "config": _as_dict(config),
        "planted": {
            mid: {
                "id_accuracy": float(truth.id_accuracy[i]),
                "ood_accuracy": float(truth.ood_accuracy[i]),
            }
            for i, mid in enumerate(bundle.model_ids())
        },
    }
    (Path(args.out) / "truth.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return 0


def _cmd_ablate(args) -> int:
    bundle = load_bundle(args.bundle)
    sizes = [int(s) for s in args.sizes.split(",")]
    report = estimators.ablate_model_count(bundle, sizes, args.subsets, args.seed)
    payload = {
        "run": _run_manifest(args, bundle.content_digest()),
        "ablation": _as_dict(report),
    }
    _write_json(payload, args.out)
    return 0


def _cmd_plot(args) -> int:
    bundle = load_bundle(args.bundle)
    Path(args.out).write_text(svgplot.render_bundle_plot(bundle), "utf-8")
    return 0


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aline",
        description="OOD accuracy estimation, calibration, and selection from prediction bundles",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="check a bundle directory")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("estimate", help="estimate OOD accuracy per model")
    p.add_argument("--bundle", required=True)
    p.add_argument("--methods", default=",".join(METHOD_FLAGS))
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("calibrate", help="temperature-calibrate against estimated accuracy")
    p.add_argument("--bundle", required=True)
    p.add_argument("--estimate-method", default="aline-d")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("select", help="select the best model by ID accuracy")
    p.add_argument("--bundle", default=None)
    p.add_argument("--bundles", nargs="*", metavar="NAME=DIR")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("synth", help="generate a planted-line synthetic bundle")
    p.add_argument("--models", type=int, default=10)
    p.add_argument("--id-samples", type=int, default=10000)
    p.add_argument("--ood-samples", type=int, default=10000)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--slope", type=float, default=0.8)
    p.add_argument("--bias", type=float, default=-0.3)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--error-sharing", type=float, default=0.9)
    p.add_argument("--margin", type=float, default=3.0)
    p.add_argument("--id-range", default="0.6,0.95")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anticorrelated", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ablate", help="MAE distribution over model subsets")
    p.add_argument("--bundle", required=True)
    p.add_argument("--sizes", required=True)
    p.add_argument("--subsets", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("plot", help="probit-axis scatter plot as SVG")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AlineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
