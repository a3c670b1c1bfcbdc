"""Command-line front end.

Every command writes its outputs plus ``<output>.manifest.json`` recording
the exact argv, resolved parameters, seeds and timing; ``bowlerhat3d rerun
MANIFEST`` replays it. Failures exit with status 1 and a one-line JSON
object ``{"error": <category>, "message": ...}`` on stderr.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (BowlerHatError, InvalidParameterError, ShapeMismatchError,
                     UnknownMethodError, UsageError)
from .evaluation import (DEFAULT_THRESHOLDS, auc_table, extract_profile, fwhm, roc,
                         write_auc_table)
from .hessian import DEFAULT_SCALES
from .phantom import NOISE_MODELS, RNG_NAME, NoiseSpec, add_noise, generate_phantom, load_spec
from .pipeline import METHODS, enhance, noise_sweep
from .volume import Volume, load_volume, normalize, save_volume


def _sibling(path, suffix):
    root, _ = os.path.splitext(path)
    return root + suffix


def _write_manifest(out_path, args, argv, parameters, inputs, outputs, seeds, started):
    doc = {
        "tool": "bowlerhat3d",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "parameters": parameters,
        "inputs": inputs,
        "outputs": outputs,
        "seeds": seeds,
        "rng": RNG_NAME if seeds else None,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    path = _sibling(out_path, ".manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def cmd_phantom(args, argv, started):
    spec = load_spec(args.spec)
    image, truth = generate_phantom(spec)
    truth_path = _sibling(args.out, ".truth.json")
    save_volume(Volume(image, provenance=args.spec), args.out, args.dtype)
    save_volume(Volume(truth, provenance=args.spec), truth_path, "u8")
    _write_manifest(args.out, args, argv, {"dtype": args.dtype}, [args.spec],
                    [args.out, truth_path], [], started)


def cmd_noise(args, argv, started):
    vol = load_volume(args.input)
    spec = NoiseSpec(args.model, sigma=args.sigma, rho=args.rho, seed=args.seed)
    save_volume(Volume(add_noise(vol.data, spec), provenance=args.input), args.out)
    params = {"model": spec.model, "sigma": spec.sigma, "rho": spec.rho}
    _write_manifest(args.out, args, argv, params, [args.input], [args.out], [args.seed], started)


def _enhance_params(args):
    if args.method not in METHODS:
        raise UnknownMethodError(f"unknown method {args.method!r}; expected one of {METHODS}")
    if args.dmax < 1 or args.dmax % 2 == 0:
        raise InvalidParameterError(f"--dmax must be an odd positive integer, got {args.dmax}",
                                    "invalid_dmax")
    if args.directions < 1:
        raise InvalidParameterError(f"--directions must be >= 1, got {args.directions}",
                                    "invalid_directions")
    if not 0 < args.tau <= 1:
        raise InvalidParameterError(f"--tau must lie in (0, 1], got {args.tau}", "invalid_tau")
    if args.method == "vesselness":
        for flag in ("alpha", "beta", "c"):
            val = getattr(args, flag)
            if val is not None and not val > 0:
                raise InvalidParameterError(f"--{flag} must be positive, got {val}",
                                            f"invalid_{flag}")
    if args.threads < 1:
        raise InvalidParameterError(f"--threads must be >= 1, got {args.threads}",
                                    "invalid_threads")
    return {"method": args.method, "d_max": args.dmax, "n_directions": args.directions,
            "scales": list(args.scales), "alpha": args.alpha, "beta": args.beta,
            "c": args.c, "tau": args.tau}


def cmd_enhance(args, argv, started):
    params = _enhance_params(args)
    vol = load_volume(args.input)
    out = enhance(vol.data, threads=args.threads, **params)
    save_volume(Volume(out, provenance=f"{args.input} | {args.method}"), args.out)
    params["threads"] = args.threads
    _write_manifest(args.out, args, argv, params, [args.input], [args.out], [], started)


def _parse_named(items):
    named = []
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = os.path.splitext(os.path.basename(item))[0], item
        named.append((name, path))
    return named


def _target_line(auc, target, tol):
    ok = abs(auc - target) <= tol
    return f"auc={auc:.6f} target={target}+/-{tol} {'PASS' if ok else 'FAIL'}"


def cmd_eval(args, argv, started):
    named = _parse_named(args.scores)
    if not named:
        raise InvalidParameterError("--scores is required")
    inputs = [p for _, p in named]
    params = {"mode": args.mode}
    if args.mode == "profile":
        if args.p0 is None or args.p1 is None:
            raise InvalidParameterError("profile mode needs --p0 and --p1")
        vol = load_volume(named[0][1])
        prof = extract_profile(vol.data, args.p0, args.p1, args.samples, provenance=named[0][1])
        prof.to_csv(args.out)
        params.update(p0=args.p0, p1=args.p1, samples=args.samples)
        try:
            width = fwhm(prof)
        except BowlerHatError:
            width = None
        params["fwhm"] = width
        print(f"peak={prof.peak_position():.4f} fwhm={width}")
    else:
        if args.truth is None:
            raise InvalidParameterError(f"{args.mode} mode needs --truth")
        truth_vol = load_volume(args.truth)
        inputs.append(args.truth)
        truth = truth_vol.data
        methods = []
        for name, path in named:
            scores = load_volume(path).data
            if scores.shape != truth.shape:
                raise ShapeMismatchError(f"{path} has dims {scores.shape}, "
                                         f"truth has {truth.shape}")
            methods.append((name, normalize(scores)))
        params["thresholds"] = args.thresholds
        if args.mode == "roc":
            if len(methods) != 1:
                raise InvalidParameterError("roc mode takes exactly one --scores volume")
            curve = roc(methods[0][1], truth, args.thresholds)
            curve.to_csv(args.out)
            params["auc"] = curve.auc
            line = f"auc={curve.auc:.6f}"
            if args.target is not None:
                line = _target_line(curve.auc, args.target, args.target_tol)
            print(line)
        else:
            rows = auc_table(methods, truth, args.thresholds)
            write_auc_table(rows, args.out)
            params["table"] = [list(r) for r in rows]
            for name, auc in rows:
                print(f"{name},{auc:.6f}")
    _write_manifest(args.out, args, argv, params, inputs, [args.out], [], started)


def _levels(spec):
    return [float(x) for x in spec.split(",") if x.strip()]


def cmd_sweep(args, argv, started):
    vol = load_volume(args.input)
    truth = load_volume(args.truth).data
    levels = [("gaussian", s) for s in _levels(args.sigmas)]
    levels += [("saltpepper", r) for r in _levels(args.rhos)]
    levels += [("speckle", s) for s in _levels(args.speckle)]
    rows = noise_sweep(vol.data, truth, levels, seed=args.seed, d_max=args.dmax,
                       n_directions=args.directions, threads=args.threads)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "level", "seed", "auc", "psnr"])
        for r in rows:
            p = "inf" if math.isinf(r["psnr"]) else repr(r["psnr"])
            w.writerow([r["model"], repr(r["level"]), r["seed"], repr(r["auc"]), p])
    params = {"levels": levels, "d_max": args.dmax, "n_directions": args.directions}
    _write_manifest(args.out, args, argv, params, [args.input, args.truth], [args.out],
                    [args.seed], started)


def cmd_rerun(args, argv, started):
    with open(args.manifest) as fh:
        doc = json.load(fh)
    cwd = os.getcwd()
    os.chdir(doc.get("cwd", cwd))
    try:
        return main(doc["argv"])
    finally:
        os.chdir(cwd)


def _scales(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid scale list {text!r}") from None
    if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("scales must be positive and strictly increasing")
    return vals


class _Parser(argparse.ArgumentParser):
    """Argument errors surface as JSON like every other failure."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    parser = _Parser(
        prog="bowlerhat3d",
        description="3D bowler-hat vessel enhancement, Hessian baselines and evaluation.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("phantom", help="generate a phantom and its ground truth",
                       formatter_class=fmt)
    p.add_argument("spec", help="phantom spec JSON")
    p.add_argument("out", help="output header path; truth goes to <out>.truth.json")
    p.add_argument("--dtype", choices=("f32", "u8", "u16"), default="f32")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("noise", help="corrupt a volume (0-255 scale)", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("out")
    p.add_argument("--model", choices=NOISE_MODELS, required=True)
    p.add_argument("--sigma", type=float, default=0.0, help="gaussian/speckle level, 0-255 scale")
    p.add_argument("--rho", type=float, default=0.0, help="salt-and-pepper density in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("enhance", help="run an enhancer; output is normalised to [0, 1]",
                       formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("out")
    p.add_argument("--method", default="bowlerhat", help="one of " + ", ".join(METHODS))
    p.add_argument("--dmax", type=int, default=9, help="bowler-hat: largest odd diameter")
    p.add_argument("--directions", type=int, default=32, help="bowler-hat: line orientations")
    p.add_argument("--scales", type=_scales, default=DEFAULT_SCALES,
                   help="Hessian methods: comma-separated sigmas")
    p.add_argument("--alpha", type=float, default=None,
                   help="vesselness alpha (default 0.5) or neuriteness alpha (default -1/3)")
    p.add_argument("--beta", type=float, default=0.5, help="vesselness beta")
    p.add_argument("--c", type=float, default=None,
                   help="vesselness c (default: half the max structureness per scale)")
    p.add_argument("--tau", type=float, default=0.5, help="volume-ratio cut-off")
    p.add_argument("--threads", type=int, default=1, help="worker threads; output is identical")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="ROC/AUC, AUC tables and line profiles", formatter_class=fmt)
    p.add_argument("--mode", choices=("roc", "table", "profile"), default="roc")
    p.add_argument("--scores", action="append", default=[],
                   help="score volume header, optionally NAME=PATH; repeat for table mode")
    p.add_argument("--truth", help="binary ground-truth volume header")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--thresholds", type=int, default=DEFAULT_THRESHOLDS)
    p.add_argument("--target", type=float, default=None,
                   help="roc mode: report PASS/FAIL against this AUC (e.g. 0.965)")
    p.add_argument("--target-tol", type=float, default=0.03)
    p.add_argument("--p0", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--p1", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="bowler-hat AUC versus noise level", formatter_class=fmt)
    p.add_argument("input", help="clean volume on the 0-255 scale")
    p.add_argument("truth")
    p.add_argument("--out", required=True)
    p.add_argument("--sigmas", default="10,20,30,40,50,60")
    p.add_argument("--rhos", default="0.1,0.2,0.3,0.4,0.5,0.6")
    p.add_argument("--speckle", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dmax", type=int, default=9)
    p.add_argument("--directions", type=int, default=32)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        rc = args.func(args, argv, started)
    except BowlerHatError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
