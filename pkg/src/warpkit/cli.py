"""Command-line surface: warp, sweep, fit, flow, check-grad, align.

Diagnostics go to stderr; machine-readable results go to files or stdout as
JSON. Exit codes: 0 success, 1 usage error, 2 data or numerical error.
"""

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import align as align_mod
from . import backends, io
from .errors import WarpKitError
from .fitdemo import FitConfig, fit_warp
from .gradients import check_gradients
from .sampler import build_flow, warp_image
from .tps import fit

USAGE_ERROR = 1
DATA_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract here is 1.
    def error(self, message):
        raise _UsageError(message)


def _log(message):
    print(message, file=sys.stderr)


def _build_parser() -> _Parser:
    parser = _Parser(prog="warpkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    warp = sub.add_parser("warp", help="warp one image")
    warp.add_argument("--input", required=True)
    warp.add_argument("--points", required=True, help="transform parameter file (JSON)")
    warp.add_argument("--output", required=True)
    warp.add_argument("--alpha", type=float, default=1.0)
    warp.add_argument(
        "--backend",
        choices=("tps", "projective", "dense", "landmark"),
        default="tps",
    )
    warp.add_argument("--lambda", dest="regularization", type=float, default=1e-6)

    sweep = sub.add_parser("sweep", help="warp at several exaggeration factors")
    sweep.add_argument("--input", required=True)
    sweep.add_argument("--points", required=True)
    sweep.add_argument("--outdir", required=True)
    sweep.add_argument("--alphas", default="0.5,1.0,1.5,2.0")
    sweep.add_argument("--lambda", dest="regularization", type=float, default=1e-6)

    fit_cmd = sub.add_parser("fit", help="recover a warp between two images")
    fit_cmd.add_argument("--input", required=True, help="source image (PNG)")
    fit_cmd.add_argument("--target", required=True, help="target image (PNG)")
    fit_cmd.add_argument("--output", required=True, help="report JSON path")
    fit_cmd.add_argument("-k", type=int, default=16)
    fit_cmd.add_argument("--iters", type=int, default=2000)
    fit_cmd.add_argument("--lr", type=float, default=0.05)
    fit_cmd.add_argument("--seed", type=int, default=0)
    fit_cmd.add_argument("--lambda", dest="regularization", type=float, default=1e-6)

    flow = sub.add_parser("flow", help="export a dense flow field (WFLD)")
    flow.add_argument("--points", required=True)
    flow.add_argument("--output", required=True)
    flow.add_argument("--size", type=int, required=True, help="grid height and width")
    flow.add_argument("--alpha", type=float, default=1.0)
    flow.add_argument("--lambda", dest="regularization", type=float, default=1e-6)

    check = sub.add_parser("check-grad", help="finite-difference gradient check")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--size", type=int, default=16)
    check.add_argument("-k", type=int, default=8)

    align = sub.add_parser("align", help="similarity-align a face crop")
    align.add_argument("--input", required=True)
    align.add_argument("--landmarks", required=True)
    align.add_argument("--output", required=True)
    align.add_argument("--size", type=int, default=256)

    return parser


def _cmd_warp(args) -> int:
    image = io.read_png(args.input)
    if args.backend == "projective":
        warped = backends.projective_warp(image, io.load_projective_params(args.points))
    elif args.backend == "dense":
        warped = backends.dense_warp(image, io.load_dense_grid(args.points))
    else:
        control = io.load_points(args.points)
        if args.backend == "landmark":
            warped = backends.landmark_warp(
                image,
                control.points,
                control.displacements,
                args.alpha,
                args.regularization,
            )
        else:
            warped = warp_image(image, control, args.alpha, args.regularization)
    io.write_png(warped, args.output)
    _log(f"wrote {args.output}")
    return 0


def _cmd_sweep(args) -> int:
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError as exc:
        raise _UsageError(f"bad --alphas list: {exc}") from exc
    if not alphas:
        raise _UsageError("--alphas must name at least one factor")
    image = io.read_png(args.input)
    control = io.load_points(args.points)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for alpha in alphas:
        out_path = outdir / f"{stem}_a{alpha:.2f}.png"
        io.write_png(warp_image(image, control, alpha, args.regularization), out_path)
        _log(f"wrote {out_path}")
    return 0


def _cmd_fit(args) -> int:
    source = io.read_png(args.input)
    target = io.read_png(args.target)
    config = FitConfig(
        control_count=args.k,
        iterations=args.iters,
        step_size=args.lr,
        regularization=args.regularization,
        seed=args.seed,
    )
    report = fit_warp(source, target, config)
    payload = {
        "psnr": None if math.isinf(report.psnr) else report.psnr,
        "exact": math.isinf(report.psnr),
        "best_loss": report.best_loss,
        "trajectory": report.trajectory.tolist(),
        "control_points": io.points_payload(report.control),
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    _log(f"wrote {args.output}")
    print(json.dumps({"psnr": payload["psnr"], "best_loss": report.best_loss}))
    return 0


def _cmd_flow(args) -> int:
    control = io.load_points(args.points)
    params = fit(control.scaled(args.alpha), args.regularization)
    io.write_flow(build_flow(params, args.size, args.size), args.output)
    _log(f"wrote {args.output}")
    return 0


def _cmd_check_grad(args) -> int:
    report = check_gradients(args.seed, args.size, args.size, args.k)
    print(json.dumps(report.to_dict()))
    return 0 if report.passed else DATA_ERROR


def _cmd_align(args) -> int:
    image = io.read_png(args.input)
    landmarks = io.load_landmarks(args.landmarks)
    template = None
    template_path = os.environ.get("WARPKIT_TEMPLATE")
    if template_path:
        template = io.load_landmarks(template_path).as_array()
    aligned = align_mod.align_face(image, landmarks, args.size, template)
    io.write_png(aligned, args.output)
    _log(f"wrote {args.output}")
    return 0


_COMMANDS = {
    "warp": _cmd_warp,
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "flow": _cmd_flow,
    "check-grad": _cmd_check_grad,
    "align": _cmd_align,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _log(f"usage error: {exc}")
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        _log(f"usage error: {exc}")
        return USAGE_ERROR
    except WarpKitError as exc:
        _log(f"error: {exc}")
        return DATA_ERROR
    except (OSError, np.linalg.LinAlgError) as exc:
        _log(f"error: {exc}")
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
