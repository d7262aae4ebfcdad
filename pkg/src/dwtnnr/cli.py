"""Command-line front end: ``complete``, ``mask``, ``metrics``, ``bench`` and ``weights-vis``."""

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import imageio
from .core import MaskedMatrix
from .errors import DwtnnrError, NumericalError
from .masks import MaskSpec, make_mask
from .metrics import psnr, residuals
from .solvers import AdmmConfig, SolverConfig, solve_dwtnnr, solve_tnnr_admm
from .synth import SynthSpec, make_low_rank
from .weights import (
    exponential_weights,
    observation_counts,
    visualization_to_bytes,
    weight_visualization,
)

log = logging.getLogger("dwtnnr")

METHODS = ("dwtnnr", "admm", "unweighted")

# argparse destinations recorded in a run manifest
_MANIFEST_KEYS = (
    "input", "output", "mask", "missing_ratio", "seed", "triangle", "orientation",
    "diamond", "blocks", "method", "r", "theta1", "theta2", "alpha1", "rho", "eps",
    "max_iters", "stopping", "mu1", "rho_inner", "inner_eps", "max_inner",
    "no_inner_projection", "truth", "log", "no_timing",
)


# -- argument helpers -----------------------------------------------------

def _ints(text, count, what):
    parts = [p for p in text.replace("x", ",").split(",") if p.strip()]
    if len(parts) != count:
        raise argparse.ArgumentTypeError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return tuple(int(p) for p in parts)


def _floats(text, count, what):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise argparse.ArgumentTypeError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def parse_size(text):
    """``WxH`` -> ``(rows, cols) = (H, W)``."""
    w, h = _ints(text.lower(), 2, "--size")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}")
    return h, w


def parse_r_range(text):
    """``N`` or ``A..B`` (inclusive)."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid r range {text!r}")
    return list(range(lo, hi + 1))


def parse_blocks(text):
    """``top,left,height,width[;top,left,height,width...]``."""
    return [_ints(chunk, 4, "--blocks") for chunk in text.split(";") if chunk.strip()]


def _add_mask_source(p, with_random_flag):
    g = p.add_argument_group("mask source")
    if with_random_flag:
        g.add_argument("--random", dest="missing_ratio", type=float, metavar="RATIO",
                       help="uniform random loss with exactly round(RATIO*m*n) missing entries")
    else:
        g.add_argument("--missing-ratio", dest="missing_ratio", type=float, metavar="RATIO",
                       help="uniform random loss with exactly round(RATIO*m*n) missing entries")
    g.add_argument("--seed", type=int, default=0, help="seed for random masks (default 0)")
    g.add_argument("--blocks", type=parse_blocks, metavar="T,L,H,W[;...]",
                   help="rectangular holes")
    g.add_argument("--triangle", type=lambda s: _ints(s, 4, "--triangle"), metavar="T,L,H,W",
                   help="triangular hole inside the bounding box")
    g.add_argument("--orientation", default="lower-right",
                   choices=("lower-right", "lower-left", "upper-left", "upper-right"))
    g.add_argument("--diamond", type=lambda s: _floats(s, 4, "--diamond"), metavar="CI,CJ,A,B",
                   help="diamond hole with center (CI,CJ) and semi-axes A,B")
    g.add_argument("--from-image", dest="from_image", metavar="PGM",
                   help="text/occlusion image; pixels >= threshold are observed")
    g.add_argument("--threshold", type=int, default=128)


def _mask_spec(args):
    chosen = [name for name in ("missing_ratio", "blocks", "triangle", "diamond", "from_image")
              if getattr(args, name, None) is not None]
    if len(chosen) != 1:
        raise DwtnnrError("choose exactly one mask source")
    kind = chosen[0]
    if kind == "missing_ratio":
        return MaskSpec("random", missing_ratio=args.missing_ratio, seed=args.seed)
    if kind == "blocks":
        return MaskSpec("blocks", rectangles=args.blocks)
    if kind == "triangle":
        return MaskSpec("triangle", box=args.triangle, orientation=args.orientation)
    if kind == "diamond":
        ci, cj, a, b = args.diamond
        return MaskSpec("diamond", center=(ci, cj), semi_axes=(a, b))
    return MaskSpec("from-image", image=imageio.read_gray(args.from_image), threshold=args.threshold)


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=METHODS, default="dwtnnr")
    g.add_argument("--r", type=int, default=3, help="truncated singular values (default 3)")
    g.add_argument("--theta1", type=float, default=1.2)
    g.add_argument("--theta2", type=float, default=1.2)
    g.add_argument("--alpha1", type=float, default=1e-4)
    g.add_argument("--rho", type=float, default=1.2)
    g.add_argument("--eps", type=float, default=1e-4)
    g.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    g.add_argument("--stopping", choices=("relative", "absolute"), default="relative")
    g.add_argument("--mu1", type=float, default=None,
                   help="inner ADMM starting penalty (default: matched to the outer step)")
    g.add_argument("--rho-inner", dest="rho_inner", type=float, default=None)
    g.add_argument("--inner-eps", dest="inner_eps", type=float, default=None)
    g.add_argument("--max-inner", dest="max_inner", type=int, default=100)
    g.add_argument("--no-inner-projection", dest="no_inner_projection", action="store_true")
    g.add_argument("--no-timing", dest="no_timing", action="store_true",
                   help="leave elapsed_ms empty so outputs are byte-reproducible")


def solver_configs(args, r=None):
    cfg = SolverConfig(
        r=args.r if r is None else r,
        theta1=args.theta1,
        theta2=args.theta2,
        alpha1=args.alpha1,
        rho=args.rho,
        eps=args.eps,
        max_iters=args.max_iters,
        weighting="unweighted" if args.method == "unweighted" else "double-weighted",
        stopping=args.stopping,
    )
    inner = AdmmConfig(
        mu1=args.mu1,
        rho_inner=args.rho_inner,
        inner_eps=args.inner_eps,
        max_inner=args.max_inner,
        project_each_step=not args.no_inner_projection,
    )
    return cfg, inner


def run_method(method, M, cfg, inner, truth=None, record_time=True):
    if method == "admm":
        return solve_tnnr_admm(M, cfg, inner, truth=truth, record_time=record_time)
    return solve_dwtnnr(M, cfg, truth=truth, record_time=record_time)


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- manifest -------------------------------------------------------------

def _manifest_value(value):
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return ";".join(",".join(str(v) for v in item) for item in value)
        return ",".join(str(v) for v in value)
    return str(value)


def write_manifest(path, args, extra=None):
    lines = [f"tool_version={__version__}", f"command={args.command}"]
    for key in _MANIFEST_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        lines.append(f"{key}={_manifest_value(value)}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _manifest_to_argv(manifest):
    """Translate manifest entries back into ``complete`` flags."""
    flags = {
        "input": "--input", "output": "--output", "mask": "--mask",
        "missing_ratio": "--missing-ratio", "seed": "--seed", "triangle": "--triangle",
        "orientation": "--orientation", "diamond": "--diamond", "blocks": "--blocks",
        "method": "--method", "r": "--r", "theta1": "--theta1", "theta2": "--theta2",
        "alpha1": "--alpha1", "rho": "--rho", "eps": "--eps", "max_iters": "--max-iters",
        "stopping": "--stopping", "mu1": "--mu1", "rho_inner": "--rho-inner",
        "inner_eps": "--inner-eps", "max_inner": "--max-inner", "truth": "--truth",
        "log": "--log",
    }
    switches = {"no_inner_projection": "--no-inner-projection", "no_timing": "--no-timing"}
    argv = []
    for key, value in manifest.items():
        if key in flags:
            argv += [flags[key], value]
        elif key in switches and value == "True":
            argv.append(switches[key])
    return argv


# -- subcommands ----------------------------------------------------------

def _channel_log_paths(log_path, channels):
    if log_path is None:
        return [None] * channels
    if channels == 1:
        return [Path(log_path)]
    p = Path(log_path)
    return [p.with_name(f"{p.stem}_ch{c}{p.suffix}") for c in range(channels)]


def cmd_complete(args):
    if args.from_manifest:
        manifest_argv = _manifest_to_argv(read_manifest(args.from_manifest))
        args = build_parser().parse_args(["complete"] + manifest_argv)
    if args.input is None or args.output is None:
        raise DwtnnrError("--input and --output are required")

    img = imageio.read_image(args.input)
    shape = (img.height, img.width)
    if args.mask is not None:
        mask = imageio.read_mask(args.mask)
        if mask.shape != shape:
            raise DwtnnrError(f"mask is {mask.shape[1]}x{mask.shape[0]}, image is {img.width}x{img.height}")
    else:
        mask = make_mask(_mask_spec(args), *shape)
    if args.mask_out:
        imageio.write_mask(args.mask_out, mask)

    truth = imageio.read_image(args.truth) if args.truth else None
    if truth is not None and (truth.channels, truth.height, truth.width) != (img.channels, img.height, img.width):
        raise DwtnnrError("--truth does not match the input image dimensions")

    cfg, inner = solver_configs(args)
    planes = imageio.split_channels(img)
    truth_planes = imageio.split_channels(truth) if truth is not None else [None] * len(planes)

    def solve_channel(c):
        M = MaskedMatrix.from_full(planes[c], mask)
        return run_method(args.method, M, cfg, inner, truth=truth_planes[c],
                          record_time=not args.no_timing)

    log_paths = _channel_log_paths(args.log, len(planes))
    try:
        results = _map(solve_channel, list(range(len(planes))), args.jobs)
    except NumericalError as exc:
        partial = getattr(exc, "trace", None)
        if partial is not None and args.log:
            partial.write_csv(Path(args.log).with_suffix(".partial.csv"))
        raise

    recovered = imageio.merge_channels([res.recovered for res in results])
    imageio.write_image(args.output, recovered)
    for res, path in zip(results, log_paths):
        if path is not None:
            res.trace.write_csv(path)
    if args.plot:
        from .plotting import plot_convergence
        labels = ["gray"] if len(results) == 1 else ["R", "G", "B"]
        plot_convergence([res.trace for res in results], args.plot, labels)

    extra = {
        "iterations": ",".join(str(res.iterations) for res in results),
        "converged": ",".join(str(res.converged) for res in results),
    }
    score = None
    if truth is not None:
        # score the pixels actually written to the output file
        out_planes = [imageio.to_bytes(p).astype(np.float64) for p in recovered.planes]
        score = psnr(residuals(out_planes, truth_planes, mask))
        extra["psnr_db"] = _fmt_psnr(score)
    manifest_path = args.manifest or f"{args.output}.manifest"
    write_manifest(manifest_path, args, extra)

    for c, res in enumerate(results):
        log.info("channel %d: %d iterations (converged=%s)", c, res.iterations, res.converged)
    if score is not None:
        print(f"psnr_db={_fmt_psnr(score)}")
    return 0


def _fmt_psnr(value):
    return "inf" if math.isinf(value) else f"{value:.4f}"


def cmd_mask(args):
    if args.like:
        ref = imageio.read_image(args.like)
        shape = (ref.height, ref.width)
    elif args.size:
        shape = args.size
    elif args.from_image:
        shape = imageio.read_gray(args.from_image).shape
    else:
        raise DwtnnrError("give --size WxH or --like IMAGE")
    mask = make_mask(_mask_spec(args), *shape)
    imageio.write_mask(args.output, mask)
    log.info("wrote %s: %d of %d entries missing", args.output, int((~mask).sum()), mask.size)
    return 0


def cmd_metrics(args):
    rec = imageio.read_image(args.recovered)
    truth = imageio.read_image(args.truth)
    if (rec.channels, rec.height, rec.width) != (truth.channels, truth.height, truth.width):
        raise DwtnnrError("recovered and truth images differ in size or channels")
    mask = imageio.read_mask(args.mask)
    if mask.shape != (truth.height, truth.width):
        raise DwtnnrError("mask does not match the image size")
    res = residuals(imageio.split_channels(rec), imageio.split_channels(truth), mask)
    score = psnr(res)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["erec", "mse", "psnr_db"])
    writer.writerow([
        format(math.sqrt(res.squared_error), ".10g"),
        format(res.mse, ".10g"),
        "inf" if math.isinf(score) else format(score, ".6f"),
    ])
    return 0


BENCH_COLUMNS = ("instance", "method", "r", "repeats", "psnr", "iterations",
                 "inner_iterations", "elapsed_ms", "best")


def _bench_instances(args):
    """``[(name, truth_planes)]`` from ``--synthetic`` or ``--images``."""
    out = []
    for text in args.synthetic or []:
        dims, _, rank = text.partition(":")
        m, n = _ints(dims.lower(), 2, "--synthetic")
        rank = int(rank or 3)
        spec = SynthSpec(m, n, rank, seed=args.data_seed)
        out.append((f"synth{m}x{n}r{rank}", [make_low_rank(spec)]))
    if args.images:
        paths = sorted(p for p in Path(args.images).iterdir()
                       if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
        for p in paths:
            out.append((p.stem, imageio.split_channels(imageio.read_image(p))))
    return out


def _bench_cell(args, instance, method, r):
    name, planes = instance
    cfg, inner = solver_configs(args, r=r)
    cfg = replace(cfg, weighting="unweighted" if method == "unweighted" else "double-weighted")
    shape = planes[0].shape
    psnrs, iters, inners, times = [], [], [], []
    for rep in range(args.repeats):
        spec = _mask_spec(args)
        if spec.kind == "random":
            spec.seed = args.seed + rep
        mask = make_mask(spec, *shape)
        recs = []
        for plane in planes:
            M = MaskedMatrix.from_full(plane, mask)
            res = run_method(method, M, cfg, inner, record_time=not args.no_timing)
            recs.append(res.recovered)
            iters.append(res.iterations)
            inners.append(res.inner_iterations)
            if res.trace.records and res.trace.records[-1].elapsed_ms is not None:
                times.append(res.trace.records[-1].elapsed_ms)
        if not args.no_truth:
            psnrs.append(psnr(residuals(recs, planes, mask)))
    return {
        "instance": name,
        "method": method,
        "r": r,
        "repeats": args.repeats,
        "psnr": float(np.mean(psnrs)) if psnrs else None,
        "iterations": float(np.mean(iters)),
        "inner_iterations": float(np.mean(inners)),
        "elapsed_ms": float(np.mean(times)) if times else None,
        "best": 0,
    }


def select_best(rows):
    """Mark the highest-PSNR row of each (instance, method) group; no PSNR, no pick."""
    groups = {}
    for row in rows:
        groups.setdefault((row["instance"], row["method"]), []).append(row)
    best = []
    for grp in groups.values():
        scored = [row for row in grp if row["psnr"] is not None]
        if not scored:
            continue
        top = max(scored, key=lambda row: (row["psnr"], -row["r"]))
        top["best"] = 1
        best.append(top)
    return best


def bench_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in rows:
        writer.writerow([
            "" if row[c] is None else (format(row[c], ".10g") if isinstance(row[c], float) else row[c])
            for c in BENCH_COLUMNS
        ])
    return buf.getvalue()


def cmd_bench(args):
    if all(getattr(args, k) is None for k in ("missing_ratio", "blocks", "triangle", "diamond", "from_image")):
        args.missing_ratio = 0.5
    instances = _bench_instances(args)
    if not instances:
        raise DwtnnrError("no benchmark instances: give --synthetic or an --images directory with netpbm files")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise DwtnnrError(f"unknown method {m!r}")
    cells = [(inst, m, r) for inst in instances for m in methods for r in args.r_range]
    rows = _map(lambda cell: _bench_cell(args, *cell), cells, args.jobs)
    best = select_best(rows)
    text = bench_csv(rows)
    if args.output:
        Path(args.output).write_text(text)
        if not args.no_figures:
            from .plotting import plot_r_sweep
            stem = Path(args.output).with_suffix("")
            if any(row["psnr"] is not None for row in rows):
                plot_r_sweep(rows, f"{stem}_psnr_vs_r.png")
            plot_r_sweep(rows, f"{stem}_iterations_vs_r.png", value="inner_iterations",
                         ylabel="total inner iterations")
    else:
        sys.stdout.write(text)
    for row in best:
        log.info("best r for %s / %s: r=%d, psnr=%.4f", row["instance"], row["method"], row["r"], row["psnr"])
    if args.output:
        sys.stdout.write(bench_csv(best))
    return 0


def cmd_weights_vis(args):
    mask = imageio.read_mask(args.mask)
    w = exponential_weights(observation_counts(mask), args.theta1, args.theta2)
    W = weight_visualization(w, mask)
    imageio.write_gray(args.output, visualization_to_bytes(W).astype(np.float64))
    if args.plot:
        from .plotting import plot_weights
        plot_weights(W, args.plot)
    return 0


# -- parser ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="dwtnnr",
        description="Low-rank matrix completion and image inpainting with row/column "
                    "weighted truncated nuclear norm regularization.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-run details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complete", help="recover the missing pixels of an image")
    p.add_argument("--input", help="PGM/PPM image (values at missing pixels are ignored)")
    p.add_argument("--output", "-o", help="recovered image path")
    p.add_argument("--mask", help="mask PGM (255 observed, 0 missing)")
    _add_mask_source(p, with_random_flag=False)
    _add_solver_flags(p)
    p.add_argument("--truth", help="ground-truth image; prints the PSNR over missing pixels")
    p.add_argument("--log", help="per-iteration trace CSV (suffixed _ch0.._ch2 for colour)")
    p.add_argument("--plot", help="write a convergence figure (PNG)")
    p.add_argument("--manifest", help="manifest path (default OUTPUT.manifest)")
    p.add_argument("--from-manifest", dest="from_manifest", help="re-run from a manifest file")
    p.add_argument("--mask-out", dest="mask_out", help="also write the mask used")
    p.add_argument("--jobs", type=int, default=1, help="solve colour channels in parallel")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("mask", help="generate a mask PGM")
    _add_mask_source(p, with_random_flag=True)
    p.add_argument("--size", type=parse_size, metavar="WxH")
    p.add_argument("--like", help="take the size from this image")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("metrics", help="Erec, MSE and PSNR over missing pixels as CSV")
    p.add_argument("--recovered", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="sweep r and methods over images or synthetic instances")
    p.add_argument("--synthetic", action="append", metavar="MxN[:RANK]",
                   help="seeded low-rank instance in [0,255] (repeatable)")
    p.add_argument("--data-seed", dest="data_seed", type=int, default=0)
    p.add_argument("--images", help="directory of PGM/PPM ground-truth images")
    p.add_argument("--methods", default="dwtnnr", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--r-range", dest="r_range", type=parse_r_range, default=parse_r_range("1..20"),
                   metavar="A..B")
    p.add_argument("--repeats", type=int, default=1, help="runs averaged per cell (mask seed + i)")
    p.add_argument("--no-truth", dest="no_truth", action="store_true",
                   help="do not score against the inputs; no best-r selection")
    p.add_argument("--output", "-o", help="CSV path; figures are written alongside")
    p.add_argument("--no-figures", dest="no_figures", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="run sweep cells in parallel")
    _add_mask_source(p, with_random_flag=False)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("weights-vis", help="write the weight heatmap of a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--theta1", type=float, default=1.2)
    p.add_argument("--theta2", type=float, default=1.2)
    p.add_argument("--plot", help="also write a colour figure (PNG)")
    p.set_defaults(func=cmd_weights_vis)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if hasattr(args, "jobs"):
        args.jobs = max(1, args.jobs)
    try:
        return args.func(args)
    except (DwtnnrError, OSError) as exc:
        print(f"dwtnnr {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
