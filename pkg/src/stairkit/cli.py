"""Command-line entry point exposing the full pipeline.

Subcommands: synth, encode, decode, link, reconstruct, eval, loss, bench.
All outputs are written atomically (temp file + rename); every subcommand
is deterministic given identical inputs and --seed. Exit codes: 0 success,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time

import numpy as np

from . import __version__
from .core import (
    CONCAVE,
    CONVEX,
    CameraIntrinsics,
    GridGeometry,
    TensorGrid,
    format_intrinsics,
    read_intrinsics,
    read_tensor,
    write_tensor,
)
from .label_codec import (
    LabelPair,
    decode_cells,
    encode_lines,
    label_paths,
    read_lines_csv,
    write_lines_csv,
)
from .line_linker import LinkerConfig, link_lines, write_equations_csv
from .losses import LineLossInput, LossConfig, depth_loss, line_loss, seg_loss
from .metrics import cell_confusion, pixel_accuracy, precision_recall_iou
from .reconstruct import (
    CLASS_ORDER,
    DepthMatrix,
    SegmentationMask,
    class_depth,
    harden_mask,
    reconstruct_cloud,
    write_ply,
)
from .synth import StairSpec, generate_scene


def _atomic(path, write_fn) -> None:
    """Write via a sibling temp file and rename into place."""
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _parse_size(text: str) -> tuple[int, int]:
    """Parse WxH (e.g. 640x480) into (height, width)."""
    try:
        w, h = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    return h, w


def _parse_grid(text: str) -> tuple[int, int]:
    """Parse RxC (e.g. 64x32) into (rows, cols)."""
    try:
        r, c = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}")
    return r, c


def _geometry(args) -> GridGeometry:
    h, w = args.image_size
    r, c = args.grid
    return GridGeometry(input_h=h, input_w=w, grid_rows=r, grid_cols=c)


def _add_geometry_flags(p) -> None:
    p.add_argument("--image-size", type=_parse_size, default=(512, 512),
                   metavar="WxH", help="input image size (default 512x512)")
    p.add_argument("--grid", type=_parse_grid, default=(64, 32),
                   metavar="RxC", help="cell grid size (default 64x32)")


def _load_pair(heat_path, loc_path, kind) -> LabelPair:
    return LabelPair(heatmap=read_tensor(heat_path), locations=read_tensor(loc_path), kind=kind)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    spec = StairSpec(
        steps=args.steps,
        riser_h=args.riser_h,
        tread_d=args.tread_d,
        width=args.width,
        pitch=args.pitch,
        yaw=args.yaw,
        roll=args.roll,
        position=tuple(args.camera),
        K=CameraIntrinsics(fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy),
        image_h=args.image_size[0],
        image_w=args.image_size[1],
        background_depth=args.background_depth,
    )
    truth = generate_scene(spec)
    os.makedirs(args.out, exist_ok=True)
    join = lambda name: os.path.join(args.out, name)
    _atomic(join("lines.csv"), lambda p: write_lines_csv(truth.lines, p))
    _atomic(join("seg.stn3"), lambda p: write_tensor(truth.seg.grid, p))
    _atomic(join("depth.stn3"), lambda p: write_tensor(truth.depth.grid, p))
    _atomic(join("rgb.stn3"), lambda p: write_tensor(truth.rgb, p))
    _atomic(join("intrinsics.txt"), lambda p: _write_text(p, format_intrinsics(spec.K)))
    _atomic(join("spec.txt"), lambda p: _write_text(p, _spec_text(spec, truth)))
    print(f"scene with {len(truth.lines)} lines written to {args.out}")
    return 0


def _write_text(path, text) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)


def _spec_text(spec: StairSpec, truth) -> str:
    pairs = [
        ("steps", spec.steps),
        ("riser_h", spec.riser_h),
        ("tread_d", spec.tread_d),
        ("width", spec.width),
        ("pitch", spec.pitch),
        ("yaw", spec.yaw),
        ("roll", spec.roll),
        ("camera_x", spec.position[0]),
        ("camera_y", spec.position[1]),
        ("camera_z", spec.position[2]),
        ("image_h", spec.image_h),
        ("image_w", spec.image_w),
        ("background_depth", spec.background_depth),
        ("lines", len(truth.lines)),
        ("dmin", truth.depth.dmin),
        ("dmax", truth.depth.dmax),
    ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def _cmd_encode(args) -> int:
    geom = _geometry(args)
    lines = read_lines_csv(args.lines)
    convex, concave = encode_lines(lines, geom)
    os.makedirs(args.out, exist_ok=True)
    for pair in (convex, concave):
        heat_path, loc_path = label_paths(args.out, args.stem, pair.kind)
        _atomic(heat_path, lambda p, g=pair.heatmap: write_tensor(g, p))
        _atomic(loc_path, lambda p, g=pair.locations: write_tensor(g, p))
    print(f"labels written to {args.out}/{args.stem}.*.stn3")
    return 0


def _cmd_decode(args) -> int:
    pair = _load_pair(args.heat, args.loc, args.kind)
    dets = decode_cells(pair, args.threshold)
    rows = ["row,col,confidence,x1,y1,x2,y2"]
    for d in dets:
        e = d.endpoints
        rows.append(
            f"{d.row},{d.col},{d.confidence:.6f},"
            f"{e[0]:.6f},{e[1]:.6f},{e[2]:.6f},{e[3]:.6f}"
        )
    text = "\n".join(rows) + "\n"
    if args.out:
        _atomic(args.out, lambda p: _write_text(p, text))
    else:
        sys.stdout.write(text)
    return 0


def _cmd_link(args) -> int:
    geom = _geometry(args)
    cfg = LinkerConfig(
        confidence_threshold=args.threshold,
        top_k=args.topk,
        intersect_range=(args.intersect_min, args.intersect_max),
        endpoint_close_px=args.endpoint_close,
    )
    convex = concave = None
    if args.heat_convex:
        convex = _load_pair(args.heat_convex, args.loc_convex, CONVEX)
    if args.heat_concave:
        concave = _load_pair(args.heat_concave, args.loc_concave, CONCAVE)
    if convex is None and concave is None:
        raise ValueError("link needs at least one kind of label grids")
    equations = link_lines(convex, concave, cfg, geom)
    if args.out:
        _atomic(args.out, lambda p: write_equations_csv(equations, p))
    for e in equations:
        print(
            f"{e.kind},{e.k:.6f},{e.b:.6f},{e.x_min:.6f},{e.x_max:.6f},{e.source_cells}"
        )
    return 0


def _cmd_reconstruct(args) -> int:
    depth = DepthMatrix(read_tensor(args.depth), dmin=args.dmin, dmax=args.dmax)
    mask = SegmentationMask(read_tensor(args.mask))
    if not mask.is_one_hot:
        mask = harden_mask(mask)
    K = read_intrinsics(args.intrinsics)
    rgb = read_tensor(args.rgb) if args.rgb else None
    cloud = reconstruct_cloud(
        depth, mask, K, args.class_name, rgb=rgb, threads=args.threads
    )
    _atomic(args.out, lambda p: write_ply(cloud, p))
    print(f"{len(cloud)} points ({cloud.dropped} dropped) -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    results: dict[str, float] = {}
    if args.pred_heat:
        if len(args.pred_heat) != len(args.gt_heat or []):
            raise ValueError("--pred-heat and --gt-heat must be paired")
        tp = fp = fn = tn = 0
        for pred_path, gt_path in zip(args.pred_heat, args.gt_heat):
            c = cell_confusion(
                read_tensor(pred_path).data, read_tensor(gt_path).data, args.conf
            )
            tp, fp, fn, tn = tp + c.tp, fp + c.fp, fn + c.fn, tn + c.tn
        from .metrics import ConfusionCounts

        p, r, iou = precision_recall_iou(ConfusionCounts(tp, fp, fn, tn))
        results.update(precision=p, recall=r, iou=iou)
    if args.pred_seg:
        pred = np.asarray(read_tensor(args.pred_seg).data)
        gt = np.asarray(read_tensor(args.gt_seg).data)
        pa, mpa, per_class = pixel_accuracy(pred, gt)
        results.update(pa=pa, mpa=mpa)
        for name, acc in zip(CLASS_ORDER, per_class):
            results[f"acc_{name}"] = acc
    if not results:
        raise ValueError("eval needs --pred-heat/--gt-heat and/or --pred-seg/--gt-seg")

    def fmt(v):
        return "nan" if v is None else f"{v:.6f}"

    print(" ".join(fmt(results.get(k)) for k in ("precision", "recall", "iou", "pa", "mpa")))
    if args.out:
        text = "".join(f"{k} = {fmt(v)}\n" for k, v in results.items())
        _atomic(args.out, lambda p: _write_text(p, text))
    return 0


def _cmd_loss(args) -> int:
    cfg = LossConfig(
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        psi=args.psi,
    )

    def line_input(pred_heat, pred_loc, gt_heat, gt_loc) -> LineLossInput:
        gt_conf = read_tensor(gt_heat).data[:, :, 0]
        return LineLossInput(
            pred_conf=read_tensor(pred_heat).data[:, :, 0],
            gt_conf=gt_conf,
            gt_mask=(gt_conf > 0).astype(np.float64),  # annotated-cell indicator
            pred_loc=read_tensor(pred_loc).data,
            gt_loc=read_tensor(gt_loc).data,
        )

    breakdown = {}
    breakdown["line_convex"] = line_loss(
        line_input(args.pred_heat_convex, args.pred_loc_convex,
                   args.gt_heat_convex, args.gt_loc_convex), cfg)
    breakdown["line_concave"] = line_loss(
        line_input(args.pred_heat_concave, args.pred_loc_concave,
                   args.gt_heat_concave, args.gt_loc_concave), cfg)
    breakdown["seg"] = seg_loss(
        read_tensor(args.pred_seg).data, read_tensor(args.gt_seg).data)
    breakdown["depth"] = depth_loss(
        read_tensor(args.pred_depth).data, read_tensor(args.gt_depth).data, cfg)
    breakdown["total"] = sum(breakdown.values())
    for term, value in breakdown.items():
        print(f"{term} {value:.6f}")
    return 0


# ---------------------------------------------------------------------------
# timing harness
# ---------------------------------------------------------------------------

BENCH_STAGES = ("post_processing", "mask_harden", "depth_processing", "rebuilding")


def bench_pipeline(size: tuple[int, int], iters: int, threads: int = 1, seed: int = 0):
    """Median/p95 stage timings over the post-CNN pipeline on synthetic inputs.

    Stages: line linking (post_processing), mask hardening, per-class depth
    gating (depth_processing) and point cloud rebuilding. Returns a report
    dict with per-stage and whole-process milliseconds.
    """
    if iters < 10:
        raise ValueError(f"iters must be >= 10, got {iters}")
    h, w = size
    if h % 8 or w % 16:
        raise ValueError(f"bench size must align to the 8x16 stride, got {w}x{h}")
    geom = GridGeometry(input_h=h, input_w=w, grid_rows=h // 8, grid_cols=w // 16)
    spec = StairSpec(
        steps=5,
        position=(0.0, -0.55, -1.8),
        K=CameraIntrinsics(fx=0.9 * w, fy=0.9 * w, cx=w / 2, cy=h / 2),
        image_h=h,
        image_w=w,
    )
    truth = generate_scene(spec)
    convex, concave = encode_lines(truth.lines, geom)
    cfg = LinkerConfig(intersect_range=(0.0, float(w)))

    # raw scores: blurred one-hot plus seeded noise, hardened inside the loop
    rng = np.random.default_rng(seed)
    scores = truth.seg.grid.data * 0.8 + 0.1
    scores = scores + rng.uniform(-0.05, 0.05, scores.shape).astype(np.float32)
    raw = SegmentationMask(TensorGrid(np.clip(scores, 0.0, 1.0).astype(np.float32)))

    samples = {name: [] for name in BENCH_STAGES}
    wholes = []
    for _ in range(iters):
        t0 = time.perf_counter()
        link_lines(convex, concave, cfg, geom)
        t1 = time.perf_counter()
        hard = harden_mask(raw)
        t2 = time.perf_counter()
        gated = class_depth(truth.depth, hard, "tread")
        t3 = time.perf_counter()
        reconstruct_cloud(gated, hard, spec.K, "tread", rgb=truth.rgb, threads=threads)
        t4 = time.perf_counter()
        for name, dt in zip(BENCH_STAGES, (t1 - t0, t2 - t1, t3 - t2, t4 - t3)):
            samples[name].append(dt * 1e3)
        wholes.append((t4 - t0) * 1e3)

    def stats(xs):
        return {
            "median_ms": statistics.median(xs),
            "p95_ms": float(np.percentile(xs, 95)),
        }

    report = {
        "size": size,
        "iters": iters,
        "threads": threads,
        "stages": {name: stats(ts) for name, ts in samples.items()},
        "whole_process": stats(wholes),
    }
    whole = report["whole_process"]
    report["stable"] = whole["p95_ms"] <= 2.0 * whole["median_ms"]
    return report


def _cmd_bench(args) -> int:
    for threads in (1, args.threads):
        report = bench_pipeline(args.size, args.iters, threads=threads, seed=args.seed)
        print(f"# threads={threads} size={args.size[1]}x{args.size[0]} iters={args.iters}")
        print(f"{'stage':<18} {'median_ms':>10} {'p95_ms':>10}")
        for name in BENCH_STAGES:
            s = report["stages"][name]
            print(f"{name:<18} {s['median_ms']:>10.3f} {s['p95_ms']:>10.3f}")
        s = report["whole_process"]
        print(f"{'whole_process':<18} {s['median_ms']:>10.3f} {s['p95_ms']:>10.3f}")
        budget = 50.0 if threads == 1 else 20.0
        verdict = "pass" if s["median_ms"] < budget else "fail"
        print(f"budget {budget:.0f} ms: {verdict}; stable: {report['stable']}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stairkit", description="stair-modeling geometry toolkit"
    )
    parser.add_argument("--version", action="version", version=f"stairkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic stair scene")
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--riser-h", type=float, default=0.16)
    p.add_argument("--tread-d", type=float, default=0.30)
    p.add_argument("--width", type=float, default=1.5)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--camera", type=float, nargs=3, default=[0.0, -0.5, -2.0],
                   metavar=("X", "Y", "Z"), help="camera center in world frame")
    p.add_argument("--fx", type=float, default=450.0)
    p.add_argument("--fy", type=float, default=450.0)
    p.add_argument("--cx", type=float, default=256.0)
    p.add_argument("--cy", type=float, default=256.0)
    p.add_argument("--image-size", type=_parse_size, default=(512, 512), metavar="WxH")
    p.add_argument("--background-depth", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0, help="unused; scenes are deterministic")
    p.add_argument("--out", required=True, help="output scene directory")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("encode", help="encode ground-truth lines into label grids")
    p.add_argument("--lines", required=True, help="lines CSV (kind,x1,y1,x2,y2)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stem", default="labels")
    _add_geometry_flags(p)
    p.set_defaults(fn=_cmd_encode)

    p = sub.add_parser("decode", help="decode label grids into cell detections")
    p.add_argument("--heat", required=True)
    p.add_argument("--loc", required=True)
    p.add_argument("--kind", choices=[CONVEX, CONCAVE], required=True)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(fn=_cmd_decode)

    p = sub.add_parser("link", help="link cell detections into line equations")
    p.add_argument("--heat-convex")
    p.add_argument("--loc-convex")
    p.add_argument("--heat-concave")
    p.add_argument("--loc-concave")
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--topk", type=int, default=50)
    p.add_argument("--intersect-min", type=float, default=0.0)
    p.add_argument("--intersect-max", type=float, default=512.0)
    p.add_argument("--endpoint-close", type=float, default=None,
                   help="endpoint merge distance in px (default 2x stride_h)")
    p.add_argument("--out", help="equations CSV path")
    _add_geometry_flags(p)
    p.set_defaults(fn=_cmd_link)

    p = sub.add_parser("reconstruct", help="back-project one class into a PLY cloud")
    p.add_argument("--depth", required=True, help="depth STN3 (meters, f32)")
    p.add_argument("--mask", required=True, help="segmentation STN3 (scores or one-hot)")
    p.add_argument("--intrinsics", required=True, help="intrinsics text file")
    p.add_argument("--class", dest="class_name", choices=list(CLASS_ORDER), required=True)
    p.add_argument("--rgb", help="optional aligned RGB STN3 for point colors")
    p.add_argument("--dmin", type=float, default=0.2)
    p.add_argument("--dmax", type=float, default=10.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output PLY path")
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("eval", help="precision/recall/IOU and PA/MPA")
    p.add_argument("--pred-heat", action="append")
    p.add_argument("--gt-heat", action="append")
    p.add_argument("--conf", type=float, default=0.5)
    p.add_argument("--pred-seg")
    p.add_argument("--gt-seg")
    p.add_argument("--out", help="metrics.txt path")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("loss", help="loss breakdown from prediction/GT STN3 files")
    for kind in (CONVEX, CONCAVE):
        p.add_argument(f"--pred-heat-{kind}", required=True)
        p.add_argument(f"--pred-loc-{kind}", required=True)
        p.add_argument(f"--gt-heat-{kind}", required=True)
        p.add_argument(f"--gt-loc-{kind}", required=True)
    p.add_argument("--pred-seg", required=True)
    p.add_argument("--gt-seg", required=True)
    p.add_argument("--pred-depth", required=True)
    p.add_argument("--gt-depth", required=True)
    p.add_argument("--alpha1", type=float, default=15.0)
    p.add_argument("--alpha2", type=float, default=5.0)
    p.add_argument("--lambda1", type=float, default=10.0)
    p.add_argument("--lambda2", type=float, default=10.0)
    p.add_argument("--psi", type=float, default=10.0)
    p.set_defaults(fn=_cmd_loss)

    p = sub.add_parser("bench", help="pipeline timing harness")
    p.add_argument("--size", type=_parse_size, default=(480, 640), metavar="WxH")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_bench)

    return parser


def run(argv=None) -> int:
    """Parse argv and dispatch; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"stairkit: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
