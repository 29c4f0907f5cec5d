"""Command-line entry point: ``curveconnect <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import formats
from .anchors import all_anchors, assign_labels, feature_sizes
from .config import ConfigError, PipelineConfig, load_config
from .evaluation import evaluate, iou_matrix, scores
from .formats import ParseError
from .geom import GeometryError, Polygon
from .lossref import gradient_check
from .maskgrid import ScoreGrid
from .pipeline import ImageResult, group_by_image, merged_regions, run_connect
from .synth import SynthParams, gen_case, perturb

log = logging.getLogger("curveconnect")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

GRADIENT_TOL = 1e-4


class InputError(Exception):
    pass


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default, help="key=value configuration file")
    parser.add_argument("--seed", type=int, default=default, help="seed for every random choice")
    parser.add_argument("--jobs", type=int, default=default, help="worker processes for per-image work")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curveconnect",
                                     description="Curve-connection post-processing for curved text detection.")
    _global_flags(parser, None)
    parser.add_argument("-v", "--verbose", action="store_true")
    # repeated on every subcommand so the flags work on either side of it
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("connect", parents=[common], help="segment dump -> detection polygons")
    p.add_argument("dump", help="segment-prediction dump (text or binary)")
    p.add_argument("-o", "--out", help="detection file (default: stdout)")
    p.add_argument("--svg-out", help="directory for one SVG polygon overlay per image")
    p.add_argument("--regions-out", help="directory for merged region masks as binary score grids")
    for name, kind in (("s1", float), ("s2", float), ("s3", float), ("max-rois", int),
                       ("canvas-stride", float), ("n-sample", int)):
        p.add_argument(f"--{name}", type=kind)

    p = sub.add_parser("evaluate", parents=[common], help="precision / recall / F-measure")
    p.add_argument("detections")
    p.add_argument("ground_truth")
    p.add_argument("--gt-format", choices=["ctw", "totaltext", "any"], default="ctw")
    p.add_argument("--iou-thr", type=float)
    p.add_argument("--per-image", action="store_true")

    p = sub.add_parser("label-anchors", parents=[common], help="positive anchors of one annotated image")
    p.add_argument("annotations")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--image-id", help="image to label when the file holds several")
    p.add_argument("--gt-format", choices=["ctw", "totaltext", "any"], default="ctw")

    p = sub.add_parser("synth", parents=[common], help="write synthetic cases")
    p.add_argument("--cases", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--binary", action="store_true", help="binary segment dump")

    sub.add_parser("loss-check", parents=[common], help="analytic vs numeric loss gradients")

    p = sub.add_parser("iou", parents=[common], help="IoU matrix between two polygon files")
    p.add_argument("a")
    p.add_argument("b")
    return parser


def _config(args) -> PipelineConfig:
    overrides = {
        "seed": args.seed,
        "s1": getattr(args, "s1", None),
        "s2": getattr(args, "s2", None),
        "s3": getattr(args, "s3", None),
        "max_rois": getattr(args, "max_rois", None),
        "canvas_stride": getattr(args, "canvas_stride", None),
        "n_sample": getattr(args, "n_sample", None),
        "iou_thr": getattr(args, "iou_thr", None),
    }
    return load_config(args.config, overrides)


def _output(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def svg_overlay(polygons: Sequence[Polygon], width: float, height: float) -> str:
    paths = []
    for p in polygons:
        pts = " L ".join(f"{x:.3f} {y:.3f}" for x, y in p.xy)
        paths.append(f'  <path d="M {pts} Z" fill="none" stroke="red" stroke-width="1"/>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">\n' + "\n".join(paths) + "\n</svg>\n")


def _safe_name(image_id: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in image_id)


def cmd_connect(args) -> int:
    cfg = _config(args)
    records = formats.read_segment_dump(args.dump)
    results = run_connect(records, cfg, jobs=max(1, args.jobs or 1))
    dets = {r.image_id: [(d.score, d.polygon) for d in r.detections] for r in results}
    _output(args.out, formats.format_detections(dets))
    if args.svg_out:
        _write_svgs(Path(args.svg_out), records, results)
    if args.regions_out:
        _write_regions(Path(args.regions_out), records, cfg)
    failed = sum(bool(r.errors) for r in results)
    log.info("%d images, %d detections, %d images with errors",
             len(results), sum(len(r.detections) for r in results), failed)
    return EXIT_OK


def _write_svgs(out: Path, records, results: Sequence[ImageResult]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    extent = {}
    for r in records:
        w, h = extent.get(r.image_id, (0.0, 0.0))
        extent[r.image_id] = (max(w, r.cx + r.side / 2), max(h, r.cy + r.side / 2))
    for res in results:
        polys = [d.polygon for d in res.detections]
        w, h = extent.get(res.image_id, (1.0, 1.0))
        for p in polys:
            x0, y0, x1, y1 = p.bounds()
            w, h = max(w, x1), max(h, y1)
        (out / f"{_safe_name(res.image_id)}.svg").write_text(svg_overlay(polys, w, h))


def _write_regions(out: Path, records, cfg: PipelineConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for image_id, preds in group_by_image(records):
        _, regions = merged_regions(preds, cfg)
        for k, region in enumerate(regions):
            grid = ScoreGrid(region.mask.bits.astype(np.float64), region.mask.stride)
            formats.write_scoregrid(out / f"{_safe_name(image_id)}_region{k:03d}.sgrd", grid, binary=True)


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    dets = {k: [p for _, p in v] for k, v in formats.read_detections(args.detections).items()}
    gts = formats.read_annotations(args.ground_truth, args.gt_format)
    report = evaluate(dets, gts, cfg.iou_thr)
    print(report.line())
    if args.per_image:
        for m in report.per_image:
            p, r, f = scores(m.tp, m.n_det, m.n_gt)
            print(f"{m.image_id} {p:.6f} {r:.6f} {f:.6f} {m.tp} {m.n_det} {m.n_gt}")
    return EXIT_OK


def cmd_label_anchors(args) -> int:
    cfg = _config(args)
    records = formats.read_annotations(args.annotations, args.gt_format)
    if args.image_id is not None:
        if args.image_id not in records:
            raise InputError(f"image {args.image_id!r} not in {args.annotations}")
        gts = records[args.image_id]
    elif len(records) == 1:
        gts = next(iter(records.values()))
    else:
        raise InputError(f"{len(records)} images in {args.annotations}; pick one with --image-id")
    if args.width < 1 or args.height < 1:
        raise InputError("image dimensions must be positive")
    anchors = all_anchors(feature_sizes(args.width, args.height, cfg.strides), cfg.strides, cfg.k_set)
    lines = []
    for lab in assign_labels(anchors, gts):
        if lab.positive:
            a = lab.anchor
            lines.append(f"{a.level} {a.i} {a.j} {a.k_index} {formats.format_number(a.cx)} "
                         f"{formats.format_number(a.cy)} {formats.format_number(a.side)} {lab.matched_gt}\n")
    sys.stdout.write("".join(lines))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    if args.cases < 1:
        raise InputError("--cases must be at least 1")
    if not 0.0 <= args.noise <= 0.5:
        raise InputError("--noise must lie in [0, 0.5]")
    out = Path(args.out_dir)
    (out / "cls").mkdir(parents=True, exist_ok=True)
    params = SynthParams(strides=cfg.strides, k_set=cfg.k_set)
    gts: dict[str, list[Polygon]] = {}
    preds = []
    for n in range(args.cases):
        case = perturb(gen_case(cfg.seed + n, params), args.noise)
        gts[case.image_id] = case.gt_polygons
        preds.extend(case.masks)
        for level, (w, h) in enumerate(feature_sizes(*case.image_size, cfg.strides)):
            grid = np.zeros((h, w))
            for a in case.anchors:
                if a.level == level:
                    grid[a.j, a.i] = 1.0
            formats.write_scoregrid(out / "cls" / f"{case.image_id}_level{level}.sgrd",
                                    ScoreGrid(grid, cfg.strides[level]), binary=True)
    (out / "gt.txt").write_text(formats.format_annotations(gts))
    name = "segments.bin" if args.binary else "segments.txt"
    formats.write_segment_dump(out / name, preds, binary=args.binary)
    log.info("wrote %d cases, %d segments to %s", args.cases, len(preds), out)
    return EXIT_OK


def cmd_loss_check(args) -> int:
    res = gradient_check(seed=args.seed or 0)
    for key, value in res.items():
        print(f"{key} {value:.3e}")
    ok = (res["focal_grad_max_rel_err"] < GRADIENT_TOL
          and res["smooth_l1_grad_max_rel_err"] < GRADIENT_TOL
          and res["smooth_l1_value_jump"] <= 4 * np.finfo(float).eps
          and res["smooth_l1_grad_jump"] <= 4 * np.finfo(float).eps)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAILED


def _read_polygons(path: str) -> dict[str, list[Polygon]]:
    """Polygons from either an annotation or a detection file.

    A line is a detection when the token after the image id holds no comma.
    """
    text = Path(path).read_text()
    out: dict[str, list[Polygon]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 2)
        if len(parts) == 1:
            out.setdefault(parts[0], [])
        elif "," not in parts[1] and len(parts) == 3:
            got = formats.parse_detections(line)
            out.setdefault(parts[0], []).extend(p for _, p in got[parts[0]])
        else:
            got_a = formats.parse_annotations(line, "any")
            out.setdefault(parts[0], []).extend(got_a[parts[0]])
    return out


def cmd_iou(args) -> int:
    a, b = _read_polygons(args.a), _read_polygons(args.b)
    for image_id in list(a) + [k for k in b if k not in a]:
        pa, pb = a.get(image_id, []), b.get(image_id, [])
        print(f"# {image_id} {len(pa)} {len(pb)}")
        m = iou_matrix(pa, pb)
        for row in m:
            print(" ".join(f"{v:.6f}" for v in row))
    return EXIT_OK


COMMANDS = {
    "connect": cmd_connect,
    "evaluate": cmd_evaluate,
    "label-anchors": cmd_label_anchors,
    "synth": cmd_synth,
    "loss-check": cmd_loss_check,
    "iou": cmd_iou,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ConfigError, InputError, GeometryError, OSError) as exc:
        print(f"curveconnect {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
