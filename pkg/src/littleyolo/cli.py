"""Command-line interface: detect, anchors, eval, info, bench."""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import anchors as anchor_mod
from . import evaluate as eval_mod
from . import graph as graph_mod
from . import imaging, pipeline, weights
from .config import NetParams, Yolo, load_config, reference_config_path

IMAGE_SUFFIXES = (".ppm", ".png", ".jpg", ".jpeg", ".bmp")


def _load_graph(args, need_weights=True):
    cfg = args.cfg
    if cfg is None:
        cfg = reference_config_path(args.size or 416)
    specs = load_config(cfg)
    if args.size:
        net = specs[0]
        specs[0] = NetParams(width=args.size, height=args.size, channels=net.channels)
    g = graph_mod.build_graph(specs)
    if need_weights:
        if not args.weights:
            raise ValueError("--weights is required for this command")
        weights.load_weights_file(g, args.weights)
    return g


def _read_names(path) -> tuple[str, ...]:
    lines = Path(path).read_text().splitlines()
    names = tuple(n.strip() for n in lines if n.strip())
    if not names:
        raise ValueError(f"names file {path} is empty")
    return names


def _json_dump(obj, path):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


# --------------------------------------------------------------------- detect

def _detect_one(g, image_path, args, names):
    image = imaging.read_image(image_path)
    h, w = image.shape[:2]
    dets = pipeline.detect(g, imaging.to_chw_float(image),
                           conf_threshold=args.conf, nms_threshold=args.nms,
                           class_names=names)
    result = {
        "image": str(image_path),
        "width": w,
        "height": h,
        "detections": [pipeline.detection_to_dict(d) for d in dets],
    }
    return result, image, dets


def cmd_detect(args) -> int:
    g = _load_graph(args)
    if not g.yolo_layers:
        raise ValueError("config has no yolo heads; nothing to detect")
    names = _read_names(args.names) if args.names else None
    in_path = Path(args.input)
    if in_path.is_dir():
        images = sorted(p for p in in_path.iterdir()
                        if p.suffix.lower() in IMAGE_SUFFIXES)
        if not images:
            raise ValueError(f"no images found in {in_path}")
        if not args.output:
            raise ValueError("--output directory is required for directory input")
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)

        def run(p):
            result, image, dets = _detect_one(g, p, args, names)
            out_json = out_dir / (p.stem + ".json")
            _json_dump(result, out_json)
            if args.annotate:
                imaging.write_ppm(out_dir / (p.stem + ".annotated.ppm"),
                                  imaging.annotate(image, dets))
            return {"image": str(p), "output": str(out_json),
                    "num_detections": len(result["detections"])}

        if args.workers > 1:
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                rows = list(pool.map(run, images))
        else:
            rows = [run(p) for p in images]
        _json_dump({"results": rows}, out_dir / "index.json")
        print(f"processed {len(rows)} images -> {out_dir}")
        return 0

    result, image, dets = _detect_one(g, in_path, args, names)
    if args.output:
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        _json_dump(result, out_dir / (in_path.stem + ".json"))
        if args.annotate:
            imaging.write_ppm(out_dir / (in_path.stem + ".annotated.ppm"),
                              imaging.annotate(image, dets))
        print(f"wrote {out_dir / (in_path.stem + '.json')}")
    else:
        if args.annotate:
            raise ValueError("--annotate needs --output to hold the image")
        json.dump(result, sys.stdout, indent=2)
        print()
    return 0


# -------------------------------------------------------------------- anchors

def cmd_anchors(args) -> int:
    names = set(_read_names(args.names)) if args.names else None
    dims = anchor_mod.load_dims(args.input, names)
    if len(dims) == 0:
        raise ValueError(f"no usable boxes found in {args.input}")
    distance = {"iou": "one_minus_iou", "euclid": "euclidean"}[args.distance]
    anchor_set = anchor_mod.cluster_anchors(dims, k=args.k, distance=distance,
                                            seed=args.seed, restarts=args.restarts,
                                            net_w=args.size, net_h=args.size)
    norm_anchors = [(w / args.size, h / args.size) for w, h in anchor_set.anchors]
    score = anchor_mod.mean_iou_report(dims, norm_anchors)
    line = anchor_mod.anchors_line(anchor_set)
    print(f"anchors={line}")
    print(f"boxes: {len(dims)}   k: {args.k}   distance: {args.distance}   "
          f"seed: {args.seed}   net: {args.size}")
    print(f"mean best-anchor iou: {score:.4f}")
    for mask in anchor_set.masks:
        shown = ", ".join(f"{anchor_set.anchors[m][0]:.1f}x{anchor_set.anchors[m][1]:.1f}"
                          for m in mask)
        print(f"mask {list(mask)}: {shown}")
    if args.output:
        _json_dump({
            "anchors": [[w, h] for w, h in anchor_set.anchors],
            "masks": [list(m) for m in anchor_set.masks],
            "anchors_line": line,
            "mean_iou": score,
            "num_boxes": len(dims),
            "k": args.k,
            "distance": args.distance,
            "seed": args.seed,
            "restarts": args.restarts,
            "net_size": args.size,
        }, args.output)
    return 0


# ----------------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    corpus = eval_mod.EvalCorpus(
        ground_truths=eval_mod.load_ground_truth(args.gt),
        predictions=eval_mod.load_predictions(args.preds),
    )
    gt_ids, pred_ids = corpus.image_ids
    if gt_ids and pred_ids and not (gt_ids & pred_ids):
        print("warning: ground-truth and prediction image ids are disjoint",
              file=sys.stderr)
    report = eval_mod.evaluation_report(corpus, iou_threshold=args.iou,
                                        interpolation=args.interp)
    print(eval_mod.format_report(report))
    if args.output:
        _json_dump(report, args.output)
    return 0


# ----------------------------------------------------------------------- info

def cmd_info(args) -> int:
    g = _load_graph(args, need_weights=False)
    print(graph_mod.layer_table(g))
    params = graph_mod.param_count(g)
    size = graph_mod.model_bytes(g)
    print(f"\nlayers: {len(g.layers)}   params: {params:,}   "
          f"weights file: {size:,} bytes ({size / 1e6:.2f} MB)   "
          f"flops: {graph_mod.flops(g):.3f} B")
    if args.weights:
        weights.load_weights_file(g, args.weights)
        print(f"weights: loaded {os.path.getsize(args.weights):,} bytes, "
              f"images_seen={g.images_seen}")
    return 0


# ---------------------------------------------------------------------- bench

def cmd_bench(args) -> int:
    g = _load_graph(args)
    heads = [l for l in g.layers if isinstance(l.spec, Yolo)]
    image = imaging.to_chw_float(imaging.read_image(args.input))
    _, net_h, net_w = g.input_shape
    tensor_in, _ = pipeline.letterbox(image, net_w, net_h)

    def run_once():
        raw = graph_mod.forward(g, tensor_in)
        for layer in heads:
            pipeline.decode_yolo(raw[layer.index], layer.spec.anchors,
                                 layer.spec.mask, net_w, net_h, layer.spec.classes)

    run_once()  # warmup
    samples = []
    for _ in range(args.iters):
        t0 = time.perf_counter()
        run_once()
        samples.append((time.perf_counter() - t0) * 1000.0)
    mean_ms = statistics.fmean(samples)
    result = {
        "iters": args.iters,
        "mean_ms": mean_ms,
        "median_ms": statistics.median(samples),
        "fps": 1000.0 / mean_ms if mean_ms > 0 else 0.0,
    }
    json.dump(result, sys.stdout, indent=2)
    print()
    if args.output:
        _json_dump(result, args.output)
    return 0


# ----------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="littleyolo",
        description="CPU inference and evaluation toolkit for the "
                    "LittleYOLO-SPP vehicle detector")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, weights_required=False):
        p.add_argument("--cfg", help="network config file (default: shipped "
                                     "reference config)")
        p.add_argument("--weights", required=weights_required,
                       help="binary weights file")
        p.add_argument("--size", type=int, default=None,
                       help="override network input size")

    p = sub.add_parser("detect", help="run detection on an image or directory")
    add_common(p, weights_required=True)
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--output", help="output directory (required for directories)")
    p.add_argument("--conf", type=float, default=pipeline.DEFAULT_CONF_THRESHOLD,
                   help="confidence threshold (default 0.25)")
    p.add_argument("--nms", type=float, default=pipeline.DEFAULT_NMS_THRESHOLD,
                   help="NMS IoU threshold (default 0.45)")
    p.add_argument("--annotate", action="store_true",
                   help="also write images with boxes burned in")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads for directory input")
    p.add_argument("--names", help="file with one class name per line")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("anchors", help="cluster annotation boxes into anchors")
    p.add_argument("--input", required=True,
                   help="VOC XML directory or COCO JSON file")
    p.add_argument("--k", type=int, default=6, help="number of anchors (default 6)")
    p.add_argument("--size", type=int, default=416,
                   help="network input size anchors are scaled to (default 416)")
    p.add_argument("--seed", type=int, default=0, help="clustering seed (default 0)")
    p.add_argument("--restarts", type=int, default=10,
                   help="independent seedings, best kept (default 10)")
    p.add_argument("--distance", choices=("iou", "euclid"), default="iou",
                   help="cluster distance (default iou)")
    p.add_argument("--names", help="only cluster boxes of these classes")
    p.add_argument("--output", help="write a JSON report here")
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True,
                   help="VOC XML directory or flat text ground truth")
    p.add_argument("--preds", required=True,
                   help="detection JSON file/directory or flat text predictions")
    p.add_argument("--iou", type=float, default=0.5,
                   help="matching IoU threshold (default 0.5)")
    p.add_argument("--interp", choices=eval_mod.INTERPOLATIONS, default="all",
                   help="AP interpolation (default all-point)")
    p.add_argument("--output", help="write a JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("info", help="print the layer table and model totals")
    add_common(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("bench", help="time forward+decode on one image")
    add_common(p, weights_required=True)
    p.add_argument("--input", required=True, help="image file")
    p.add_argument("--iters", type=int, default=10,
                   help="timed iterations (default 10)")
    p.add_argument("--output", help="write the timing JSON here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
