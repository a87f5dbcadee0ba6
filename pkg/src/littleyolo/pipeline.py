"""Detection pipeline: letterbox -> forward -> decode -> filter -> NMS -> unletterbox.

Coordinates flow through three frames: original image pixels, network input
pixels (after aspect-preserving letterboxing), and back. Detections carry
corner-form boxes; confidence = objectness * class probability, with
independent logistic class probabilities (not a softmax).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .boxes import BBox, iou
from .config import Yolo
from .graph import NetworkGraph, forward
from .tensor import FLOAT, ShapeError

DEFAULT_CONF_THRESHOLD = 0.25
DEFAULT_NMS_THRESHOLD = 0.45

GRAY_FILL = 0.5

# default class-name tables by class count
CLASS_NAMES = {2: ("car", "bus"), 3: ("car", "bus", "truck")}


class AnchorSet(NamedTuple):
    """Anchor (w, h) pairs in network-input pixels plus per-head masks.

    masks are index tuples in detection-head order (coarse head first); they
    must be disjoint. For the reference networks the coarse 13x13 head takes
    the three largest anchors (3, 4, 5) and the fine 26x26 head the three
    smallest (0, 1, 2).
    """

    anchors: tuple[tuple[float, float], ...]
    masks: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class LetterboxTransform:
    scale: float
    pad_x: float
    pad_y: float
    orig_w: int
    orig_h: int


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    class_id: int
    class_name: str
    objectness: float
    class_prob: float
    confidence: float


def class_names_for(classes: int) -> tuple[str, ...]:
    return CLASS_NAMES.get(classes,
                           tuple(f"class_{i}" for i in range(classes)))


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ------------------------------------------------------------------ letterbox

def _resize_axis_indices(dst: int, src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel-center sampling grid for one axis
    coords = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo
    return lo, hi, frac


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of a (C, H, W) map, half-pixel convention."""
    c, h, w = x.shape
    ylo, yhi, yf = _resize_axis_indices(out_h, h)
    xlo, xhi, xf = _resize_axis_indices(out_w, w)
    x = x.astype(np.float64)
    rows = x[:, ylo, :] * (1 - yf)[None, :, None] + x[:, yhi, :] * yf[None, :, None]
    out = rows[:, :, xlo] * (1 - xf)[None, None, :] + rows[:, :, xhi] * xf[None, None, :]
    return out.astype(FLOAT)


def resize_nearest(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    c, h, w = x.shape
    ys = np.clip(((np.arange(out_h) + 0.5) * (h / out_h)).astype(np.int64), 0, h - 1)
    xs = np.clip(((np.arange(out_w) + 0.5) * (w / out_w)).astype(np.int64), 0, w - 1)
    return np.ascontiguousarray(x[:, ys][:, :, xs], dtype=FLOAT)


def letterbox(image: np.ndarray, net_w: int, net_h: int,
              resample: str = "bilinear") -> tuple[np.ndarray, LetterboxTransform]:
    """Aspect-preserving resize onto a gray canvas, centered.

    image: (3, H, W) float32 in [0, 1]. Returns the (3, net_h, net_w) network
    tensor and the transform mapping original coordinates to network pixels
    (x_net = x * scale + pad_x). The content is placed at integer offsets, so
    pads are integral and the transform inverts exactly.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"expected (3, H, W) image tensor, got {image.shape}")
    _, h, w = image.shape
    if h < 1 or w < 1 or net_w < 1 or net_h < 1:
        raise ShapeError(f"degenerate letterbox geometry: {w}x{h} -> {net_w}x{net_h}")
    scale = min(net_w / w, net_h / h)
    scaled_w = max(1, round(w * scale))
    scaled_h = max(1, round(h * scale))
    resize = resize_bilinear if resample == "bilinear" else resize_nearest
    if resample not in ("bilinear", "nearest"):
        raise ValueError(f"unknown resample mode {resample!r}")
    content = resize(image, scaled_h, scaled_w)
    pad_x = (net_w - scaled_w) // 2
    pad_y = (net_h - scaled_h) // 2
    canvas = np.full((3, net_h, net_w), GRAY_FILL, dtype=FLOAT)
    canvas[:, pad_y:pad_y + scaled_h, pad_x:pad_x + scaled_w] = content
    return canvas, LetterboxTransform(scale=scale, pad_x=float(pad_x),
                                      pad_y=float(pad_y), orig_w=w, orig_h=h)


def unletterbox(detections: list[Detection],
                transform: LetterboxTransform) -> list[Detection]:
    """Map network-frame boxes back to original image pixels, clamped to bounds."""
    out = []
    for det in detections:
        b = det.bbox
        x1 = (b.x1 - transform.pad_x) / transform.scale
        y1 = (b.y1 - transform.pad_y) / transform.scale
        x2 = (b.x2 - transform.pad_x) / transform.scale
        y2 = (b.y2 - transform.pad_y) / transform.scale
        box = BBox(min(max(x1, 0.0), transform.orig_w),
                   min(max(y1, 0.0), transform.orig_h),
                   min(max(x2, 0.0), transform.orig_w),
                   min(max(y2, 0.0), transform.orig_h))
        out.append(replace(det, bbox=box))
    return out


# --------------------------------------------------------------------- decode

@dataclass(frozen=True)
class RawDetections:
    """One head's decoded predictions, before thresholding.

    boxes: (N, 4) corner-form in network pixels; objectness: (N,);
    class_probs: (N, classes). Row order is (anchor slot, cell y, cell x).
    """

    boxes: np.ndarray
    objectness: np.ndarray
    class_probs: np.ndarray


def decode_yolo(raw: np.ndarray, anchors, mask, net_w: int, net_h: int,
                classes: int) -> RawDetections:
    """Decode one raw head output (len(mask)*(5+classes), gh, gw).

    Per anchor slot and cell: center = (sigmoid(txy) + cell) / grid * net,
    size = anchor * exp(twh), objectness and class probabilities logistic.
    """
    slots = len(mask)
    per = 5 + classes
    c, gh, gw = raw.shape
    if c != slots * per:
        raise ShapeError(f"head has {c} channels but {slots} anchors x "
                         f"(5 + {classes} classes) needs {slots * per}")
    r = raw.astype(np.float64).reshape(slots, per, gh, gw)
    cx = np.arange(gw, dtype=np.float64)[None, None, :]
    cy = np.arange(gh, dtype=np.float64)[None, :, None]
    bx = (_sigmoid(r[:, 0]) + cx) / gw * net_w
    by = (_sigmoid(r[:, 1]) + cy) / gh * net_h
    anchor_w = np.array([anchors[m][0] for m in mask])[:, None, None]
    anchor_h = np.array([anchors[m][1] for m in mask])[:, None, None]
    bw = anchor_w * np.exp(r[:, 2])
    bh = anchor_h * np.exp(r[:, 3])
    objectness = _sigmoid(r[:, 4]).reshape(-1)
    class_probs = _sigmoid(r[:, 5:]).transpose(0, 2, 3, 1).reshape(-1, classes)
    boxes = np.stack([bx - bw / 2, by - bh / 2, bx + bw / 2, by + bh / 2],
                     axis=-1).reshape(-1, 4)
    return RawDetections(boxes=boxes, objectness=objectness,
                         class_probs=class_probs)


def filter_confidence(raw: RawDetections, threshold: float = DEFAULT_CONF_THRESHOLD,
                      class_names: tuple[str, ...] | None = None) -> list[Detection]:
    """Keep predictions with objectness * max class probability > threshold,
    assigning the argmax class. Input row order is preserved."""
    classes = raw.class_probs.shape[1]
    names = class_names or class_names_for(classes)
    best = raw.class_probs.argmax(axis=1)
    best_prob = raw.class_probs[np.arange(len(best)), best]
    conf = raw.objectness * best_prob
    out = []
    for i in np.flatnonzero(conf > threshold):
        out.append(Detection(bbox=BBox(*raw.boxes[i]),
                             class_id=int(best[i]), class_name=names[best[i]],
                             objectness=float(raw.objectness[i]),
                             class_prob=float(best_prob[i]),
                             confidence=float(conf[i])))
    return out


# ------------------------------------------------------------------------ NMS

def nms(detections: list[Detection],
        iou_threshold: float = DEFAULT_NMS_THRESHOLD) -> list[Detection]:
    """Greedy per-class suppression.

    Repeatedly keep the highest-confidence remaining detection (ties broken
    by lower original index) and drop same-class detections whose IoU with it
    exceeds the threshold. Output is sorted by confidence descending.
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    keep: list[Detection] = []
    alive = [True] * len(detections)
    for pos, i in enumerate(order):
        if not alive[i]:
            continue
        det = detections[i]
        keep.append(det)
        for j in order[pos + 1:]:
            if alive[j] and detections[j].class_id == det.class_id:
                if iou(det.bbox, detections[j].bbox) > iou_threshold:
                    alive[j] = False
    return keep


# --------------------------------------------------------------------- detect

def detect(graph: NetworkGraph, image: np.ndarray,
           conf_threshold: float = DEFAULT_CONF_THRESHOLD,
           nms_threshold: float = DEFAULT_NMS_THRESHOLD,
           anchors: AnchorSet | None = None,
           class_names: tuple[str, ...] | None = None,
           resample: str = "bilinear") -> list[Detection]:
    """Full pipeline on one (3, H, W) float image in [0, 1].

    Anchors and masks come from the graph's yolo layers unless an AnchorSet
    override is given (its masks apply to heads in graph order). Returns
    detections in original-image pixel coordinates.
    """
    heads = [l for l in graph.layers if isinstance(l.spec, Yolo)]
    if not heads:
        raise ShapeError("graph has no yolo layers to decode")
    classes = heads[0].spec.classes
    if any(l.spec.classes != classes for l in heads):
        raise ShapeError("yolo layers disagree on class count")
    if anchors is not None and len(anchors.masks) != len(heads):
        raise ShapeError(f"anchor set has {len(anchors.masks)} masks for "
                         f"{len(heads)} heads")
    names = class_names or class_names_for(classes)

    _, net_h, net_w = graph.input_shape
    tensor_in, transform = letterbox(image, net_w, net_h, resample=resample)
    raw_heads = forward(graph, tensor_in)

    candidates: list[Detection] = []
    for head_idx, layer in enumerate(heads):
        spec = layer.spec
        if anchors is None:
            head_anchors, head_mask = spec.anchors, spec.mask
        else:
            head_anchors, head_mask = anchors.anchors, anchors.masks[head_idx]
        raw = decode_yolo(raw_heads[layer.index], head_anchors, head_mask,
                          net_w, net_h, classes)
        candidates.extend(filter_confidence(raw, conf_threshold, names))
    return unletterbox(nms(candidates, nms_threshold), transform)


def detection_to_dict(det: Detection) -> dict:
    return {
        "class_id": det.class_id,
        "class_name": det.class_name,
        "confidence": det.confidence,
        "objectness": det.objectness,
        "class_prob": det.class_prob,
        "bbox": {"x1": det.bbox.x1, "y1": det.bbox.y1,
                 "x2": det.bbox.x2, "y2": det.bbox.y2},
    }
