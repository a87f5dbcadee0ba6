"""Run the full forward pass on a synthetic image and decode the heads.

Weights are seeded at random, so the detections are noise -- the point is
to watch tensors move through the graph: 416x416x3 in, two YOLO heads out,
then grid decoding back into image-space boxes.
"""

import time

import numpy as np

import littleyolo as ly
from littleyolo.graph import forward
from littleyolo.pipeline import decode_yolo


def main():
    graph = ly.build_graph(ly.load_config(ly.reference_config_path(416)))
    ly.init_random(graph, seed=7)

    rng = np.random.default_rng(0)
    image = rng.uniform(0, 1, (3, 416, 416)).astype(np.float32)

    t0 = time.perf_counter()
    heads = forward(graph, image)
    dt = time.perf_counter() - t0

    print(f"forward pass: {dt * 1000:.0f} ms on this machine")
    for index, tensor in heads.items():
        c, h, w = tensor.shape
        print(f"  head at layer {index}: {c} x {h} x {w} "
              f"({h}x{w} grid, 3 anchors x (4 box + 1 obj + 2 classes))")

    # Decode one head: every grid cell x anchor slot becomes a candidate
    # box. With random weights the exp() size terms produce some absurdly
    # large boxes -- the numbers only become meaningful after training.
    index, tensor = next(iter(heads.items()))
    yolo = graph.layers[index].spec
    raw = decode_yolo(tensor, yolo.anchors, yolo.mask, net_w=416, net_h=416,
                      classes=yolo.classes)
    widths = raw.boxes[:, 2] - raw.boxes[:, 0]
    print(f"\nhead {index} decodes to {len(raw.objectness)} candidate boxes "
          f"(13 x 13 cells x 3 anchor slots)")
    print(f"objectness spans {raw.objectness.min():.3f} -- "
          f"{raw.objectness.max():.3f}; median box width {np.median(widths):.3g} px")

    detections = ly.detect(graph, image)
    print(f"\nfull pipeline (filtering + NMS) keeps {len(detections)} boxes; "
          f"with untrained weights these are pure noise:")
    for d in detections[:3]:
        print(f"  {d.class_name:<6} confidence {d.confidence:.3f}  "
              f"({d.bbox.x1:.0f}, {d.bbox.y1:.0f}) -- "
              f"({d.bbox.x2:.0f}, {d.bbox.y2:.0f})")


if __name__ == "__main__":
    main()
