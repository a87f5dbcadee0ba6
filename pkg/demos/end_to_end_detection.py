"""Whole pipeline, no downloads: craft weights that detect a red square.

We define a four-conv toy network in the config dialect, hand-pick weights
so that exactly one grid cell fires when it sees saturated red, render a
synthetic scene, and run it through image IO -> letterbox -> forward ->
decode -> NMS -> annotated output. Every byte is generated right here.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

import littleyolo as ly
from littleyolo.cli import main as cli_main
from littleyolo.imaging import decode_ppm, encode_ppm, to_chw_float
from littleyolo.tensor import ConvParams

TOY_CFG = """\
[net]
width=32
height=32
channels=3

[convolutional]
filters=1
size=1
stride=2
activation=linear

[convolutional]
filters=1
size=1
stride=2
activation=linear

[convolutional]
filters=1
size=1
stride=2
activation=linear

[convolutional]
filters=14
size=1
stride=1
activation=linear

[yolo]
mask=2,3
anchors=4,4, 6,6, 8,8, 16,16
classes=2
ignore_thresh=0.5

[route]
layers=2

[upsample]
stride=2

[convolutional]
filters=14
size=1
stride=1
activation=linear

[yolo]
mask=0,1
anchors=4,4, 6,6, 8,8, 16,16
classes=2
ignore_thresh=0.5
"""


def plant_weights(graph):
    """Make 4x4-grid cell (y, x) respond to red at input pixel (8y, 8x).

    The three stride-2 1x1 convs pass the red channel through, so the head
    sees raw red values. Its conv maps red r to objectness/class-0 logits
    18r - 9: +9 on saturated red, -9 on anything dark. The second head gets
    all-zero weights and -9 logits so it stays quiet.
    """
    red = np.zeros((1, 3, 1, 1), np.float32)
    red[0, 0] = 1.0
    graph.layers[0].params = ConvParams(weights=red, bias=np.zeros(1, np.float32),
                                        stride=2, padding=0)
    passthrough = np.ones((1, 1, 1, 1), np.float32)
    for i in (1, 2):
        graph.layers[i].params = ConvParams(weights=passthrough.copy(),
                                            bias=np.zeros(1, np.float32),
                                            stride=2, padding=0)
    head = np.zeros((14, 1, 1, 1), np.float32)
    bias = np.zeros(14, np.float32)
    head[4, 0] = head[5, 0] = 18.0          # slot-0 objectness and class 0
    bias[[4, 5, 6, 11, 12, 13]] = -9.0      # everything else: logit -9
    graph.layers[3].params = ConvParams(weights=head, bias=bias,
                                        stride=1, padding=0)
    quiet = np.zeros((14, 1, 1, 1), np.float32)
    qbias = np.zeros(14, np.float32)
    qbias[[4, 5, 6, 11, 12, 13]] = -9.0
    graph.layers[7].params = ConvParams(weights=quiet, bias=qbias,
                                        stride=1, padding=0)
    return graph


def render_scene():
    """32x32 night scene with one red square at rows 14-18, cols 6-10."""
    rng = np.random.default_rng(42)
    scene = rng.integers(0, 40, (32, 32, 3)).astype(np.uint8)
    scene[14:19, 6:11] = (255, 0, 0)
    return scene


def main():
    specs = ly.lower_to_specs(ly.parse_config(TOY_CFG))
    graph = plant_weights(ly.build_graph(specs))
    scene = render_scene()

    image = to_chw_float(scene)
    detections = ly.detect(graph, image)
    print(f"library path: {len(detections)} detection(s)")
    for d in detections:
        print(f"  {d.class_name}  confidence {d.confidence:.3f}  "
              f"box ({d.bbox.x1:.0f}, {d.bbox.y1:.0f}) -- "
              f"({d.bbox.x2:.0f}, {d.bbox.y2:.0f})")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "toy.cfg").write_text(TOY_CFG)
        ly.save_weights_file(graph, tmp / "toy.weights")
        (tmp / "scene.ppm").write_bytes(encode_ppm(scene))

        print("\nsame thing through the CLI:")
        cli_main(["detect", "--cfg", str(tmp / "toy.cfg"),
                  "--weights", str(tmp / "toy.weights"),
                  "--input", str(tmp / "scene.ppm"),
                  "--output", str(tmp), "--annotate"])
        doc = json.loads((tmp / "scene.json").read_text())
        print(json.dumps(doc, indent=2))

        out = Path("scene.annotated.ppm")
        out.write_bytes((tmp / "scene.annotated.ppm").read_bytes())
        boxed = decode_ppm(out.read_bytes())
        print(f"\nannotated scene written to ./{out} "
              f"({boxed.shape[1]}x{boxed.shape[0]} PPM)")

    # Sanity: the detector localized the square we drew.
    assert len(detections) == 1 and detections[0].class_name == "car"


if __name__ == "__main__":
    main()
