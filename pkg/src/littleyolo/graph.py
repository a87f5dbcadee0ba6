"""Network graph: build from layer specs, infer shapes, run the forward pass.

build_graph resolves every layer's inputs and output shape once, up front;
forward then just executes layers in order. Shapes are (channels, height,
width); layer index -1 denotes the network input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .config import (Convolutional, LayerSpec, Maxpool, NetParams, Route,
                     Shortcut, Upsample, Yolo)
from .tensor import FLOAT, ShapeError, conv_output_size

NET_INPUT = -1


class GraphError(ValueError):
    """A layer spec cannot be wired into a consistent graph."""


@dataclass
class Layer:
    index: int
    spec: LayerSpec
    inputs: tuple[int, ...]
    in_channels: int
    out_shape: tuple[int, int, int]
    params: tensor.ConvParams | None = None


@dataclass
class NetworkGraph:
    input_shape: tuple[int, int, int]  # (channels, height, width)
    layers: list[Layer] = field(default_factory=list)
    images_seen: int = 0

    @property
    def yolo_layers(self) -> list[Layer]:
        return [l for l in self.layers if isinstance(l.spec, Yolo)]

    def is_populated(self) -> bool:
        return all(l.params is not None for l in self.layers
                   if isinstance(l.spec, Convolutional))


def build_graph(specs: list[NetParams | LayerSpec],
                input_shape: tuple[int, int, int] | None = None) -> NetworkGraph:
    """Wire lowered specs into a shape-checked graph.

    specs normally starts with NetParams (as lower_to_specs produces);
    input_shape overrides it when given. Conv parameters start empty; use
    weights.load_weights or weights.init_random to populate them.
    """
    layer_specs = list(specs)
    if layer_specs and isinstance(layer_specs[0], NetParams):
        net = layer_specs.pop(0)
        if input_shape is None:
            input_shape = (net.channels, net.height, net.width)
    if input_shape is None:
        raise GraphError("no NetParams spec and no explicit input_shape")

    graph = NetworkGraph(input_shape=input_shape)
    shapes: list[tuple[int, int, int]] = []  # per-layer output shapes

    def shape_of(ref: int) -> tuple[int, int, int]:
        return input_shape if ref == NET_INPUT else shapes[ref]

    for i, spec in enumerate(layer_specs):
        prev = i - 1 if i > 0 else NET_INPUT
        if isinstance(spec, Convolutional):
            inputs = (prev,)
            c, h, w = shape_of(prev)
            oh = conv_output_size(h, spec.size, spec.stride, spec.padding)
            ow = conv_output_size(w, spec.size, spec.stride, spec.padding)
            if oh < 1 or ow < 1:
                raise GraphError(f"layer {i}: conv {spec.size}x{spec.size} does not "
                                 f"fit input {h}x{w}")
            out = (spec.filters, oh, ow)
            in_channels = c
        elif isinstance(spec, Maxpool):
            inputs = (prev,)
            c, h, w = shape_of(prev)
            oh = conv_output_size(h, spec.size, spec.stride, spec.padding)
            ow = conv_output_size(w, spec.size, spec.stride, spec.padding)
            if oh < 1 or ow < 1:
                raise GraphError(f"layer {i}: pool window {spec.size} larger than "
                                 f"input {h}x{w} with padding {spec.padding}")
            out = (c, oh, ow)
            in_channels = c
        elif isinstance(spec, Route):
            inputs = spec.layers
            if any(ref < 0 or ref >= i for ref in inputs):
                raise GraphError(f"layer {i}: route references {inputs} must point "
                                 "at earlier layers")
            srcs = [shape_of(r) for r in inputs]
            spatial = {s[1:] for s in srcs}
            if len(spatial) != 1:
                raise GraphError(f"layer {i}: route sources disagree on spatial "
                                 f"shape: {srcs}")
            out = (sum(s[0] for s in srcs),) + srcs[0][1:]
            in_channels = out[0]
        elif isinstance(spec, Shortcut):
            if spec.from_layer < 0 or spec.from_layer >= i:
                raise GraphError(f"layer {i}: shortcut from {spec.from_layer} must "
                                 "point at an earlier layer")
            inputs = (prev, spec.from_layer)
            cur, skip = shape_of(prev), shape_of(spec.from_layer)
            if cur[1:] != skip[1:]:
                raise GraphError(f"layer {i}: shortcut spatial mismatch "
                                 f"{cur} vs {skip}")
            out = cur
            in_channels = cur[0]
        elif isinstance(spec, Upsample):
            inputs = (prev,)
            c, h, w = shape_of(prev)
            out = (c, h * spec.stride, w * spec.stride)
            in_channels = c
        elif isinstance(spec, Yolo):
            inputs = (prev,)
            c, h, w = shape_of(prev)
            want = len(spec.mask) * (5 + spec.classes)
            if c != want:
                raise GraphError(f"layer {i}: yolo expects {want} input channels "
                                 f"({len(spec.mask)} anchors x (5 + {spec.classes} "
                                 f"classes)) but gets {c}")
            out = (c, h, w)
            in_channels = c
        else:
            raise GraphError(f"layer {i}: unsupported spec {type(spec).__name__}")
        shapes.append(out)
        graph.layers.append(Layer(index=i, spec=spec, inputs=inputs,
                                  in_channels=in_channels, out_shape=out))

    _check_sinks(graph)
    return graph


def _check_sinks(graph: NetworkGraph) -> None:
    """When detection heads exist, they are exactly the graph's sinks."""
    if not graph.yolo_layers:
        return
    consumed = {ref for layer in graph.layers for ref in layer.inputs if ref >= 0}
    for layer in graph.layers:
        is_yolo = isinstance(layer.spec, Yolo)
        if is_yolo and layer.index in consumed:
            raise GraphError(f"layer {layer.index}: yolo output cannot feed "
                             "another layer")
        if not is_yolo and layer.index not in consumed:
            raise GraphError(f"layer {layer.index}: dead layer; only yolo layers "
                             "may be unconsumed")


def forward(graph: NetworkGraph, x: np.ndarray) -> dict[int, np.ndarray]:
    """Run the network; returns {yolo layer index: raw head output}.

    Raw head outputs have shape (len(mask)*(5+classes), grid_h, grid_w) and
    are passed through unchanged by the yolo layers.
    """
    if x.shape != graph.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match network input "
                         f"{graph.input_shape}")
    if not graph.is_populated():
        raise GraphError("graph has unpopulated conv layers; load or init weights")
    x = np.ascontiguousarray(x, dtype=FLOAT)
    outputs: list[np.ndarray] = []
    heads: dict[int, np.ndarray] = {}
    for layer in graph.layers:
        spec = layer.spec
        src = [x if r == NET_INPUT else outputs[r] for r in layer.inputs]
        if isinstance(spec, Convolutional):
            out = tensor.activate(tensor.conv2d(src[0], layer.params), spec.activation)
        elif isinstance(spec, Maxpool):
            out = tensor.maxpool(src[0], spec.size, spec.stride, spec.padding)
        elif isinstance(spec, Route):
            out = tensor.concat_channels(src)
        elif isinstance(spec, Shortcut):
            out = tensor.activate(tensor.shortcut_add(src[0], src[1]), spec.activation)
        elif isinstance(spec, Upsample):
            out = tensor.upsample_nearest(src[0], spec.stride)
        else:  # Yolo: passthrough
            out = src[0]
            heads[layer.index] = out
        assert out.shape == layer.out_shape, \
            f"layer {layer.index}: got {out.shape}, inferred {layer.out_shape}"
        outputs.append(out)
    return heads


# ----------------------------------------------------------------- reporting

def param_count(graph: NetworkGraph) -> int:
    """Total stored reals: conv weights + biases + batch-norm triples."""
    from .weights import layer_param_count
    return sum(layer_param_count(l.spec, l.in_channels) for l in graph.layers
               if isinstance(l.spec, Convolutional))


def model_bytes(graph: NetworkGraph) -> int:
    """Size of the serialized weights file: 20-byte header + 4 per real."""
    from .weights import expected_file_size
    return expected_file_size(graph)


def flops(graph: NetworkGraph) -> float:
    """Multiply-add work of the conv layers, in units of 1e9.

    Per conv: 2 * k^2 * c_in * filters * out_h * out_w.
    """
    total = 0
    for l in graph.layers:
        if isinstance(l.spec, Convolutional):
            _, oh, ow = l.out_shape
            total += 2 * l.spec.size ** 2 * l.in_channels * l.spec.filters * oh * ow
    return total / 1e9


def layer_table(graph: NetworkGraph) -> str:
    """Human-readable per-layer table: index, type, filters, size/stride, output."""
    rows = [f"{'idx':>3}  {'type':<13} {'filters':>7}  {'size/stride':>11}  output"]
    for l in graph.layers:
        spec = l.spec
        name = type(spec).__name__.lower()
        filt = size = ""
        if isinstance(spec, Convolutional):
            filt = str(spec.filters)
            size = f"{spec.size}x{spec.size}/{spec.stride}"
        elif isinstance(spec, Maxpool):
            size = f"{spec.size}x{spec.size}/{spec.stride}"
        elif isinstance(spec, Upsample):
            size = f"x{spec.stride}"
        elif isinstance(spec, Route):
            filt = ",".join(str(r) for r in spec.layers)
        elif isinstance(spec, Shortcut):
            filt = str(spec.from_layer)
        c, h, w = l.out_shape
        rows.append(f"{l.index:>3}  {name:<13} {filt:>7}  {size:>11}  {c} x {h} x {w}")
    return "\n".join(rows)
