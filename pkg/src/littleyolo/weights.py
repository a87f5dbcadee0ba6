"""Binary weights container: load, save, and seeded random initialization.

Layout (all little-endian):
    int32 major, int32 minor, int32 revision, uint64 images_seen
    then, for every convolutional layer in graph order:
        bias[n]
        gamma[n], mean[n], var[n]        (only when the layer has batch-norm)
        weights[n * c_in * k * k]        (filter-major, then channel, row, col)
    as float32. The loader consumes the byte count implied by the graph
    exactly; anything else is a format error. Files with version
    major*10 + minor < 2 use a different counter width and are rejected.
"""

from __future__ import annotations

import struct

import numpy as np

from .rng import uniform_stream
from .tensor import BN_EPSILON, FLOAT, BatchNorm, ConvParams

HEADER_BYTES = 20
MAJOR, MINOR, REVISION = 0, 2, 0

INIT_LOW, INIT_HIGH = -0.1, 0.1


class WeightsError(ValueError):
    """The byte stream does not match the header format or the graph."""


def _conv_layers(graph):
    from .config import Convolutional  # local import avoids a cycle at import time
    for layer in graph.layers:
        if isinstance(layer.spec, Convolutional):
            yield layer


def layer_param_count(spec, in_channels: int) -> int:
    """Stored reals for one conv layer: weights + bias (+ gamma/mean/var)."""
    n = spec.filters
    count = n * in_channels * spec.size * spec.size + n
    if spec.batch_normalize:
        count += 3 * n
    return count


def expected_file_size(graph) -> int:
    """Exact weights-file size in bytes: header + 4 bytes per stored real."""
    total = sum(layer_param_count(layer.spec, layer.in_channels)
                for layer in _conv_layers(graph))
    return HEADER_BYTES + 4 * total


def save_weights(graph) -> bytes:
    """Serialize a populated graph's parameters. Inverse of load_weights."""
    chunks = [struct.pack("<iiiQ", MAJOR, MINOR, REVISION, graph.images_seen)]
    for layer in _conv_layers(graph):
        p = layer.params
        if p is None:
            raise WeightsError(f"layer {layer.index} has no parameters; "
                               "populate the graph before saving")
        chunks.append(p.bias.astype("<f4").tobytes())
        if p.batch_norm is not None:
            chunks.append(p.batch_norm.gamma.astype("<f4").tobytes())
            chunks.append(p.batch_norm.mean.astype("<f4").tobytes())
            chunks.append(p.batch_norm.var.astype("<f4").tobytes())
        chunks.append(p.weights.astype("<f4").tobytes())
    return b"".join(chunks)


def load_weights(graph, data: bytes):
    """Populate graph conv layers from a weights byte stream.

    The stream must contain exactly the parameters the graph calls for;
    truncated or trailing bytes raise WeightsError naming both counts.
    """
    if len(data) < HEADER_BYTES:
        raise WeightsError(f"stream has {len(data)} bytes, shorter than the "
                           f"{HEADER_BYTES}-byte header")
    major, minor, revision, seen = struct.unpack_from("<iiiQ", data, 0)
    if major * 10 + minor < 2:
        raise WeightsError(f"unsupported weights version {major}.{minor} "
                           "(versions below 0.2 use a narrower image counter)")
    expected = expected_file_size(graph)
    if len(data) != expected:
        raise WeightsError(f"graph calls for {expected} bytes but the stream "
                           f"has {len(data)}")
    floats = np.frombuffer(data, dtype="<f4", offset=HEADER_BYTES)
    pos = 0

    def take(count: int) -> np.ndarray:
        nonlocal pos
        out = floats[pos:pos + count]
        pos += count
        return np.array(out, dtype=FLOAT)

    for layer in _conv_layers(graph):
        spec = layer.spec
        n, c, k = spec.filters, layer.in_channels, spec.size
        bias = take(n)
        bn = None
        if spec.batch_normalize:
            bn = BatchNorm(gamma=take(n), mean=take(n), var=take(n),
                           epsilon=BN_EPSILON)
        weights = take(n * c * k * k).reshape(n, c, k, k)
        layer.params = ConvParams(weights=weights, bias=bias,
                                  stride=spec.stride, padding=spec.padding,
                                  batch_norm=bn)
    graph.images_seen = seen
    return graph


def init_random(graph, seed: int):
    """Seeded deterministic initialization.

    Weights are uniform in [-0.1, 0.1) drawn from one splitmix64 stream in
    graph order (flat filter-major order within each layer); bias = 0,
    gamma = 1, mean = 0, var = 1. Bit-identical for a given seed everywhere.
    """
    counts = [(layer, layer.spec.filters * layer.in_channels * layer.spec.size ** 2)
              for layer in _conv_layers(graph)]
    draws = uniform_stream(seed, sum(c for _, c in counts), INIT_LOW, INIT_HIGH)
    pos = 0
    for layer, count in counts:
        spec = layer.spec
        n, c, k = spec.filters, layer.in_channels, spec.size
        weights = draws[pos:pos + count].astype(FLOAT).reshape(n, c, k, k)
        pos += count
        bn = None
        if spec.batch_normalize:
            bn = BatchNorm(gamma=np.ones(n, dtype=FLOAT),
                           mean=np.zeros(n, dtype=FLOAT),
                           var=np.ones(n, dtype=FLOAT), epsilon=BN_EPSILON)
        layer.params = ConvParams(weights=weights, bias=np.zeros(n, dtype=FLOAT),
                                  stride=spec.stride, padding=spec.padding,
                                  batch_norm=bn)
    graph.images_seen = 0
    return graph


def load_weights_file(graph, path):
    with open(path, "rb") as fh:
        return load_weights(graph, fh.read())


def save_weights_file(graph, path) -> int:
    data = save_weights(graph)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)
