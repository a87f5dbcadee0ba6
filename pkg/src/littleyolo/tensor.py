"""Feature maps and the network kernels that act on them.

A feature map is a numpy array of shape (channels, height, width), float32,
C-contiguous, so the flat buffer is channel-major: index = c*H*W + y*W + x.
There is no batch dimension. Every kernel here is a pure function of its
inputs and runs on the CPU.

Convolution accumulates in float64 (im2col + BLAS matmul) and casts the
result back to float32, which keeps it comfortably inside the 1e-5 relative
tolerance against a direct-definition oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FLOAT = np.float32

ACTIVATIONS = ("linear", "leaky", "mish")

BN_EPSILON = 1e-6


class ShapeError(ValueError):
    """A kernel was handed tensors whose shapes cannot be combined."""


def _check_chw(x: np.ndarray, name: str = "input") -> None:
    if not isinstance(x, np.ndarray) or x.ndim != 3:
        raise ShapeError(f"{name} must be a (channels, height, width) array, "
                         f"got {getattr(x, 'shape', type(x))}")


@dataclass(frozen=True)
class BatchNorm:
    """Per-channel batch-norm statistics applied at inference time."""

    gamma: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    epsilon: float = BN_EPSILON


@dataclass(frozen=True)
class ConvParams:
    """One convolution's learned parameters plus its geometry.

    weights has shape (filters, in_channels, size, size); its flat order is
    filter-major, then input channel, then kernel row, then kernel column.
    When batch_norm is present the layer computes
        y = gamma * (conv(x) - mean) / sqrt(var + eps) + bias
    i.e. bias is added after normalization.
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0
    batch_norm: BatchNorm | None = None

    def __post_init__(self):
        w = self.weights
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeError(f"weights must be (n, c_in, k, k), got {w.shape}")
        n = w.shape[0]
        if self.bias.shape != (n,):
            raise ShapeError(f"bias must have shape ({n},), got {self.bias.shape}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0 or self.padding > self.size:
            raise ValueError(f"padding must be in [0, size], got {self.padding} "
                             f"for size {self.size}")
        bn = self.batch_norm
        if bn is not None:
            for field in ("gamma", "mean", "var"):
                arr = getattr(bn, field)
                if arr.shape != (n,):
                    raise ShapeError(f"batch_norm.{field} must have shape ({n},), "
                                     f"got {arr.shape}")

    @property
    def filters(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[2]


def conv_output_size(extent: int, size: int, stride: int, padding: int) -> int:
    """Output extent of a convolution: floor((extent + 2p - k) / s) + 1."""
    return (extent + 2 * padding - size) // stride + 1


def conv2d(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """2-D cross-correlation with zero padding, plus batch-norm and bias.

    x: (c_in, H, W) float32. Returns (filters, out_h, out_w) float32.
    No activation is applied here.
    """
    _check_chw(x)
    c_in, h, w = x.shape
    if c_in != params.in_channels:
        raise ShapeError(f"input has {c_in} channels but weights expect "
                         f"{params.in_channels}")
    k, s, p = params.size, params.stride, params.padding
    oh = conv_output_size(h, k, s, p)
    ow = conv_output_size(w, k, s, p)
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel {k}x{k} (pad {p}) does not fit input {h}x{w}")

    if k == 1 and p == 0:
        cols = x[:, ::s, ::s].reshape(c_in, oh * ow).astype(np.float64)
    else:
        padded = np.pad(x, ((0, 0), (p, p), (p, p)))
        windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))
        windows = windows[:, ::s, ::s]  # (c_in, oh, ow, k, k)
        cols = windows.transpose(0, 3, 4, 1, 2).reshape(c_in * k * k, oh * ow)
        cols = cols.astype(np.float64)

    flat_w = params.weights.reshape(params.filters, c_in * k * k).astype(np.float64)
    out = flat_w @ cols

    bn = params.batch_norm
    bias = params.bias.astype(np.float64)[:, None]
    if bn is not None:
        scale = bn.gamma.astype(np.float64) / np.sqrt(bn.var.astype(np.float64) + bn.epsilon)
        out = out * scale[:, None] + (bias - bn.mean.astype(np.float64)[:, None] * scale[:, None])
    else:
        out = out + bias
    return out.reshape(params.filters, oh, ow).astype(FLOAT)


def maxpool(x: np.ndarray, size: int, stride: int, padding: int) -> np.ndarray:
    """Max pooling with -inf padding, so padded positions are never selected.

    With stride 1 and padding size//2 the spatial shape is preserved, which is
    what the spatial-pyramid block relies on.
    """
    _check_chw(x)
    if size < 1 or stride < 1:
        raise ValueError(f"size and stride must be >= 1, got {size}, {stride}")
    if padding < 0 or padding >= size:
        # padding >= size would admit all-padding windows and emit -inf
        raise ShapeError(f"padding must be in [0, size), got {padding} for size {size}")
    c, h, w = x.shape
    oh = conv_output_size(h, size, stride, padding)
    ow = conv_output_size(w, size, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"window {size}x{size} (pad {padding}) larger than input {h}x{w}")
    padded = np.full((c, h + 2 * padding, w + 2 * padding), -np.inf, dtype=x.dtype)
    padded[:, padding:padding + h, padding:padding + w] = x
    out = np.full((c, oh, ow), -np.inf, dtype=x.dtype)
    for dy in range(size):
        for dx in range(size):
            np.maximum(out, padded[:, dy:dy + oh * stride:stride, dx:dx + ow * stride:stride], out=out)
    return out


def upsample_nearest(x: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbor upsampling: each pixel becomes a factor x factor block."""
    _check_chw(x)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    return x.repeat(factor, axis=1).repeat(factor, axis=2)


def concat_channels(inputs: list[np.ndarray]) -> np.ndarray:
    """Concatenate feature maps along the channel axis, in input order."""
    if not inputs:
        raise ShapeError("concat_channels needs at least one input")
    for t in inputs:
        _check_chw(t)
    spatial = {t.shape[1:] for t in inputs}
    if len(spatial) != 1:
        raise ShapeError(f"concat inputs disagree on spatial shape: "
                         f"{[t.shape for t in inputs]}")
    return np.concatenate(inputs, axis=0)


def shortcut_add(current: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Residual add with the min-channel rule.

    Channels 0..min(C_cur, C_skip) are elementwise sums; any remaining
    channels of `current` are copied unchanged. Output shape equals
    current.shape, so spatial shapes must match.
    """
    _check_chw(current, "current")
    _check_chw(skip, "skip")
    if current.shape[1:] != skip.shape[1:]:
        raise ShapeError(f"shortcut spatial mismatch: {current.shape} vs {skip.shape}")
    out = current.copy()
    m = min(current.shape[0], skip.shape[0])
    out[:m] += skip[:m]
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    # For x > 20, softplus(x) - x < 3e-9, far below float32 resolution there.
    safe = np.minimum(x, x.dtype.type(20.0))
    return np.where(x > 20.0, x, np.log1p(np.exp(safe)))


def mish(x: np.ndarray) -> np.ndarray:
    """mish(x) = x * tanh(softplus(x)), overflow-safe, dtype-preserving."""
    x = np.asarray(x)
    return x * np.tanh(_softplus(x))


def leaky_relu(x: np.ndarray) -> np.ndarray:
    """max(x, 0.1*x): the conventional darknet leaky slope."""
    x = np.asarray(x)
    return np.where(x > 0, x, x.dtype.type(0.1) * x)


def activate(x: np.ndarray, kind: str) -> np.ndarray:
    """Apply a named activation elementwise. kind is one of ACTIVATIONS."""
    if kind == "linear":
        return np.asarray(x).copy()
    if kind == "leaky":
        return leaky_relu(x)
    if kind == "mish":
        return mish(x)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
