"""Functional model of a convolutional spiking network.

Integrate-and-fire neurons without leak, reset by subtraction, binary spikes,
spike-triggered convolution.  All tensors are float32; spike tensors are bool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, NumericDomainError

__all__ = [
    "DTYPE",
    "LayerSpec",
    "NetworkSpec",
    "SpikeTrain",
    "NeuronState",
    "lif_step",
    "conv_dv",
    "layer_forward",
    "network_forward",
    "rate_encode",
]

DTYPE = np.float32
KINDS = ("conv", "dense")


def _out_side(side: int, kernel: int, pad: int, stride: int) -> int:
    span = side - kernel + 2 * pad
    if span < 0:
        raise ConfigError(
            f"kernel {kernel} with pad {pad} does not fit an input side of {side}"
        )
    return span // stride + 1


@dataclass(eq=False)
class LayerSpec:
    """One spiking layer.

    ``weights`` is stored as ``(M, C, R, R)`` float32 in every case; a dense
    layer is a 1x1 convolution over a 1x1 map, so its ``(M, C)`` matrix is
    reshaped on construction.
    """

    kind: str
    in_channels: int
    out_channels: int
    kernel_size: int
    in_height: int
    in_width: int
    weights: np.ndarray
    bias: Optional[np.ndarray] = None
    pad: int = 0
    stride: int = 1
    v_th: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        for name in ("in_channels", "out_channels", "kernel_size", "in_height", "in_width", "stride"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.kind == "dense" and (self.kernel_size, self.in_height, self.in_width, self.pad) != (1, 1, 1, 0):
            raise ConfigError("dense layers must have R = H = W = 1 and pad = 0")
        if not 0 <= self.pad <= self.kernel_size - 1:
            raise ConfigError(f"pad must lie in [0, R-1] = [0, {self.kernel_size - 1}], got {self.pad}")
        if not (math.isfinite(self.v_th) and self.v_th > 0):
            raise ConfigError(f"threshold must be finite and > 0, got {self.v_th}")
        self.v_th = float(self.v_th)

        M, C, R = self.out_channels, self.in_channels, self.kernel_size
        w = np.ascontiguousarray(self.weights, dtype=DTYPE)
        if self.kind == "dense" and w.shape == (M, C):
            w = w.reshape(M, C, 1, 1)
        if w.shape != (M, C, R, R):
            raise ConfigError(f"weights shape {w.shape} != expected {(M, C, R, R)}")
        if not np.isfinite(w).all():
            raise NumericDomainError("weights contain non-finite values")
        self.weights = w

        b = np.zeros(M, dtype=DTYPE) if self.bias is None else np.ascontiguousarray(self.bias, dtype=DTYPE).reshape(-1)
        if b.shape != (M,):
            raise ConfigError(f"bias length {b.size} != out_channels {M}")
        if not np.isfinite(b).all():
            raise NumericDomainError("bias contains non-finite values")
        self.bias = b
        # validates the geometry
        _ = self.out_height, self.out_width

    @property
    def out_height(self) -> int:
        return _out_side(self.in_height, self.kernel_size, self.pad, self.stride)

    @property
    def out_width(self) -> int:
        return _out_side(self.in_width, self.kernel_size, self.pad, self.stride)

    @property
    def in_shape(self) -> tuple:
        return (self.in_channels, self.in_height, self.in_width)

    @property
    def out_shape(self) -> tuple:
        return (self.out_channels, self.out_height, self.out_width)

    @property
    def fully_padded(self) -> bool:
        return self.pad == self.kernel_size - 1 and self.stride == 1

    def replace(self, **changes) -> "LayerSpec":
        fields_ = dict(
            kind=self.kind,
            in_channels=self.in_channels,
            out_channels=self.out_channels,
            kernel_size=self.kernel_size,
            in_height=self.in_height,
            in_width=self.in_width,
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            pad=self.pad,
            stride=self.stride,
            v_th=self.v_th,
        )
        fields_.update(changes)
        return LayerSpec(**fields_)

    def __eq__(self, other):
        if not isinstance(other, LayerSpec):
            return NotImplemented
        same_meta = all(
            getattr(self, k) == getattr(other, k)
            for k in ("kind", "in_channels", "out_channels", "kernel_size", "in_height", "in_width", "pad", "stride", "v_th")
        )
        return (
            same_meta
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )


def _feeds(prev: LayerSpec, layer: LayerSpec) -> bool:
    if layer.in_shape == prev.out_shape:
        return True
    # conv -> dense flattens the feature map
    return layer.kind == "dense" and layer.in_channels == int(np.prod(prev.out_shape))


@dataclass(eq=False)
class NetworkSpec:
    layers: list
    name: str = "net"

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        for i in range(1, len(self.layers)):
            prev, layer = self.layers[i - 1], self.layers[i]
            if not _feeds(prev, layer):
                raise ConfigError(
                    f"layer {i} expects input {layer.in_shape} but layer {i - 1} produces {prev.out_shape}"
                )

    @property
    def input_shape(self) -> tuple:
        return self.layers[0].in_shape

    def __len__(self):
        return len(self.layers)

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec):
            return NotImplemented
        return self.name == other.name and self.layers == other.layers


@dataclass
class SpikeTrain:
    """Binary spike tensor shaped ``(T, C, H, W)``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 4:
            raise ConfigError(f"spike train must be 4-D (T, C, H, W), got shape {b.shape}")
        if b.dtype != np.bool_:
            if not np.isin(b, (0, 1)).all():
                raise NumericDomainError("spike train is not binary")
            b = b.astype(np.bool_)
        self.bits = b

    @property
    def timesteps(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple:
        return self.bits.shape

    def channel_counts(self) -> np.ndarray:
        """Spikes per (timestep, channel), int64."""
        return self.bits.sum(axis=(2, 3), dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)


@dataclass
class NeuronState:
    vmem: np.ndarray = field(default_factory=lambda: np.zeros((1, 1, 1), dtype=DTYPE))

    @classmethod
    def zeros(cls, layer: LayerSpec) -> "NeuronState":
        return cls(np.zeros(layer.out_shape, dtype=DTYPE))


def lif_step(vmem, z, v_th):
    """Integrate ``z`` into ``vmem`` and fire at ``v >= v_th``.

    Works on scalars or arrays, always in float32.  On a spike the threshold
    is subtracted.  Returns ``(vmem', spiked)``.
    """
    if not (np.isfinite(v_th) and v_th > 0):
        raise NumericDomainError(f"threshold must be finite and > 0, got {v_th}")
    th = DTYPE(v_th)
    v = np.add(np.asarray(vmem, dtype=DTYPE), np.asarray(z, dtype=DTYPE))
    if not np.isfinite(v).all():
        raise NumericDomainError("non-finite membrane potential or input")
    spiked = v >= th
    out = np.where(spiked, v - th, v)
    if out.ndim == 0:
        return float(out), bool(spiked)
    return out, spiked


def _as_frame(frame, layer: LayerSpec) -> np.ndarray:
    x = np.asarray(frame)
    if x.shape != layer.in_shape:
        if layer.kind == "dense" and x.size == layer.in_channels:
            x = x.reshape(layer.in_shape)
        else:
            raise ConfigError(f"frame shape {x.shape} != layer input {layer.in_shape}")
    return x


def conv_dv(frame, layer: LayerSpec) -> np.ndarray:
    """Membrane-potential increment of every output neuron for one input frame.

    Cross-correlation with zero padding, no kernel flip:
    ``dv[n, x, y] = sum_ijk w[n, i, j, k] * in[i, x*S - pad + j, y*S - pad + k]``.
    """
    x = _as_frame(frame, layer).astype(np.float64, copy=False)
    R, p, s = layer.kernel_size, layer.pad, layer.stride
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(x, (R, R), axis=(1, 2))
    win = win[:, ::s, ::s][:, : layer.out_height, : layer.out_width]
    # accumulate wide, round once to float32
    dv = np.tensordot(layer.weights.astype(np.float64), win, axes=([1, 2, 3], [0, 3, 4]))
    return dv.astype(DTYPE)


def layer_forward(layer: LayerSpec, frame, state: NeuronState):
    """One timestep of one layer.  Returns ``(spikes, new_state)``."""
    if state.vmem.shape != layer.out_shape:
        raise ConfigError(f"state shape {state.vmem.shape} != layer output {layer.out_shape}")
    z = conv_dv(frame, layer) + layer.bias[:, None, None]
    vmem, spikes = lif_step(state.vmem, z, layer.v_th)
    return spikes, NeuronState(vmem)


def network_forward(net: NetworkSpec, train: SpikeTrain):
    """Run all timesteps through all layers with persistent membrane state.

    Returns ``(outputs, counts)``: one output ``SpikeTrain`` per layer and one
    ``(T, M)`` int64 array of spikes per output channel per timestep.
    """
    first = net.layers[0]
    in_shape = train.shape[1:]
    if in_shape != first.in_shape and not (first.kind == "dense" and int(np.prod(in_shape)) == first.in_channels):
        raise ConfigError(f"input shape {in_shape} != network input {first.in_shape}")

    states = [NeuronState.zeros(layer) for layer in net.layers]
    T = train.timesteps
    outs = [np.zeros((T,) + layer.out_shape, dtype=np.bool_) for layer in net.layers]
    for t in range(T):
        frame = train.bits[t]
        for l, layer in enumerate(net.layers):
            frame, states[l] = layer_forward(layer, frame, states[l])
            outs[l][t] = frame
    trains = [SpikeTrain(o) for o in outs]
    counts = [tr.channel_counts() for tr in trains]
    return trains, counts


def rate_encode(image, T: int, seed: int) -> SpikeTrain:
    """Bernoulli rate coding of an ``(H, W)`` or ``(H, W, C)`` image in [0, 1]."""
    if T < 1:
        raise ConfigError("rate encoding needs T >= 1 timesteps")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ConfigError(f"image must be (H, W) or (H, W, C), got shape {img.shape}")
    if not np.isfinite(img).all():
        raise NumericDomainError("image contains non-finite values")
    p = np.clip(img, 0.0, 1.0).transpose(2, 0, 1)
    rng = np.random.default_rng(seed)
    u = rng.random((T,) + p.shape)
    return SpikeTrain(u < p)


def input_channel_counts(net: NetworkSpec, train: SpikeTrain, outputs: Sequence[SpikeTrain]):
    """Per-layer ``(T, C)`` spike counts arriving on each layer's input channels.

    A dense layer fed by a spatial map sees every upstream neuron as its own
    channel.
    """
    res = []
    for l, layer in enumerate(net.layers):
        src = train if l == 0 else outputs[l - 1]
        if src.shape[1:] == layer.in_shape:
            res.append(src.channel_counts())
        else:
            res.append(src.bits.reshape(src.timesteps, -1).astype(np.int64))
    return res
