"""Topology strings and seeded synthetic networks.

Topology strings use the ``-``-separated notation common in the SNN literature:

* ``28x28`` / ``160x80x3`` -- optional leading input shape, height x width [x channels]
* ``16C3`` -- conv layer with 16 filters of size 3 x 3
* ``16c``  -- conv layer with 16 filters and the default kernel size
* ``10``   -- dense layer with 10 units
"""

from __future__ import annotations

import re
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError
from .snn import DTYPE, LayerSpec, NetworkSpec

__all__ = ["LayerToken", "parse_topology", "generate_network", "random_image",
           "SEGMENTATION_TOPOLOGY", "CLASSIFICATION_TOPOLOGY"]

DEFAULT_KERNEL = 3
DEFAULT_INPUT = (28, 28, 1)
SEGMENTATION_TOPOLOGY = "160x80x3-8C3-16C3-32C3-32C3-16C3-1C3"
CLASSIFICATION_TOPOLOGY = "28x28-16c-32c-8c-10"

_SHAPE = re.compile(r"^(\d+)x(\d+)(?:x(\d+))?$", re.IGNORECASE)
_CONV = re.compile(r"^(\d+)[cC](\d+)?$")
_DENSE = re.compile(r"^(\d+)$")


class LayerToken(NamedTuple):
    kind: str
    out_channels: int
    kernel_size: int


def parse_topology(text: str):
    """Return ``(input_shape or None, [LayerToken, ...])``; input shape is (H, W, C)."""
    parts = [p.strip() for p in text.strip().split("-") if p.strip()]
    if not parts:
        raise ConfigError("empty topology string")
    shape = None
    m = _SHAPE.match(parts[0])
    if m:
        shape = (int(m.group(1)), int(m.group(2)), int(m.group(3) or 1))
        if min(shape) < 1:
            raise ConfigError(f"bad input shape {parts[0]!r}")
        parts = parts[1:]
    tokens = []
    for p in parts:
        if (m := _CONV.match(p)):
            tok = LayerToken("conv", int(m.group(1)), int(m.group(2) or DEFAULT_KERNEL))
        elif (m := _DENSE.match(p)):
            tok = LayerToken("dense", int(m.group(1)), 1)
        else:
            raise ConfigError(f"cannot parse layer {p!r} in topology {text!r}")
        if tok.out_channels < 1 or tok.kernel_size < 1:
            raise ConfigError(f"layer {p!r} needs at least one filter of size >= 1")
        tokens.append(tok)
    if not tokens:
        raise ConfigError(f"topology {text!r} has no layers")
    return shape, tokens


def generate_network(
    topology: str,
    seed: int,
    sigma: float = 0.5,
    v_th: float = 1.0,
    pad: int = 0,
    stride: int = 1,
    input_shape: Optional[tuple] = None,
    name: Optional[str] = None,
    fan_in_scaled: bool = False,
) -> NetworkSpec:
    """Zero-mean Gaussian weights, zero bias, one threshold for every layer.

    ``pad``/``stride`` apply to every conv layer (``pad`` is capped at R-1).
    With ``fan_in_scaled`` the weight std is ``sigma / sqrt(fan_in)``, so
    filter magnitudes have std ``sigma`` at every depth.
    """
    shape, tokens = parse_topology(topology)
    H, W, C = input_shape or shape or DEFAULT_INPUT
    rng = np.random.default_rng(seed)
    layers = []
    for tok in tokens:
        if tok.kind == "conv":
            p = min(pad, tok.kernel_size - 1)
            std = sigma / np.sqrt(C * tok.kernel_size**2) if fan_in_scaled else sigma
            w = rng.normal(0.0, std, (tok.out_channels, C, tok.kernel_size, tok.kernel_size))
            layer = LayerSpec("conv", C, tok.out_channels, tok.kernel_size, H, W,
                              w.astype(DTYPE), pad=p, stride=stride, v_th=v_th)
            C, H, W = layer.out_shape
        else:
            fan_in = C * H * W
            std = sigma / np.sqrt(fan_in) if fan_in_scaled else sigma
            w = rng.normal(0.0, std, (tok.out_channels, fan_in))
            layer = LayerSpec("dense", fan_in, tok.out_channels, 1, 1, 1, w.astype(DTYPE), v_th=v_th)
            C, H, W = tok.out_channels, 1, 1
        layers.append(layer)
    return NetworkSpec(layers, name=name or topology)


def random_image(shape, seed: int) -> np.ndarray:
    """Uniform [0, 1] image shaped (H, W, C)."""
    return np.random.default_rng(seed).random(tuple(shape))
