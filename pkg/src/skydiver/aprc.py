"""Full-padding transform and filter-magnitude workload prediction.

With pad = R-1 and stride 1 every weight of a filter meets every input
position exactly once, so the summed membrane increment of output channel
``n`` factors into per-kernel magnitudes times per-input-channel spike counts.
Spike counts then track filter magnitudes approximately, which is what makes
channel workload predictable before running the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError
from .snn import LayerSpec, NetworkSpec, SpikeTrain, conv_dv, network_forward

__all__ = [
    "filter_magnitude",
    "filter_magnitudes",
    "kernel_magnitudes",
    "apply_aprc",
    "is_aprc",
    "channel_dv_sums",
    "factorized_dv_sums",
    "LayerProportionality",
    "ProportionalityReport",
    "proportionality_report",
    "predict_channel_workload",
]


def filter_magnitude(layer: LayerSpec, n: int, absolute: bool = False) -> float:
    """Sum of all C*R*R weights of filter ``n`` (bias excluded).

    ``absolute=True`` sums magnitudes instead of signed values.
    """
    if not 0 <= n < layer.out_channels:
        raise IndexError(f"filter index {n} out of range for {layer.out_channels} filters")
    w = layer.weights[n].astype(np.float64)
    return float(np.abs(w).sum() if absolute else w.sum())


def filter_magnitudes(layer: LayerSpec, absolute: bool = False) -> np.ndarray:
    w = layer.weights.astype(np.float64)
    if absolute:
        w = np.abs(w)
    return w.sum(axis=(1, 2, 3))


def kernel_magnitudes(layer: LayerSpec) -> np.ndarray:
    """``(M, C)`` signed sums of each R x R kernel slice."""
    return layer.weights.astype(np.float64).sum(axis=(2, 3))


def is_aprc(net: NetworkSpec) -> bool:
    return all(layer.kind == "dense" or layer.fully_padded for layer in net.layers)


def apply_aprc(net: NetworkSpec) -> NetworkSpec:
    """Copy of ``net`` with every conv layer at pad = R-1, stride 1.

    Spatial sizes are re-chained through the network; weights are copied
    unchanged.  A dense layer fed by a conv map whose size changes cannot keep
    its weights and is rejected.
    """
    layers = []
    prev = None
    for i, layer in enumerate(net.layers):
        if layer.kind == "conv":
            h, w = (layer.in_height, layer.in_width) if prev is None else (prev.out_height, prev.out_width)
            new = layer.replace(pad=layer.kernel_size - 1, stride=1, in_height=h, in_width=w)
        else:
            new = layer.replace()
            if prev is not None and new.in_shape != prev.out_shape:
                flat = int(np.prod(prev.out_shape))
                if flat != new.in_channels:
                    raise ConfigError(
                        f"dense layer {i} takes {new.in_channels} inputs but the padded "
                        f"layer {i - 1} now emits {flat}; its weights cannot be kept"
                    )
        layers.append(new)
        prev = new
    return NetworkSpec(layers, name=net.name)


def channel_dv_sums(layer: LayerSpec, frame) -> np.ndarray:
    """Sum of the membrane increment over every position of each output channel."""
    if not layer.fully_padded:
        raise ConfigError(
            f"layer has pad={layer.pad}, stride={layer.stride}; channel sums only "
            f"factor under pad={layer.kernel_size - 1}, stride=1"
        )
    return conv_dv(frame, layer).astype(np.float64).sum(axis=(1, 2))


def factorized_dv_sums(layer: LayerSpec, frame) -> np.ndarray:
    """Closed form of ``channel_dv_sums``: kernel magnitudes times per-channel spike counts.

    Reduces to ``magnitude * nnz(frame)`` when C == 1 or all input channels
    carry the same number of spikes.
    """
    x = np.asarray(frame).reshape(layer.in_shape)
    nnz = x.reshape(layer.in_channels, -1).sum(axis=1).astype(np.float64)
    return kernel_magnitudes(layer) @ nnz


@dataclass
class LayerProportionality:
    layer_index: int
    magnitudes: np.ndarray
    spikes: np.ndarray
    spearman: Optional[float]
    ties: bool
    max_ratio_deviation: float
    note: str = ""

    @property
    def ranks(self) -> np.ndarray:
        """1 = largest magnitude."""
        return stats.rankdata(-self.magnitudes, method="min").astype(int)

    def rows(self):
        for c, (m, s, r) in enumerate(zip(self.magnitudes, self.spikes, self.ranks)):
            yield {"layer": self.layer_index, "channel": c, "magnitude": float(m), "spikes": int(s), "rank": int(r)}


@dataclass
class ProportionalityReport:
    layers: list = field(default_factory=list)

    def mean_spearman(self) -> Optional[float]:
        vals = [l.spearman for l in self.layers if l.spearman is not None]
        return float(np.mean(vals)) if vals else None

    def rows(self):
        for lp in self.layers:
            yield from lp.rows()


def _ratio_deviation(mags: np.ndarray, spikes: np.ndarray) -> float:
    # spikes per unit magnitude over positive-magnitude channels; 0 = exactly proportional
    pos = mags > 0
    if pos.sum() < 2:
        return float("nan")
    r = spikes[pos] / mags[pos]
    if r.min() == 0:
        return float("inf") if r.max() > 0 else 0.0
    return float(r.max() / r.min() - 1.0)


def proportionality_report(net: NetworkSpec, train: SpikeTrain, absolute: bool = False) -> ProportionalityReport:
    """Pair each output channel's spike count over the run with its filter magnitude."""
    _, counts = network_forward(net, train)
    report = ProportionalityReport()
    for l, (layer, cnt) in enumerate(zip(net.layers, counts)):
        mags = filter_magnitudes(layer, absolute)
        spikes = cnt.sum(axis=0)
        ties = bool(len(np.unique(mags)) < len(mags) or len(np.unique(spikes)) < len(spikes))
        rho, note = None, ""
        if layer.out_channels < 2:
            note = "fewer than 2 channels"
        elif np.all(mags == mags[0]) or np.all(spikes == spikes[0]):
            note = "constant magnitudes or spike counts"
        else:
            rho = float(stats.spearmanr(mags, spikes).statistic)
        report.layers.append(
            LayerProportionality(l, mags, spikes, rho, ties, _ratio_deviation(mags, spikes), note)
        )
    return report


def predict_channel_workload(
    net: NetworkSpec,
    layer_index: int,
    input_rates: Optional[Sequence[float]] = None,
    absolute: bool = False,
) -> np.ndarray:
    """Predicted relative workload of each input channel of one layer.

    Channel ``c`` of layer ``l`` is produced by filter ``c`` of layer ``l-1``,
    so its weight is that filter's magnitude.  Layer 0 has no upstream filter
    and returns ``input_rates`` verbatim.
    """
    if not 0 <= layer_index < len(net.layers):
        raise ConfigError(f"layer index {layer_index} out of range for {len(net.layers)} layers")
    layer = net.layers[layer_index]
    if layer_index == 0:
        if input_rates is None:
            raise ConfigError("layer 0 needs measured or supplied input channel rates")
        rates = np.asarray(input_rates, dtype=np.float64).reshape(-1)
        if rates.size != layer.in_channels:
            raise ConfigError(f"got {rates.size} input rates for {layer.in_channels} channels")
        return rates
    prev = net.layers[layer_index - 1]
    mags = filter_magnitudes(prev, absolute)
    if layer.in_shape != prev.out_shape:
        # flattened into a dense layer: every position inherits its channel's filter
        mags = np.repeat(mags, prev.out_height * prev.out_width)
    return mags
