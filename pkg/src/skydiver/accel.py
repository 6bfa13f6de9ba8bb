"""Cycle-accounting performance model of the channel-partitioned datapath.

Every SPE cluster evaluates one filter; its N channel SPEs each own a group of
input channels.  Each input spike costs one R x R accumulation window on the
SPE owning its channel; silent channels cost nothing.  All clusters share the
same channel grouping, so per-layer latency at a timestep is the busiest
SPE's cycle count, times the number of passes needed when a layer has more
filters than clusters.

Numbers produced here are model estimates, not silicon measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .aprc import is_aprc, predict_channel_workload
from .cbws import Partition, cbws_partition, contiguous_partition
from .errors import ConfigError, NumericDomainError
from .snn import NetworkSpec, SpikeTrain, input_channel_counts, network_forward

__all__ = [
    "HwConfig",
    "Schedule",
    "SimReport",
    "Throughput",
    "assign_schedule",
    "simulate",
    "charge_cycles",
    "balance_ratio",
    "mean_balance_ratio",
    "throughput_estimate",
    "map_negative",
]


@dataclass(frozen=True)
class HwConfig:
    clusters: int = 8
    spes_per_cluster: int = 4
    streams: int = 4
    clock_hz: float = 200e6

    def __post_init__(self):
        for name in ("clusters", "spes_per_cluster", "streams"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.clock_hz >= 1:
            raise ConfigError("clock_hz must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "HwConfig":
        """``"N=4,streams=4,clusters=8,clock=200e6"``; unspecified keys keep defaults."""
        aliases = {"n": "spes_per_cluster", "spes": "spes_per_cluster", "m": "clusters",
                   "clusters": "clusters", "streams": "streams", "clock": "clock_hz", "clock_hz": "clock_hz"}
        kw = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, val = part.partition("=")
            name = aliases.get(key.strip().lower())
            if not sep or name is None:
                raise ConfigError(f"bad hardware setting {part!r}")
            try:
                kw[name] = float(val) if name == "clock_hz" else int(val)
            except ValueError:
                raise ConfigError(f"bad value in hardware setting {part!r}") from None
        return cls(**kw)


@dataclass
class Schedule:
    """Per-layer grouping of input channels over the N channel SPEs.

    ``policy`` is ``baseline`` or ``cbws``; ``source`` names where CBWS got
    its channel weights: ``aprc`` (magnitudes on a fully padded net),
    ``magnitude`` (magnitudes on an arbitrary net) or ``measured``.
    """

    partitions: list
    policy: str = "baseline"
    source: str = "none"

    @property
    def mode(self) -> str:
        return self.policy if self.policy == "baseline" else f"{self.policy}+{self.source}"


def map_negative(weights, negative: str = "clip") -> np.ndarray:
    """Turn signed channel predictions into non-negative workloads.

    ``clip`` zeroes negative magnitudes (a filter with negative net drift stays
    mostly silent); ``abs`` takes magnitudes.
    """
    w = np.asarray(weights, dtype=np.float64)
    if negative == "clip":
        return np.maximum(w, 0.0)
    if negative == "abs":
        return np.abs(w)
    raise ConfigError(f"unknown negative-weight policy {negative!r}")


def assign_schedule(
    net: NetworkSpec,
    hw: HwConfig,
    use_cbws: bool,
    use_aprc_prediction: bool = True,
    measured_rates: Optional[Sequence] = None,
    *,
    input_rates: Optional[Sequence[float]] = None,
    require_aprc: bool = True,
    negative: str = "clip",
    absolute: bool = False,
    iterations: Optional[int] = None,
) -> Schedule:
    """Group every layer's input channels over ``hw.spes_per_cluster`` SPEs.

    Baseline is the contiguous channel-order split.  CBWS takes its weights
    from filter magnitudes (``use_aprc_prediction``; layer 0 needs
    ``input_rates``) or from ``measured_rates``, one per-channel sequence per
    layer.  ``require_aprc=False`` allows magnitude prediction on a net that
    was not fully padded.
    """
    N = hw.spes_per_cluster
    if not use_cbws:
        parts = [contiguous_partition(np.ones(layer.in_channels), N) for layer in net.layers]
        return Schedule(parts, "baseline", "none")

    if use_aprc_prediction:
        if require_aprc and not is_aprc(net):
            raise ConfigError("APRC prediction requested on a network that is not fully padded")
        weights = []
        for l in range(len(net.layers)):
            if l == 0 and input_rates is None:
                if measured_rates is None:
                    raise ConfigError("CBWS on layer 0 needs input_rates or measured_rates")
                weights.append(np.asarray(measured_rates[0], dtype=np.float64))
            else:
                weights.append(predict_channel_workload(net, l, input_rates, absolute))
        source = "aprc" if require_aprc else "magnitude"
    else:
        if measured_rates is None:
            raise ConfigError("measured mode needs measured_rates for every layer")
        if len(measured_rates) != len(net.layers):
            raise ConfigError(f"got rates for {len(measured_rates)} layers, network has {len(net.layers)}")
        weights = [np.asarray(r, dtype=np.float64) for r in measured_rates]
        source = "measured"

    parts = []
    for l, (layer, w) in enumerate(zip(net.layers, weights)):
        w = np.asarray(w, dtype=np.float64).reshape(-1)
        if w.size != layer.in_channels:
            raise ConfigError(f"layer {l}: {w.size} channel weights for {layer.in_channels} channels")
        parts.append(cbws_partition(map_negative(w, negative), N, iterations))
    return Schedule(parts, "cbws", source)


@dataclass
class SimReport:
    """Busy cycles per layer, timestep and SPE position.

    ``busy[l]`` is a ``(T, N)`` int64 array; ``synaptic_ops[l]`` counts every
    weight accumulate across all filters.
    """

    busy: list
    synaptic_ops: list
    passes: list
    metadata: dict = field(default_factory=dict)
    frames: int = 1

    @property
    def n_layers(self) -> int:
        return len(self.busy)

    def layer_latency(self, layer: int) -> np.ndarray:
        b = self.busy[layer]
        return b.max(axis=1) if b.shape[1] else np.zeros(b.shape[0], dtype=np.int64)

    def layer_cycles(self, layer: int) -> int:
        return int(self.layer_latency(layer).sum())

    def layer_work(self, layer: int) -> int:
        return int(self.busy[layer].sum())

    @property
    def total_cycles(self) -> int:
        return sum(self.layer_cycles(l) for l in range(self.n_layers))

    @property
    def total_work(self) -> int:
        return sum(self.layer_work(l) for l in range(self.n_layers))

    @property
    def total_synaptic_ops(self) -> int:
        return int(sum(self.synaptic_ops))

    def to_dict(self) -> dict:
        layers = []
        for l in range(self.n_layers):
            br = balance_ratio(self, l)
            layers.append({
                "layer": l,
                "passes": int(self.passes[l]),
                "synaptic_ops": int(self.synaptic_ops[l]),
                "total_work": self.layer_work(l),
                "latency_cycles": self.layer_cycles(l),
                "balance_ratio": br,
                "latency": self.layer_latency(l).tolist(),
                "busy": self.busy[l].tolist(),
            })
        return {
            "metadata": dict(self.metadata),
            "frames": self.frames,
            "total_cycles": self.total_cycles,
            "total_work": self.total_work,
            "mean_balance_ratio": mean_balance_ratio(self),
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        busy = [np.asarray(L["busy"], dtype=np.int64).reshape(len(L["latency"]), -1) for L in d["layers"]]
        return cls(
            busy=busy,
            synaptic_ops=[int(L["synaptic_ops"]) for L in d["layers"]],
            passes=[int(L["passes"]) for L in d["layers"]],
            metadata=dict(d.get("metadata", {})),
            frames=int(d.get("frames", 1)),
        )


def simulate(net: NetworkSpec, train: SpikeTrain, schedule: Schedule, hw: HwConfig, metadata: Optional[dict] = None) -> SimReport:
    """Run the network on ``train`` and charge every input spike to its SPE."""
    if len(schedule.partitions) != len(net.layers):
        raise ConfigError(f"schedule covers {len(schedule.partitions)} layers, network has {len(net.layers)}")
    for l, (layer, p) in enumerate(zip(net.layers, schedule.partitions)):
        if len(p.weights) != layer.in_channels:
            raise ConfigError(f"layer {l}: schedule covers {len(p.weights)} channels, layer has {layer.in_channels}")
        if p.n_groups != hw.spes_per_cluster:
            raise ConfigError(f"layer {l}: schedule has {p.n_groups} groups for {hw.spes_per_cluster} SPEs")

    outputs, _ = network_forward(net, train)
    return charge_cycles(net, input_channel_counts(net, train, outputs), schedule, hw, metadata)


def charge_cycles(net: NetworkSpec, in_counts: Sequence[np.ndarray], schedule: Schedule, hw: HwConfig,
                  metadata: Optional[dict] = None) -> SimReport:
    """Cycle accounting from per-layer ``(T, C)`` input spike counts."""
    busy, sops, passes = [], [], []
    for layer, part, counts in zip(net.layers, schedule.partitions, in_counts):
        window = layer.kernel_size * layer.kernel_size
        n_pass = math.ceil(layer.out_channels / hw.clusters)
        b = np.zeros((counts.shape[0], part.n_groups), dtype=np.int64)
        for j, group in enumerate(part.sublists):
            if group:
                b[:, j] = counts[:, list(group)].sum(axis=1)
        busy.append(b * (window * n_pass))
        sops.append(int(counts.sum()) * window * layer.out_channels)
        passes.append(n_pass)
    meta = {"net": net.name, "mode": schedule.mode}
    meta.update(metadata or {})
    return SimReport(busy, sops, passes, meta)


def balance_ratio(report: SimReport, layer: int) -> Optional[float]:
    """Mean-to-max SPE work over all timesteps of one layer; ``None`` if idle."""
    b = report.busy[layer]
    peak = int(b.max(axis=1).sum()) if b.size else 0
    if peak == 0:
        return None
    return float(b.sum()) / (b.shape[1] * peak)


def mean_balance_ratio(report: SimReport) -> Optional[float]:
    vals = [r for r in (balance_ratio(report, l) for l in range(report.n_layers)) if r is not None]
    return float(np.mean(vals)) if vals else None


class Throughput(NamedTuple):
    fps: float
    sops_per_s: float
    cycles_per_frame: float


def throughput_estimate(report: SimReport, hw: HwConfig) -> Throughput:
    """Frames/s and synaptic ops/s, with the output-row streams dividing cycles."""
    if report.frames < 1:
        raise ConfigError("report covers no frames")
    cycles = report.total_cycles / hw.streams
    if cycles <= 0:
        raise NumericDomainError("zero-cycle run: throughput is unbounded")
    per_frame = cycles / report.frames
    return Throughput(hw.clock_hz / per_frame, report.total_synaptic_ops * hw.clock_hz / cycles, per_frame)
