"""Schedule ablation: {baseline, cbws} x {aprc off, aprc on} on one input."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .accel import (
    HwConfig,
    SimReport,
    Throughput,
    assign_schedule,
    balance_ratio,
    charge_cycles,
    mean_balance_ratio,
    throughput_estimate,
)
from .aprc import apply_aprc
from .snn import NetworkSpec, SpikeTrain, input_channel_counts, network_forward

__all__ = ["MODES", "ModeResult", "run_matrix", "compare_rows", "COMPARE_COLUMNS"]

MODES = (("baseline", False), ("cbws", False), ("baseline", True), ("cbws", True))

COMPARE_COLUMNS = [
    "mode", "policy", "aprc", "layer", "balance_ratio", "latency_cycles",
    "total_work", "est_fps", "throughput_ratio",
]


@dataclass
class ModeResult:
    policy: str
    aprc: bool
    report: SimReport
    throughput: Throughput

    @property
    def name(self) -> str:
        return f"{self.policy}/aprc-{'on' if self.aprc else 'off'}"

    @property
    def mean_balance(self) -> Optional[float]:
        return mean_balance_ratio(self.report)


def parse_modes(text: str):
    """``"baseline:off,cbws:on"`` -> mode tuples; ``"all"`` gives the full matrix."""
    if text.strip().lower() in ("", "all", "full"):
        return MODES
    modes = []
    for part in text.split(","):
        policy, _, flag = part.strip().partition(":")
        if policy not in ("baseline", "cbws") or flag not in ("on", "off"):
            raise ValueError(f"bad mode {part!r}; expected e.g. cbws:on")
        modes.append((policy, flag == "on"))
    return tuple(modes)


def run_matrix(
    net: NetworkSpec,
    train: SpikeTrain,
    hw: HwConfig,
    modes: Sequence = MODES,
    negative: str = "clip",
    metadata: Optional[dict] = None,
) -> list:
    """Simulate every requested mode.  CBWS always predicts from filter
    magnitudes (layer 0 from the measured input rates); with APRC off the
    prediction runs on the unpadded network."""
    input_rates = train.channel_counts().sum(axis=0) / train.timesteps
    nets, counts = {}, {}
    results = []
    for policy, aprc in modes:
        if aprc not in nets:
            nets[aprc] = apply_aprc(net) if aprc else net
            outputs, _ = network_forward(nets[aprc], train)
            counts[aprc] = input_channel_counts(nets[aprc], train, outputs)
        n = nets[aprc]
        sched = assign_schedule(n, hw, policy == "cbws", True, input_rates=input_rates,
                                require_aprc=aprc, negative=negative)
        meta = {"net": net.name, "mode": f"{policy}/aprc-{'on' if aprc else 'off'}",
                "policy": policy, "aprc": aprc}
        meta.update(metadata or {})
        rep = charge_cycles(n, counts[aprc], sched, hw, meta)
        results.append(ModeResult(policy, aprc, rep, throughput_estimate(rep, hw)))
    return results


def compare_rows(results: Sequence[ModeResult], hw: HwConfig) -> list:
    """One row per mode per layer plus an ``all`` row per mode.

    ``throughput_ratio`` is baseline latency over this mode's latency for the
    same APRC setting (1.0 on baseline rows; empty when no baseline ran).
    """
    base = {r.aprc: r for r in results if r.policy == "baseline"}
    rows = []
    for r in results:
        rep = r.report
        b = base.get(r.aprc)
        for l in range(rep.n_layers):
            cyc = rep.layer_cycles(l)
            ratio = None
            if b is not None and cyc:
                ratio = b.report.layer_cycles(l) / cyc
            rows.append({
                "mode": r.name, "policy": r.policy, "aprc": "on" if r.aprc else "off", "layer": l,
                "balance_ratio": balance_ratio(rep, l), "latency_cycles": cyc,
                "total_work": rep.layer_work(l),
                "est_fps": hw.clock_hz * hw.streams / cyc if cyc else None,
                "throughput_ratio": ratio,
            })
        ratio = b.report.total_cycles / rep.total_cycles if b is not None and rep.total_cycles else None
        rows.append({
            "mode": r.name, "policy": r.policy, "aprc": "on" if r.aprc else "off", "layer": "all",
            "balance_ratio": r.mean_balance, "latency_cycles": rep.total_cycles,
            "total_work": rep.total_work, "est_fps": r.throughput.fps, "throughput_ratio": ratio,
        })
    return rows
