"""Acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL  <measurement>`` line before
asserting; the lines are printed together at the end of the pytest run and
also when this file is executed directly.
"""

import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from skydiver import formats
from skydiver.accel import HwConfig
from skydiver.aprc import channel_dv_sums, factorized_dv_sums, filter_magnitudes, proportionality_report
from skydiver.cbws import (cbws_partition, finetune, optimal_partition_oracle, partition_stats,
                           seed_sublists, serpentine_order)
from skydiver.cli import main
from skydiver.experiment import run_matrix
from skydiver.snn import DTYPE, LayerSpec, NetworkSpec, SpikeTrain, lif_step, rate_encode
from skydiver.synth import generate_network, random_image

from conftest import ACCEPTANCE_LINES, fig4_layer, six_spike_frame

# desk-scale stand-in for the 6-layer segmentation network
SEG_NET = "32x16x3-8C3-16C3-32C3-32C3-16C3-1C3"
SEG_SHAPE = (32, 16, 3)
SEEDS = range(20)
HW = HwConfig(clusters=8, spes_per_cluster=4, streams=4, clock_hz=200e6)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_channel_sum_identity():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst, bad, worst_fact = 0.0, 0, 0.0
    for _ in range(500):
        C, M, R = int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 6))
        H = int(rng.integers(R, 13))
        w = rng.normal(0, 1, (M, C, R, R)).astype(DTYPE)
        layer = LayerSpec("conv", C, M, R, H, H, w, pad=R - 1)
        f = rng.random((C, H, H)) < rng.uniform(0.05, 0.6)
        got = channel_dv_sums(layer, f)
        want = filter_magnitudes(layer) * f.sum()
        scale = np.abs(layer.weights).sum(axis=(1, 2, 3)) * max(1, f.sum())
        err = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-12 * scale + 1e-30))
        worst = max(worst, err)
        bad += err > 1e-5
        fact = factorized_dv_sums(layer, f)
        worst_fact = max(worst_fact, np.max(np.abs(got - fact) / (scale + 1e-30)))
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 30
    record(1, ok, f"{bad}/500 layers off magnitude*nnz by >1e-5 (worst rel {worst:.3g}); "
                  f"per-channel form worst {worst_fact:.2g}; {dt:.1f}s")
    assert ok


def test_criterion_2_worked_example():
    layer = fig4_layer(v_th=1.0)
    mags = filter_magnitudes(layer)
    sums = channel_dv_sums(layer, six_spike_frame())
    lp = proportionality_report(NetworkSpec([layer]), SpikeTrain(six_spike_frame()[None])).layers[0]
    ok = (np.allclose(mags, [2.7, 0.9], rtol=1e-6) and np.allclose(sums, [16.2, 5.4], rtol=1e-6)
          and abs(sums[0] / sums[1] - 3) < 1e-6 and lp.spikes[0] > lp.spikes[1])
    record(2, ok, f"magnitudes {mags[0]:.4f}/{mags[1]:.4f}, dv sums {sums[0]:.4f}/{sums[1]:.4f}, "
                  f"spikes at v_th=1.0: {lp.spikes[0]}/{lp.spikes[1]}")
    assert ok


def test_criterion_3_oracle_proximity():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    ratios = []
    for _ in range(500):
        K, n = int(rng.integers(1, 13)), int(rng.integers(2, 5))
        w = rng.random(K)
        ratios.append(max(cbws_partition(w, n).sums) / max(optimal_partition_oracle(w, n).sums))
    dt = time.perf_counter() - t0
    r = np.array(ratios)
    within = (r <= 1.2).mean()
    # frozen from the first measurement: 0.97 within 1.2x, mean 1.034, worst 1.433
    ok = within >= 0.95 and r.mean() <= 1.05 and r.max() <= 1.5 and dt < 60
    record(3, ok, f"{within:.1%} within 1.2x of optimal, mean {r.mean():.4f}, worst {r.max():.4f}, "
                  f"{(r <= 1 + 1e-9).mean():.1%} optimal; {dt:.1f}s")
    assert ok


def _fuzz_weights(rng):
    K = int(rng.integers(1, 65))
    kind = rng.integers(0, 5)
    if kind == 0:
        return rng.random(K)
    if kind == 1:
        return rng.integers(0, 4, K).astype(float)  # many ties and zeros
    if kind == 2:
        return rng.lognormal(0, 3, K)  # wide dynamic range
    if kind == 3:
        return np.zeros(K)
    return np.abs(rng.normal(0, 1, K)) * 1e6


def test_criterion_4_finetune_fuzz():
    rng = np.random.default_rng(4)
    failures = []
    for i in range(10_000):
        w = _fuzz_weights(rng)
        n = int(rng.integers(1, 10))
        try:
            order = sorted(range(len(w)), key=lambda k: (-w[k], k))
            seed = seed_sublists(serpentine_order(order, n), n, w)
            hist = []
            out = finetune(seed, len(w), history=hist)
            hist.append(partition_stats(out).diff)
            cover = sorted(k for s in out.sublists for k in s) == list(range(len(w)))
            mono = all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(hist, hist[1:]))
            if not (cover and mono and out == cbws_partition(w, n)):
                failures.append(i)
        except Exception as e:  # any exception counts as a panic
            failures.append((i, repr(e)))
    ok = not failures
    record(4, ok, f"{10_000 - len(failures)}/10000 fuzzed instances valid, monotone, panic-free")
    assert ok, failures[:5]


@lru_cache(maxsize=None)
def ablation():
    """Mean balance and total cycles per mode, per seed."""
    rows = []
    for seed in SEEDS:
        net = generate_network(SEG_NET, seed, sigma=1.0, fan_in_scaled=True)
        train = rate_encode(random_image(SEG_SHAPE, seed), 50, seed)
        res = {r.name: r for r in run_matrix(net, train, HW)}
        rows.append({k: (r.mean_balance, r.report.total_cycles) for k, r in res.items()})
    return rows


def test_criterion_5_balance_ablation():
    t0 = time.perf_counter()
    rows = ablation()
    dt = time.perf_counter() - t0
    mean = {k: float(np.mean([r[k][0] for r in rows])) for k in rows[0]}
    wins = sum(r["cbws/aprc-on"][0] > max(r["baseline/aprc-off"][0], r["cbws/aprc-off"][0]) for r in rows)
    full = mean["cbws/aprc-on"]
    ok = wins >= 16 and full > max(mean["baseline/aprc-off"], mean["cbws/aprc-off"]) and full >= 0.85
    record(5, ok, f"mean balance baseline {mean['baseline/aprc-off']:.4f}, cbws-alone {mean['cbws/aprc-off']:.4f}, "
                  f"cbws+aprc {full:.4f} (floor 0.85); ordering held in {wins}/20 seeds; {dt:.0f}s")
    assert ok


def test_criterion_6_throughput_direction():
    rows = ablation()
    same = [r["baseline/aprc-on"][1] / r["cbws/aprc-on"][1] for r in rows]
    orig = [r["baseline/aprc-off"][1] / r["cbws/aprc-on"][1] for r in rows]
    ok = np.mean(same) >= 1.1
    record(6, ok, f"cbws+aprc / baseline throughput {np.mean(same):.4f} on the padded net "
                  f"({np.mean(orig):.4f} against the unpadded baseline); need >= 1.1")
    assert ok


def test_criterion_7_lif_conservation():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        th = DTYPE(rng.uniform(0.1, 3.0))
        zs = rng.uniform(-0.5, 1.5, int(rng.integers(1, 201))).astype(DTYPE)
        v, spikes = 0.0, 0
        for z in zs:
            v, s = lif_step(v, z, th)
            spikes += s
        total = float(np.sum(zs, dtype=np.float64))
        err = abs(total - (v + float(th) * spikes)) / max(abs(total), float(th))
        worst = max(worst, err)
    ok = worst <= 1e-6
    record(7, ok, f"worst relative conservation error {worst:.3g} over 1000 traces")
    assert ok


def test_criterion_8_compare_determinism(tmp_path):
    net = tmp_path / "net.json"
    main(["gen", "--layers", SEG_NET, "--seed", "3", "--sigma", "1.0", "--fan-in-scaled", "--out", str(net)])
    outs = []
    for name in ("a.csv", "b.csv"):
        code = main(["compare", "--net", str(net), "--input", "random", "--timesteps", "20",
                     "--seed", "3", "--out", str(tmp_path / name)])
        outs.append((code, (tmp_path / name).read_bytes()))
    ok = outs[0][0] == outs[1][0] == 0 and outs[0][1] == outs[1][1]
    record(8, ok, f"two compare runs -> {len(outs[0][1])}-byte CSVs, identical={outs[0][1] == outs[1][1]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
