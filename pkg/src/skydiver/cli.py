"""Command line front end.

    skydiver gen      --layers 160x80x3-8C3-16C3 --seed 1 --out net.json
    skydiver run      --net net.json --input random --timesteps 50 --seed 1 --schedule cbws --aprc on
    skydiver compare  --net net.json --input random --timesteps 50 --seed 1
    skydiver profile  --net net.json --input random --timesteps 50 --seed 1
    skydiver proportion --net net.json --input random --timesteps 50 --seed 1 --aprc on

Exit codes: 0 ok, 2 usage, 3 data/format error, 4 model/shape error.
Outputs default to ``$SKYDIVER_OUT`` (or the current directory).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .accel import HwConfig, assign_schedule, mean_balance_ratio, simulate, throughput_estimate
from .aprc import apply_aprc, proportionality_report
from .errors import BudgetError, ConfigError, FormatError, NumericDomainError
from .experiment import COMPARE_COLUMNS, compare_rows, parse_modes, run_matrix
from .snn import SpikeTrain, network_forward, rate_encode
from .synth import generate_network, random_image

log = logging.getLogger("skydiver")

EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 2, 3, 4
PROFILE_COLUMNS = ["layer", "channel", "spikes", "spikerate", "q25", "median", "q75", "max"]
PROPORTION_COLUMNS = ["layer", "channel", "magnitude", "spikes", "rank"]


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get("SKYDIVER_OUT", "."))


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _shape(text: str) -> tuple:
    parts = [int(p) for p in text.lower().split("x")]
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"expected HxW or HxWxC, got {text!r}")
    return tuple(parts)


def _is_idx(path: Path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == b"\x00\x00\x08\x03"
    except OSError:
        return False


def load_input(args, net) -> SpikeTrain:
    """Spike trace file, IDX image file, .npy image, or ``random``."""
    C, H, W = net.input_shape
    src = args.input
    needs_encoding = src == "random" or Path(src).suffix == ".npy" or _is_idx(Path(src))
    if needs_encoding and args.timesteps is None:
        raise UsageError("--timesteps is required when the input is rate encoded")
    if src == "random":
        img = random_image((H, W, C), args.seed)
        return rate_encode(img, args.timesteps, args.seed)
    path = Path(src)
    if _is_idx(path):
        images = formats.load_idx_images(path, limit=args.image_index + 1)
        if images.shape[0] <= args.image_index:
            raise FormatError(f"{path} has only {images.shape[0]} images")
        return rate_encode(images[args.image_index], args.timesteps, args.seed)
    if path.suffix == ".npy":
        return rate_encode(np.load(path), args.timesteps, args.seed)
    train = formats.load_spike_trace(path)
    if args.timesteps is not None and args.timesteps != train.timesteps:
        raise ConfigError(f"--timesteps {args.timesteps} but the trace holds {train.timesteps}")
    return train


def cmd_gen(args) -> int:
    net = generate_network(args.layers, args.seed, sigma=args.sigma, v_th=args.v_th, pad=args.pad,
                           stride=args.stride, input_shape=args.input_shape, name=args.name,
                           fan_in_scaled=args.fan_in_scaled)
    out = Path(args.out) if args.out else _out_dir(args) / "net.json"
    formats.save_network(net, out)
    print(f"wrote {out} ({len(net.layers)} layers)")
    return 0


def _prepare(args):
    net = formats.load_network(args.net)
    train = load_input(args, net)
    return net, train


def cmd_run(args) -> int:
    net, train = _prepare(args)
    if args.aprc == "on":
        net = apply_aprc(net)
    hw = HwConfig.parse(args.hw)
    rates = train.channel_counts().sum(axis=0) / train.timesteps
    sched = assign_schedule(net, hw, args.schedule == "cbws", True, input_rates=rates,
                            require_aprc=args.aprc == "on", negative=args.negative)
    mode = f"{args.schedule}/aprc-{args.aprc}"
    rep = simulate(net, train, sched, hw, metadata={"mode": mode, "seed": args.seed, "hw": args.hw})
    out = _out_dir(args)
    formats.write_report(rep, "json", out / "report.json")
    formats.write_report(rep, "csv", out / "report.csv")
    thr = throughput_estimate(rep, hw) if rep.total_cycles else None
    mb = mean_balance_ratio(rep)
    print(f"{mode}: cycles={rep.total_cycles} work={rep.total_work} "
          f"balance={'n/a' if mb is None else f'{mb:.4f}'} "
          f"est_fps={'n/a' if thr is None else f'{thr.fps:.1f}'} -> {out}")
    return 0


def cmd_compare(args) -> int:
    net, train = _prepare(args)
    hw = HwConfig.parse(args.hw)
    try:
        modes = parse_modes(args.matrix)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    results = run_matrix(net, train, hw, modes, negative=args.negative, metadata={"seed": args.seed})
    rows = compare_rows(results, hw)
    out = Path(args.out) if args.out else _out_dir(args) / "compare.csv"
    formats.write_csv(rows, COMPARE_COLUMNS, out)
    for r in results:
        mb = r.mean_balance
        print(f"{r.name:20s} balance={'n/a' if mb is None else f'{mb:.4f}'} cycles={r.report.total_cycles}")
    print(f"wrote {out}")
    return 0


def profile_rows(net, train: SpikeTrain) -> list:
    """Per-layer spikerate plus per-channel totals and per-timestep quartiles."""
    outputs, counts = network_forward(net, train)
    rows = []
    layers = [("input", train, train.channel_counts())] + [(l, o, c) for l, (o, c) in enumerate(zip(outputs, counts))]
    for name, tr, cnt in layers:
        T, C, H, W = tr.shape
        rows.append({"layer": name, "channel": "all", "spikes": int(cnt.sum()),
                     "spikerate": float(cnt.sum()) / (T * C * H * W)})
        q = np.percentile(cnt, [25, 50, 75], axis=0)
        for c in range(C):
            rows.append({"layer": name, "channel": c, "spikes": int(cnt[:, c].sum()),
                         "spikerate": float(cnt[:, c].sum()) / (T * H * W),
                         "q25": float(q[0, c]), "median": float(q[1, c]), "q75": float(q[2, c]),
                         "max": int(cnt[:, c].max())})
    return rows


def cmd_profile(args) -> int:
    net, train = _prepare(args)
    if args.aprc == "on":
        net = apply_aprc(net)
    out = Path(args.out) if args.out else _out_dir(args) / "profile.csv"
    formats.write_csv(profile_rows(net, train), PROFILE_COLUMNS, out)
    print(f"wrote {out}")
    return 0


def cmd_proportion(args) -> int:
    net, train = _prepare(args)
    if args.aprc == "on":
        net = apply_aprc(net)
    rep = proportionality_report(net, train)
    out = Path(args.out) if args.out else _out_dir(args) / "proportion.csv"
    formats.write_csv(rep.rows(), PROPORTION_COLUMNS, out)
    for lp in rep.layers:
        rho = "n/a" if lp.spearman is None else f"{lp.spearman:.4f}"
        print(f"layer {lp.layer_index}: spearman={rho}{' (ties)' if lp.ties else ''}")
    print(f"wrote {out}")
    return 0


def _add_input(p, aprc_flag=False):
    p.add_argument("--net", required=True, help="network JSON (or its .skyb blob)")
    p.add_argument("--input", required=True, help="spike trace, IDX images, .npy image, or 'random'")
    p.add_argument("--timesteps", "-T", type=_positive, help="timesteps for rate encoding")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--image-index", type=int, default=0)
    p.add_argument("--out-dir")
    if aprc_flag:
        p.add_argument("--aprc", choices=("on", "off"), default="off")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skydiver", description="SNN workload-balance simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded synthetic network")
    p.add_argument("--layers", required=True, help="e.g. 160x80x3-8C3-16C3-32C3")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--fan-in-scaled", action="store_true", help="weight std = sigma / sqrt(fan_in)")
    p.add_argument("--v-th", type=float, default=1.0)
    p.add_argument("--pad", type=int, default=0)
    p.add_argument("--stride", type=_positive, default=1)
    p.add_argument("--input-shape", type=_shape, help="HxW[xC], overrides the topology prefix")
    p.add_argument("--name")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="simulate one schedule")
    _add_input(p, aprc_flag=True)
    p.add_argument("--schedule", choices=("baseline", "cbws"), default="cbws")
    p.add_argument("--hw", default="", help="e.g. N=4,streams=4,clusters=8,clock=200e6")
    p.add_argument("--negative", choices=("clip", "abs"), default="clip")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="baseline/cbws x aprc off/on matrix")
    _add_input(p)
    p.add_argument("--matrix", default="all", help="'all' or e.g. baseline:off,cbws:on")
    p.add_argument("--hw", default="")
    p.add_argument("--negative", choices=("clip", "abs"), default="clip")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("profile", help="per-layer and per-channel sparsity")
    _add_input(p, aprc_flag=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("proportion", help="filter magnitude vs channel spike counts")
    _add_input(p, aprc_flag=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_proportion)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"skydiver: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError) as e:
        print(f"skydiver: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, NumericDomainError, BudgetError) as e:
        print(f"skydiver: model error: {e}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
