"""File formats.

Network
    JSON header ``{name, version, weights_file, layers: [...]}`` plus a sidecar
    weights blob: ``b"SKYB"``, one version byte, then every layer's weights as
    little-endian float32 in (filter, channel, row, col) order, layers
    back to back.  Each layer records its ``weights_ref`` (offset and count in
    floats) into the blob.

Spike trace
    Four little-endian uint32 (T, C, H, W), then the spikes in (t, c, y, x)
    order, each row of W bits packed MSB-first and padded to a byte boundary.

IDX images
    The MNIST container: big-endian magic 0x00000803, big-endian uint32
    dimensions, unsigned bytes.

Reports
    JSON (full ``SimReport``) and CSV summary with columns
    ``layer,mode,balance_ratio,latency_cycles``.  Floats are written with six
    decimals; an idle layer has an empty balance ratio.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .accel import SimReport, balance_ratio
from .errors import ConfigError, FormatError
from .snn import DTYPE, LayerSpec, NetworkSpec, SpikeTrain

__all__ = [
    "BLOB_MAGIC",
    "BLOB_VERSION",
    "save_network",
    "load_network",
    "save_spike_trace",
    "load_spike_trace",
    "load_idx_images",
    "load_idx_labels",
    "write_report",
    "read_report_json",
    "read_csv",
    "write_csv",
    "atomic_write",
    "REPORT_CSV_COLUMNS",
]

BLOB_MAGIC = b"SKYB"
BLOB_VERSION = 1
TRACE_HEADER = struct.Struct("<4I")
REPORT_CSV_COLUMNS = ["layer", "mode", "balance_ratio", "latency_cycles"]


def atomic_write(path, data) -> None:
    """Write bytes or text through a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _paths(path) -> tuple:
    path = Path(path)
    if path.suffix == ".skyb":
        return path.with_suffix(".json"), path
    return path, path.with_suffix(".skyb")


def save_network(net: NetworkSpec, path) -> None:
    """Write ``<stem>.json`` and ``<stem>.skyb``; ``path`` may name either."""
    json_path, blob_path = _paths(path)
    layers, chunks, offset = [], [], 0
    for layer in net.layers:
        w = np.ascontiguousarray(layer.weights, dtype="<f4")
        layers.append({
            "kind": layer.kind,
            "C": layer.in_channels,
            "M": layer.out_channels,
            "R": layer.kernel_size,
            "H": layer.in_height,
            "W": layer.in_width,
            "pad": layer.pad,
            "stride": layer.stride,
            "v_th": layer.v_th,
            "bias": [float(b) for b in layer.bias],
            "weights_ref": {"offset": offset, "count": int(w.size)},
        })
        chunks.append(w.tobytes())
        offset += w.size
    doc = {"name": net.name, "version": BLOB_VERSION, "weights_file": blob_path.name, "layers": layers}
    atomic_write(blob_path, BLOB_MAGIC + bytes([BLOB_VERSION]) + b"".join(chunks))
    atomic_write(json_path, json.dumps(doc, indent=2) + "\n")


def load_network(path) -> NetworkSpec:
    json_path, blob_path = _paths(path)
    try:
        doc = json.loads(Path(json_path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{json_path}: invalid JSON ({e})") from None
    try:
        specs = doc["layers"]
        blob_path = json_path.parent / doc.get("weights_file", blob_path.name)
    except (KeyError, TypeError):
        raise FormatError(f"{json_path}: missing 'layers'") from None
    raw = Path(blob_path).read_bytes()
    if len(raw) < 5 or raw[:4] != BLOB_MAGIC:
        raise FormatError(f"{blob_path}: bad magic {raw[:4]!r}, expected {BLOB_MAGIC!r}")
    if raw[4] != BLOB_VERSION:
        raise FormatError(f"{blob_path}: unsupported weights version {raw[4]} (supported: {BLOB_VERSION})")
    try:
        counts = [int(L["M"]) * int(L["C"]) * int(L["R"]) ** 2 for L in specs]
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"{json_path}: layer entries need integer C, M, R") from None
    expected = 5 + 4 * sum(counts)
    if len(raw) != expected:
        raise FormatError(f"{blob_path}: weights blob is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=5)

    layers, offset = [], 0
    for i, (L, n) in enumerate(zip(specs, counts)):
        ref = L.get("weights_ref", {})
        off = int(ref.get("offset", offset))
        if int(ref.get("count", n)) != n or off + n > data.size:
            raise FormatError(f"layer {i}: weights_ref {ref} inconsistent with its shape")
        w = data[off : off + n].astype(DTYPE).reshape(int(L["M"]), int(L["C"]), int(L["R"]), int(L["R"]))
        try:
            layers.append(LayerSpec(
                kind=L["kind"], in_channels=int(L["C"]), out_channels=int(L["M"]),
                kernel_size=int(L["R"]), in_height=int(L["H"]), in_width=int(L.get("W", L["H"])),
                weights=w, bias=np.asarray(L.get("bias", [0.0] * int(L["M"])), dtype=DTYPE),
                pad=int(L.get("pad", 0)), stride=int(L.get("stride", 1)), v_th=float(L.get("v_th", 1.0)),
            ))
        except KeyError as e:
            raise FormatError(f"layer {i}: missing field {e}") from None
        offset = off + n
    return NetworkSpec(layers, name=doc.get("name", "net"))


def save_spike_trace(train: SpikeTrain, path) -> None:
    T, C, H, W = train.shape
    packed = np.packbits(train.bits, axis=-1)
    atomic_write(path, TRACE_HEADER.pack(T, C, H, W) + packed.tobytes())


def load_spike_trace(path) -> SpikeTrain:
    raw = Path(path).read_bytes()
    if len(raw) < TRACE_HEADER.size:
        raise FormatError(f"{path}: {len(raw)} bytes is shorter than the 16-byte header")
    T, C, H, W = TRACE_HEADER.unpack_from(raw)
    row = (W + 7) // 8
    expected = TRACE_HEADER.size + T * C * H * row
    if len(raw) != expected:
        raise FormatError(f"{path}: trace is {len(raw)} bytes, header (T={T}, C={C}, H={H}, W={W}) implies {expected}")
    packed = np.frombuffer(raw, dtype=np.uint8, offset=TRACE_HEADER.size).reshape(T, C, H, row)
    bits = np.unpackbits(packed, axis=-1, count=W).astype(np.bool_)
    return SpikeTrain(bits)


def _read_idx(path, magic: int, ndim: int, limit: Optional[int]):
    with open(path, "rb") as fh:
        head = fh.read(4 + 4 * ndim)
        if len(head) < 4 + 4 * ndim:
            raise FormatError(f"{path}: truncated IDX header")
        got = struct.unpack(">I", head[:4])[0]
        if got != magic:
            raise FormatError(f"{path}: bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
        dims = struct.unpack(f">{ndim}I", head[4:])
        n = dims[0] if limit is None else min(dims[0], int(limit))
        item = int(np.prod(dims[1:], dtype=np.int64)) if ndim > 1 else 1
        want = n * item
        data = fh.read(want)
    if len(data) < want:
        raise FormatError(f"{path}: short read, {len(data)} of {want} data bytes")
    return np.frombuffer(data, dtype=np.uint8).reshape((n,) + tuple(dims[1:]))


def load_idx_images(path, limit: Optional[int] = None) -> np.ndarray:
    """``(n, H, W)`` float64 images scaled by 1/255."""
    return _read_idx(path, 0x00000803, 3, limit) / 255.0


def load_idx_labels(path, limit: Optional[int] = None) -> np.ndarray:
    return _read_idx(path, 0x00000801, 1, limit).astype(np.int64)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def write_csv(rows: Iterable[dict], columns: Sequence[str], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    atomic_write(path, buf.getvalue())


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_report(report: Optional[SimReport], fmt: str, path) -> None:
    """``fmt`` is ``json`` or ``csv``; a ``None`` report writes a header-only CSV."""
    if fmt == "json":
        if report is None:
            raise ConfigError("cannot write an empty JSON report")
        atomic_write(path, json.dumps(report.to_dict(), indent=1, sort_keys=True, default=_json_default) + "\n")
    elif fmt == "csv":
        rows = []
        if report is not None:
            mode = report.metadata.get("mode", "")
            for l in range(report.n_layers):
                rows.append({"layer": l, "mode": mode, "balance_ratio": balance_ratio(report, l),
                             "latency_cycles": report.layer_cycles(l)})
        write_csv(rows, REPORT_CSV_COLUMNS, path)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")


def read_report_json(path) -> SimReport:
    try:
        return SimReport.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: not a simulation report ({e})") from None
