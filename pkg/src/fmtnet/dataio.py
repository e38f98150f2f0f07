"""On-disk dataset format: a directory of headered binary arrays plus metadata.

Every array file starts with a fixed 16-byte header (magic "FMTD", u32
version, u32 rank, u32 reserved) followed by rank u64 dimension sizes and the
payload in row-major order, all little-endian. Features and labels are
float64 (`.f64`), true sequence lengths are uint32 (`lengths.u32`), and
`meta.json` carries names, dims, and the label kind.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import MultimodalBatch

MAGIC = b"FMTD"
FORMAT_VERSION = 1

_DTYPES = {".f64": np.dtype("<f8"), ".u32": np.dtype("<u4")}


class DataFormatError(ValueError):
    pass


def write_array(path, arr):
    path = Path(path)
    dtype = _DTYPES[path.suffix]
    arr = np.ascontiguousarray(arr, dtype=dtype)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, arr.ndim, 0))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(arr.tobytes())


def read_array(path):
    path = Path(path)
    dtype = _DTYPES[path.suffix]
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise DataFormatError(f"{path.name}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, rank, _ = struct.unpack_from("<III", raw, 4)
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path.name}: unsupported version {version}")
    dims = struct.unpack_from(f"<{rank}Q", raw, 16)
    payload = raw[16 + 8 * rank:]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(payload) != expected:
        raise DataFormatError(
            f"{path.name}: payload is {len(payload)} bytes, dims {dims} need {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def save_dataset(batch, outdir):
    """Write meta.json, one X_<name>.f64 per modality, y.f64 and lengths.u32."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": "fmtd",
        "version": FORMAT_VERSION,
        "num_samples": int(batch.n),
        "seq_len": int(batch.seq_len),
        "modalities": [
            {"name": name, "dim": int(batch.input_dim(name))}
            for name in batch.modality_names
        ],
        "label_kind": batch.label_kind,
        "label_dim": int(batch.labels.shape[1]),
        "num_classes": batch.num_classes,
    }
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for name in batch.modality_names:
        write_array(outdir / f"X_{name}.f64", batch.feature(name))
    write_array(outdir / "y.f64", batch.labels)
    write_array(outdir / "lengths.u32", batch.lengths)
    return outdir


def load_dataset(path):
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise DataFormatError(f"{path}: no meta.json, not a dataset directory")
    meta = json.loads(meta_path.read_text())
    n, t = meta["num_samples"], meta["seq_len"]

    lengths = read_array(path / "lengths.u32")
    if lengths.shape != (n,):
        raise DataFormatError(f"lengths.u32: shape {lengths.shape}, expected ({n},)")
    if lengths.max(initial=0) > t or lengths.min(initial=1) < 1:
        raise DataFormatError(f"lengths.u32: values must lie in [1, {t}]")
    mask = np.zeros((n, t), dtype=bool)
    for i, ln in enumerate(lengths):
        mask[i, t - ln:] = True

    names, feats = [], []
    for spec in meta["modalities"]:
        name, dim = spec["name"], spec["dim"]
        file = path / f"X_{name}.f64"
        if not file.exists():
            raise DataFormatError(f"missing file X_{name}.f64 for modality {name!r}")
        x = read_array(file)
        if x.shape != (n, t, dim):
            raise DataFormatError(
                f"modality {name!r}: shape {x.shape}, metadata says ({n}, {t}, {dim})"
            )
        names.append(name)
        feats.append(x)

    labels = read_array(path / "y.f64")
    if labels.shape != (n, meta["label_dim"]):
        raise DataFormatError(
            f"y.f64: shape {labels.shape}, metadata says ({n}, {meta['label_dim']})"
        )
    return MultimodalBatch(
        tuple(names), tuple(feats), mask, labels, meta["label_kind"], meta.get("num_classes")
    )
