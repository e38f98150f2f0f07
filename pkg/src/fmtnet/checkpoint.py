"""Model checkpoints: a JSON header line followed by raw float64 blocks.

The header carries the full model config (modality specs, factor bitmasks,
layer/unit counts, summarizer configs, hidden sizes, seed) and a parameter
manifest of names and shapes, in manifest order. The payload is each
parameter's values as little-endian float64, row-major, with no separators.
Round trips are bitwise exact.
"""

from __future__ import annotations

import json

import numpy as np

from .model import build_model, config_from_dict


class CheckpointError(ValueError):
    pass


def save_checkpoint(model, path):
    params = model.parameters()
    header = {
        "config": model.config.to_dict(),
        "params": [{"name": p.name, "shape": list(p.data.shape)} for p in params],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for p in params:
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return path


def load_checkpoint(path):
    with open(path, "rb") as f:
        try:
            header = json.loads(f.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: unreadable header: {e}") from None
        model = build_model(config_from_dict(header["config"]))
        by_name = {p.name: p for p in model.parameters()}
        listed = [entry["name"] for entry in header["params"]]
        if sorted(listed) != sorted(by_name):
            raise CheckpointError(
                f"{path}: parameter manifest does not match the configured model")
        for entry in header["params"]:
            p = by_name[entry["name"]]
            shape = tuple(entry["shape"])
            if shape != p.data.shape:
                raise CheckpointError(
                    f"{path}: {entry['name']}: shape {shape} != model shape {p.data.shape}")
            nbytes = int(np.prod(shape, dtype=np.int64)) * 8
            raw = f.read(nbytes)
            if len(raw) != nbytes:
                raise CheckpointError(f"{path}: truncated block for {entry['name']}")
            p.data = np.frombuffer(raw, dtype="<f8").reshape(shape)
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after the last block")
    return model
