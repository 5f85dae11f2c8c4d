"""Versioned binary checkpoints with bit-exact round trips.

Layout (little endian):

    magic ``MISACKP1`` | version u32 | header length u64 | header JSON (utf-8)
    | raw float64 buffers

The header lists every tensor name and shape in order; buffers follow in that
exact order: all parameters, then all Adam first moments, then all second
moments. Optimizer scalars, the epoch counter, the shuffle RNG state, and the
training history rows ride in the header, so resuming from a checkpoint
replays the uninterrupted run bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MISACKP1"
VERSION = 1


class CheckpointFormatError(ValueError):
    """On-disk bytes do not match the checkpoint format."""


@dataclass
class Checkpoint:
    model_kind: str
    epoch: int
    param_names: list[str]
    params: list[np.ndarray]
    adam_first: list[np.ndarray]
    adam_second: list[np.ndarray]
    adam_scalars: dict
    rng_state: dict | None
    metric_rows: list
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    if len(ckpt.params) != len(ckpt.param_names):
        raise CheckpointFormatError("one name per parameter tensor is required")
    if len(ckpt.adam_first) != len(ckpt.params) or len(ckpt.adam_second) != len(ckpt.params):
        raise CheckpointFormatError("Adam moments must mirror the parameter list")
    header = {
        "model_kind": ckpt.model_kind,
        "epoch": int(ckpt.epoch),
        "tensors": [{"name": n, "shape": list(p.shape)}
                    for n, p in zip(ckpt.param_names, ckpt.params)],
        "adam_scalars": ckpt.adam_scalars,
        "rng_state": ckpt.rng_state,
        "metric_rows": ckpt.metric_rows,
        "extra": ckpt.extra,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(VERSION).tobytes())
        f.write(np.uint64(len(blob)).tobytes())
        f.write(blob)
        for group in (ckpt.params, ckpt.adam_first, ckpt.adam_second):
            for arr in group:
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointFormatError("bad magic; not a checkpoint file")
    version = int(np.frombuffer(raw, "<u4", count=1, offset=8)[0])
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    hlen = int(np.frombuffer(raw, "<u8", count=1, offset=12)[0])
    header = json.loads(raw[20:20 + hlen].decode())

    shapes = [tuple(t["shape"]) for t in header["tensors"]]
    names = [t["name"] for t in header["tensors"]]
    sizes = [int(np.prod(s)) if s else 1 for s in shapes]
    total = sum(sizes) * 3
    body = np.frombuffer(raw, "<f8", offset=20 + hlen)
    if body.size != total:
        raise CheckpointFormatError(
            f"buffer holds {body.size} float64 values, header demands {total}")

    def take(start):
        arrays, pos = [], start
        for shape, size in zip(shapes, sizes):
            arrays.append(body[pos:pos + size].reshape(shape).copy())
            pos += size
        return arrays, pos

    params, pos = take(0)
    first, pos = take(pos)
    second, _ = take(pos)
    return Checkpoint(
        model_kind=header["model_kind"],
        epoch=header["epoch"],
        param_names=names,
        params=params,
        adam_first=first,
        adam_second=second,
        adam_scalars=header["adam_scalars"],
        rng_state=header["rng_state"],
        metric_rows=header["metric_rows"],
        extra=header["extra"],
    )
