"""Self-describing binary checkpoints with byte-stable serialization.

Layout: a magic string, an 8-byte little-endian header length, a JSON
header (sorted keys, fixed separators, so identical content always
serializes identically), then the raw little-endian float64 tensor
buffers at the offsets the header declares. No timestamps or other
environment-dependent bytes exist anywhere in the file, which is what
makes repeated saves of identical state byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .context import DepVocab
from .errors import CheckpointError
from .model import CoTrainModel, ModelSpec

MAGIC = b"TXGCKPT1\n"
FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, model: CoTrainModel, extra: dict | None = None) -> None:
    params = model.parameters()
    manifest = []
    offset = 0
    buffers = []
    for p in params:
        buf = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        manifest.append(
            {
                "name": p.name,
                "shape": list(p.data.shape),
                "offset": offset,
                "decay": p.decay,
            }
        )
        offset += len(buf)
        buffers.append(buf)
    header = {
        "format": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "vocab": model.vocab.to_dict(),
        "extra": extra or {},
        "tensors": manifest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for buf in buffers:
            fh.write(buf)


def _read(path: Path) -> tuple[dict, int, bytes]:
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path.name}: not a model checkpoint")
    cursor = len(MAGIC)
    if len(raw) < cursor + 8:
        raise CheckpointError(f"{path.name}: truncated header length")
    length = int.from_bytes(raw[cursor : cursor + 8], "little")
    cursor += 8
    if len(raw) < cursor + length:
        raise CheckpointError(f"{path.name}: truncated header")
    try:
        header = json.loads(raw[cursor : cursor + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path.name}: corrupt header") from exc
    if header.get("format") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path.name}: unsupported format {header.get('format')!r}"
        )
    return header, cursor + length, raw


def read_header(path: str | Path) -> dict:
    header, _, _ = _read(Path(path))
    return header


def load_checkpoint(path: str | Path) -> tuple[CoTrainModel, dict]:
    """Rebuild the model a checkpoint describes; returns (model, extra)."""
    path = Path(path)
    header, body_start, raw = _read(path)
    try:
        spec = ModelSpec.from_dict(header["spec"])
        vocab = DepVocab.from_dict(header["vocab"])
        manifest = header["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path.name}: malformed header fields") from exc

    model = CoTrainModel(spec, vocab)
    by_name = {p.name: p for p in model.parameters()}
    if sorted(by_name) != sorted(entry["name"] for entry in manifest):
        raise CheckpointError(f"{path.name}: tensor names do not match this model layout")

    for entry in manifest:
        param = by_name[entry["name"]]
        shape = tuple(entry["shape"])
        if shape != param.data.shape:
            raise CheckpointError(
                f"{path.name}: tensor {entry['name']} has shape {shape}, "
                f"model expects {param.data.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        start = body_start + entry["offset"]
        end = start + count * 8
        if end > len(raw):
            raise CheckpointError(f"{path.name}: truncated tensor {entry['name']}")
        param.data = (
            np.frombuffer(raw[start:end], dtype="<f8").astype(np.float64).reshape(shape)
        )
    return model, header.get("extra", {})
