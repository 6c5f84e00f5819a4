"""Versioned binary checkpoint container.

Byte layout::

    bytes 0..7    magic b"DLGCOH01"
    bytes 8..15   header length N, unsigned 64-bit little-endian
    bytes 16..16+N  UTF-8 JSON header (sorted keys, no whitespace)
    remainder     payload: the named parameter arrays, concatenated in header
                  order as little-endian 32-bit floats, C order

The header records the model type, full configuration, vocabularies, training
manifest, per-array name/shape/offset, and the SHA-256 of the payload. A
checkpoint therefore reloads without any corpus, and a truncated or corrupted
file fails the checksum. Parameters are stored and used in float32, so a
save/load round trip reproduces scores bit-exactly.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..corpus import Vocabularies
from ..engine.autodiff import Tensor
from ..errors import ChecksumError, DataError
from .linear import LinearRanker, LinearRankerConfig
from .neural import NeuralConfig, NeuralScorer

MAGIC = b"DLGCOH01"
FORMAT_VERSION = 1


def save_checkpoint(model, path) -> None:
    """Serialize a NeuralScorer or LinearRanker."""
    if isinstance(model, NeuralScorer):
        model_type = "neural"
        config = model.config.to_dict()
    elif isinstance(model, LinearRanker):
        model_type = "linear"
        config = model.config.to_dict()
    else:
        raise DataError(f"cannot checkpoint object of type {type(model).__name__}")
    arrays = model.parameter_arrays()
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = data.tobytes()
        entries.append(
            {"name": name, "shape": list(data.shape), "offset": offset, "nbytes": len(raw)}
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "model_type": model_type,
        "config": config,
        "vocabularies": model.vocabularies.to_dict(),
        "manifest": model.manifest,
        "arrays": entries,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        f.write(payload)


def load_checkpoint(path):
    """Reconstruct the saved model; raises ChecksumError on corruption."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise DataError(f"not a checkpoint file: {path}")
    header_len = int.from_bytes(blob[8:16], "little")
    if len(blob) < 16 + header_len:
        raise ChecksumError(f"checkpoint header truncated: {path}")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported checkpoint format version {header.get('format_version')!r}"
        )
    payload = blob[16 + header_len :]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise ChecksumError(
            "checkpoint payload checksum mismatch (truncated or corrupt file)"
        )
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        lo = entry["offset"]
        hi = lo + entry["nbytes"]
        arrays[entry["name"]] = (
            np.frombuffer(payload[lo:hi], dtype="<f4").reshape(entry["shape"]).copy()
        )
    vocabularies = Vocabularies.from_dict(header["vocabularies"])
    manifest = header.get("manifest", {})
    if header["model_type"] == "neural":
        config = NeuralConfig.from_dict(header["config"])
        params = {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}
        model = NeuralScorer(config, vocabularies, params, manifest=manifest)
        return model
    if header["model_type"] == "linear":
        config = LinearRankerConfig.from_dict(header["config"])
        model = LinearRanker(config, vocabularies, arrays["weights"])
        model.manifest = manifest
        return model
    raise DataError(f"unknown model type {header['model_type']!r}")
