"""Binary checkpoint container.

Layout: ``b"NTK1"``, a little-endian uint32 header length, the UTF-8 JSON
header, then every tensor as raw little-endian float32 in header order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..corpus import Alphabet
from ..errors import AlphabetError, MalformedFileError, ShapeError, VersionError
from .tagger import TaggerConfig, TaggerModel

MAGIC = b"NTK1"
VERSION = 1


def checkpoint_bytes(model: TaggerModel, extra: dict | None = None) -> bytes:
    tensors, payload, offset = [], [], 0
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name].data, dtype="<f4")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes})
        payload.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "version": VERSION,
        "config": model.config.to_dict(),
        "alphabet_sha256": model.alphabet.digest(),
        "alphabet": model.alphabet.symbols,
        "tensors": tensors,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return MAGIC + struct.pack("<I", len(blob)) + blob + b"".join(payload)


def save_checkpoint(model: TaggerModel, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_bytes(checkpoint_bytes(model, extra))


def read_header(raw: bytes) -> tuple[dict, int]:
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise VersionError("not an NTK1 checkpoint (bad magic)")
    (n,) = struct.unpack("<I", raw[4:8])
    if 8 + n > len(raw):
        raise MalformedFileError("checkpoint header is truncated")
    try:
        header = json.loads(raw[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VersionError(f"corrupted checkpoint header: {exc}") from exc
    if not isinstance(header, dict) or header.get("version") != VERSION:
        raise VersionError(f"unsupported checkpoint version {header.get('version') if isinstance(header, dict) else None!r}")
    return header, 8 + n


def load_checkpoint(path: str | Path, alphabet: Alphabet | None = None) -> TaggerModel:
    """Rebuild a tagger; if ``alphabet`` is given it must match the stored one."""
    raw = Path(path).read_bytes()
    header, start = read_header(raw)
    stored = Alphabet(header["alphabet"])
    if stored.digest() != header["alphabet_sha256"]:
        raise MalformedFileError("alphabet hash does not match stored alphabet")
    if alphabet is not None and alphabet.digest() != header["alphabet_sha256"]:
        raise AlphabetError("checkpoint was trained with a different alphabet")
    params = {}
    for t in header["tensors"]:
        lo = start + t["offset"]
        hi = lo + t["nbytes"]
        if hi > len(raw):
            raise MalformedFileError(f"checkpoint truncated inside tensor {t['name']!r}")
        arr = np.frombuffer(raw[lo:hi], dtype="<f4").astype(np.float32)
        if arr.size != int(np.prod(t["shape"])):
            raise ShapeError(f"tensor {t['name']!r} size does not match its shape")
        params[t["name"]] = arr.reshape(t["shape"])
    expected_end = start + sum(t["nbytes"] for t in header["tensors"])
    if expected_end != len(raw):
        raise MalformedFileError("checkpoint has trailing or missing bytes")
    return TaggerModel(TaggerConfig(**header["config"]), stored, params)
