"""Binary model checkpoints.

Layout: 5-byte magic ``FFCK1``, a little-endian u32 header length, a UTF-8
JSON header (model config, token vocabulary, dtype, array manifest), then the
raw parameter arrays little-endian in canonical order. Floats are written
bit-for-bit, so save followed by load is an exact round trip.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import ModelConfig, ModelParameters, _array_shapes

MAGIC = b"FFCK1"

_DTYPES = {"float64": "<f8", "float32": "<f4"}


class CheckpointError(Exception):
    """Raised when a checkpoint file is malformed or inconsistent."""


def _dtype_name(dtype: np.dtype) -> str:
    name = np.dtype(dtype).name
    if name not in _DTYPES:
        raise CheckpointError(f"unsupported parameter dtype {name!r}")
    return name


def save_checkpoint(path: str | Path, params: ModelParameters,
                    vocab: Sequence[str], meta: dict | None = None) -> None:
    dtype_name = _dtype_name(params.dtype)
    header = {
        "format": "FFCK1",
        "config": params.config.to_json(),
        "vocab": list(vocab),
        "dtype": dtype_name,
        "arrays": [[name, list(shape)] for name, shape in _array_shapes(params.config)],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        le = np.dtype(_DTYPES[dtype_name])
        for _, arr in params.items():
            fh.write(np.ascontiguousarray(arr, dtype=le).tobytes())
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[ModelParameters, list[str], dict]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    (header_len,) = struct.unpack_from("<I", blob, len(MAGIC))
    start = len(MAGIC) + 4
    if start + header_len > len(blob):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format") != "FFCK1":
        raise CheckpointError(f"{path}: unknown checkpoint format {header.get('format')!r}")
    try:
        config = ModelConfig.from_json(header["config"])
        vocab = [str(t) for t in header["vocab"]]
        dtype_name = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: invalid header: {exc}") from exc
    if dtype_name not in _DTYPES:
        raise CheckpointError(f"{path}: unsupported dtype {dtype_name!r}")
    if len(vocab) != config.vocab_size:
        raise CheckpointError(f"{path}: vocabulary length {len(vocab)} does not match "
                              f"config vocab_size {config.vocab_size}")
    expected = [[name, list(shape)] for name, shape in _array_shapes(config)]
    if header.get("arrays") != expected:
        raise CheckpointError(f"{path}: array manifest does not match the model layout")
    le = np.dtype(_DTYPES[dtype_name])
    offset = start + header_len
    arrays: dict[str, np.ndarray] = {}
    for name, shape in _array_shapes(config):
        n_bytes = int(np.prod(shape, dtype=np.int64)) * le.itemsize
        chunk = blob[offset : offset + n_bytes]
        if len(chunk) != n_bytes:
            raise CheckpointError(f"{path}: truncated array {name!r}")
        arrays[name] = np.frombuffer(chunk, dtype=le).reshape(shape).astype(le.base, copy=True)
        offset += n_bytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return ModelParameters(config, arrays), vocab, header.get("meta", {})


def checkpoint_digest(path: str | Path) -> str:
    """sha256 of the checkpoint file; doubles as the served model version."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
