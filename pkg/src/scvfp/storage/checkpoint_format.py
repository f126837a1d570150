"""SCVF checkpoint codec.

Layout (little-endian)::

    b"SCVF"  u32 version
    u32 len  canonical RunSpec JSON (utf-8)
    u32 epoch
    u64 x4   PRNG words, u32 has_cached, f64 cached gaussian
    u32 n    then per tensor: u32 len + name, u32 rank, u32 x rank shape,
             u32 dtype code (4 = float32, 8 = float64), values
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

import numpy as np

from ..core.config import RunSpec, run_spec_from_json
from ..core.errors import BadMagicError, FormatError, VersionMismatchError
from ..core.model import ModelState
from ..utils.prng import PrngState
from .binary_io import ByteReader, ByteWriter

logger = logging.getLogger(__name__)

MAGIC = b"SCVF"
VERSION = 1
_DTYPES: Dict[int, str] = {4: "<f4", 8: "<f8"}


@dataclass
class Checkpoint:
    spec: RunSpec
    epoch: int
    prng: PrngState
    state: ModelState

    def to_bytes(self) -> bytes:
        out = ByteWriter()
        out.raw(MAGIC)
        out.u32(VERSION)
        out.text(self.spec.canonical_json())
        out.u32(self.epoch)
        out.u64(*self.prng.words)
        cached = self.prng.cached_gaussian
        out.u32(0 if cached is None else 1)
        out.f64(0.0 if cached is None else cached)
        out.u32(len(self.state))
        for name, value in self.state.items():
            code = value.dtype.itemsize
            if code not in _DTYPES:
                raise FormatError(f"{name}: unsupported dtype {value.dtype}")
            out.text(name)
            out.u32(value.ndim)
            out.u32(*value.shape)
            out.u32(code)
            out.array(value, _DTYPES[code])
        return out.getvalue()

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:4] != MAGIC:
            raise BadMagicError(f"not a checkpoint (magic {data[:4]!r})")
        reader = ByteReader(data, "checkpoint")
        reader.take(4)
        (version,) = reader.u32()
        if version != VERSION:
            raise VersionMismatchError(f"checkpoint version {version} is not supported")
        spec = run_spec_from_json(reader.text())
        (epoch,) = reader.u32()
        w0, w1, w2, w3 = reader.u64(4)
        (has_cached,) = reader.u32()
        cached = reader.f64()
        prng = PrngState((w0, w1, w2, w3), cached if has_cached else None)
        (count,) = reader.u32()
        arrays: Dict[str, np.ndarray] = {}
        for _ in range(count):
            name = reader.text()
            (rank,) = reader.u32()
            shape = reader.u32(rank)
            (code,) = reader.u32()
            if code not in _DTYPES:
                raise FormatError(f"{name}: unknown dtype code {code}")
            size = int(np.prod(shape)) if shape else 1
            arrays[name] = reader.array(size, _DTYPES[code]).astype(
                np.float32 if code == 4 else np.float64
            ).reshape(shape)
        reader.finish()
        state = ModelState(arrays)
        if not state.matches(spec.model):
            raise FormatError("checkpoint tensors do not match the stored model config")
        return cls(spec=spec, epoch=epoch, prng=prng, state=state)


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> str:
    data = checkpoint.to_bytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    logger.info("Saved checkpoint epoch=%d to %s sha256=%s", checkpoint.epoch, path, digest)
    return digest


def load_checkpoint(path: Path) -> Checkpoint:
    return Checkpoint.from_bytes(path.read_bytes())
