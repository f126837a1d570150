"""ESEQ1: a flat file of embedding sequences.

Layout (all little-endian): ``b"ESEQ"``, u32 version (1), u32 d, u32 count, then
per sequence a u32 length T followed by T*d float32 values, row-major.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from ..core.errors import BadMagicError, ShapeError, VersionMismatchError
from .binary_io import ByteReader, ByteWriter

logger = logging.getLogger(__name__)

MAGIC = b"ESEQ"
VERSION = 1


@dataclass
class EmbeddingSequenceFile:
    d: int
    sequences: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ShapeError(f"embedding width must be >= 1, got {self.d}")
        for i, seq in enumerate(self.sequences):
            if seq.ndim != 2 or seq.shape[1] != self.d:
                raise ShapeError(f"sequence {i} must be T x {self.d}, got {seq.shape}")

    @property
    def lengths(self) -> List[int]:
        return [int(seq.shape[0]) for seq in self.sequences]

    def to_bytes(self) -> bytes:
        out = ByteWriter()
        out.raw(MAGIC)
        out.u32(VERSION, self.d, len(self.sequences))
        for seq in self.sequences:
            out.u32(seq.shape[0])
            out.array(seq, "<f4")
        return out.getvalue()

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_bytes(cls, data: bytes) -> "EmbeddingSequenceFile":
        if data[:4] != MAGIC:
            raise BadMagicError(f"not an ESEQ1 file (magic {data[:4]!r})")
        reader = ByteReader(data, "ESEQ1")
        reader.take(4)
        (version,) = reader.u32()
        if version != VERSION:
            raise VersionMismatchError(f"ESEQ version {version} is not supported (expected {VERSION})")
        d, count = reader.u32(2)
        if d < 1:
            raise ShapeError("ESEQ1 header advertises d = 0")
        sequences = []
        for _ in range(count):
            (t,) = reader.u32()
            sequences.append(reader.array(t * d, "<f4").reshape(t, d))
        reader.finish()
        return cls(d=d, sequences=sequences)


def write_eseq(file: EmbeddingSequenceFile, path: Path) -> str:
    """Write ``file`` to ``path`` and return the sha256 of the bytes written."""
    data = file.to_bytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    logger.info("Wrote %d sequences (d=%d) to %s sha256=%s", len(file.sequences), file.d, path, digest)
    return digest


def read_eseq(path: Path) -> EmbeddingSequenceFile:
    file = EmbeddingSequenceFile.from_bytes(path.read_bytes())
    logger.debug("Read %d sequences (d=%d) from %s", len(file.sequences), file.d, path)
    return file
