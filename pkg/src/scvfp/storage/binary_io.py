"""Little-endian field packing shared by the ESEQ1 and checkpoint codecs."""
from __future__ import annotations

from typing import List, Tuple

import numpy as np
import numpy.typing as npt

from ..core.errors import TrailingDataError, TruncatedFileError


class ByteWriter:
    def __init__(self) -> None:
        self._parts: List[bytes] = []

    def raw(self, data: bytes) -> None:
        self._parts.append(data)

    def u32(self, *values: int) -> None:
        self._parts.append(np.array(values, dtype="<u4").tobytes())

    def u64(self, *values: int) -> None:
        self._parts.append(np.array(values, dtype="<u8").tobytes())

    def f64(self, value: float) -> None:
        self._parts.append(np.array([value], dtype="<f8").tobytes())

    def text(self, value: str) -> None:
        encoded = value.encode("utf-8")
        self.u32(len(encoded))
        self._parts.append(encoded)

    def array(self, values: npt.ArrayLike, dtype: str) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class ByteReader:
    """Sequential reader that raises TruncatedFileError instead of reading past the end."""

    def __init__(self, data: bytes, label: str) -> None:
        self._data = data
        self._pos = 0
        self._label = label

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def take(self, n: int) -> bytes:
        if n < 0 or n > self.remaining:
            raise TruncatedFileError(
                f"{self._label}: need {n} bytes at offset {self._pos}, only {self.remaining} left"
            )
        chunk = self._data[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def u32(self, count: int = 1) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.frombuffer(self.take(4 * count), dtype="<u4"))

    def u64(self, count: int = 1) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.frombuffer(self.take(8 * count), dtype="<u8"))

    def f64(self) -> float:
        return float(np.frombuffer(self.take(8), dtype="<f8")[0])

    def text(self) -> str:
        (n,) = self.u32()
        return self.take(n).decode("utf-8")

    def array(self, count: int, dtype: str) -> np.ndarray:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * width), dtype=dtype).copy()

    def finish(self) -> None:
        if self.remaining:
            raise TrailingDataError(f"{self._label}: {self.remaining} unexpected trailing bytes")
