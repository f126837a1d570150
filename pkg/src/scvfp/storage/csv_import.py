import logging
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd

from ..core.errors import FormatError, ShapeError
from .eseq_format import EmbeddingSequenceFile

logger = logging.getLogger(__name__)


def read_embedding_csv(path: Path) -> np.ndarray:
    """One frame per line, d comma-separated decimals, no header."""
    try:
        frame = pd.read_csv(path, header=None, dtype=np.float64, skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise FormatError(f"{path}: no embedding rows") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value ({exc})") from exc
    values = frame.to_numpy(dtype=np.float64)
    if np.isnan(values).any():
        raise FormatError(f"{path}: ragged or empty fields")
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: non-finite values")
    return values.astype(np.float32)


def import_csv_files(paths: Iterable[Path]) -> EmbeddingSequenceFile:
    """One ESEQ1 sequence per CSV, in the order given."""
    sequences: List[np.ndarray] = []
    d = None
    for path in paths:
        seq = read_embedding_csv(path)
        if d is None:
            d = seq.shape[1]
        elif seq.shape[1] != d:
            raise ShapeError(f"{path}: width {seq.shape[1]} differs from {d}")
        sequences.append(seq)
        logger.debug("Imported %s: %d frames", path, seq.shape[0])
    if d is None:
        raise FormatError("no CSV files to import")
    return EmbeddingSequenceFile(d=d, sequences=sequences)
