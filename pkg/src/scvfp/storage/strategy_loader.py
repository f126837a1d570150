import logging
from pathlib import Path
from typing import Callable, Dict

from .csv_import import import_csv_files
from .eseq_format import EmbeddingSequenceFile, read_eseq
from .local_strategy import LocalStrategy

logger = logging.getLogger(__name__)


def _from_eseq(path: Path) -> EmbeddingSequenceFile:
    return read_eseq(path)


def _from_csv(path: Path) -> EmbeddingSequenceFile:
    return import_csv_files(LocalStrategy({"base_path": str(path)}).csv_files())


SOURCES: Dict[str, Callable[[Path], EmbeddingSequenceFile]] = {
    "eseq": _from_eseq,
    "csv": _from_csv,
}


def detect_source(path: Path) -> str:
    if path.is_dir() or path.suffix.lower() == ".csv":
        return "csv"
    return "eseq"


def load_sequences(path: Path, source: str | None = None) -> EmbeddingSequenceFile:
    """Load embedding sequences from an ESEQ1 file, a CSV file or a directory of CSVs."""
    kind = (source or detect_source(path)).lower().strip()
    if kind not in SOURCES:
        available = ", ".join(SOURCES)
        raise ValueError(f"Unknown sequence source: '{kind}'. Available sources: {available}")
    if not path.exists():
        raise FileNotFoundError(f"data path does not exist: {path}")
    return SOURCES[kind](path)
