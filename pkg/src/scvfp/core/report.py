from __future__ import annotations

import logging
from dataclasses import asdict
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from .types import MetricReport

logger = logging.getLogger(__name__)

HASH_PREFIX = "# runspec_sha256="


def write_csv(frame: pd.DataFrame, path: Path, spec_hash: str | None) -> None:
    """CSV with a header row, preceded by the RunSpec hash as a comment line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(f"{HASH_PREFIX}{spec_hash or 'none'}\n")
        frame.to_csv(f, index=False, lineterminator="\n", float_format="%.17g")
    logger.debug("Wrote %d rows to %s", len(frame), path)


def read_csv(path: Path) -> pd.DataFrame:
    """Read a CSV written by ``write_csv`` (or any plain CSV with a header row)."""
    with path.open("r", encoding="utf-8") as f:
        first = f.readline()
    skip = 1 if first.startswith("#") else 0
    return pd.read_csv(path, skiprows=skip)


def read_spec_hash(path: Path) -> str | None:
    with path.open("r", encoding="utf-8") as f:
        first = f.readline().strip()
    return first[len(HASH_PREFIX):] if first.startswith(HASH_PREFIX) else None


def metric_report_frame(report: MetricReport, split: str) -> pd.DataFrame:
    row = asdict(report)
    row.pop("step_cosines")
    row["split"] = split
    return pd.DataFrame([row], columns=["split", "windows", "mse", "psnr", "mean_cosine", "persistence_mse"])


def step_cosine_frame(step_cosines: List[float]) -> pd.DataFrame:
    return pd.DataFrame({"step": range(1, len(step_cosines) + 1), "mean_cosine": step_cosines})


def write_pgm(path: Path, image: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError(f"PGM needs a 2-D uint8 image, got {image.dtype} {image.shape}")
    height, width = image.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + image.tobytes())
