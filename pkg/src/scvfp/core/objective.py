"""Training losses and evaluation metrics in embedding space."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ShapeError, UndefinedMetricError
from .tensor import (
    Tensor,
    absolute,
    add,
    add_all,
    mean,
    row_cosine,
    scalar_mul,
    sqnorm,
    sub,
)

PSNR_PEAK = 255.0
COSINE_EPS = 1e-8


def embedding_mse(e: Tensor, e_hat: Tensor) -> Tensor:
    """Squared L2 error, summed over dimensions and averaged over the batch rows."""
    if e.shape != e_hat.shape:
        raise ShapeError(f"embedding widths differ: {e.shape} vs {e_hat.shape}")
    rows = e.shape[0] if e.ndim == 2 else 1
    return scalar_mul(sqnorm(sub(e, e_hat)), 1.0 / rows)


def semantic_similarity_loss(heads_by_block: Sequence[Sequence[Tensor]]) -> Tensor:
    """Mean absolute row-wise cosine between head pairs, scaled by 1/(N(N-1)), averaged over blocks.

    Each head is ``M x w`` or ``b x M x w``; the row mean also averages the batch.
    """
    if not heads_by_block:
        raise ShapeError("semantic similarity loss needs at least one block")
    per_block: List[Tensor] = []
    for heads in heads_by_block:
        n = len(heads)
        if n == 0:
            raise ShapeError("a block produced no heads")
        shape = heads[0].shape
        if any(h.shape != shape for h in heads):
            raise ShapeError(f"inconsistent head shapes: {[h.shape for h in heads]}")
        if n == 1:
            per_block.append(Tensor(np.zeros((), dtype=heads[0].dtype)))
            continue
        pairs = [
            mean(absolute(row_cosine(heads[i], heads[j], COSINE_EPS)))
            for i in range(n)
            for j in range(i + 1, n)
        ]
        per_block.append(scalar_mul(add_all(pairs), 1.0 / (n * (n - 1))))
    return scalar_mul(add_all(per_block), 1.0 / len(per_block))


@dataclass
class LossBreakdown:
    mse_term: Tensor
    ss_term: Tensor
    lam: float
    total: Tensor

    @property
    def values(self) -> Tuple[float, float, float]:
        return self.mse_term.item(), self.ss_term.item(), self.total.item()


def total_loss(
    e: Tensor, e_hat: Tensor, heads_by_block: Sequence[Sequence[Tensor]], lam: float
) -> LossBreakdown:
    if lam < 0:
        raise ValueError(f"ssl weight must be >= 0, got {lam}")
    mse_term = embedding_mse(e, e_hat)
    ss_term = semantic_similarity_loss(heads_by_block)
    total = add(mse_term, scalar_mul(ss_term, lam))
    return LossBreakdown(mse_term=mse_term, ss_term=ss_term, lam=lam, total=total)


def metric_psnr(mse: float) -> float:
    if not mse > 0 or not math.isfinite(mse):
        raise UndefinedMetricError(f"PSNR is undefined for mse={mse}")
    return 10.0 * math.log10(PSNR_PEAK ** 2 / mse)


def psnr_or_inf(mse: float) -> float:
    """PSNR with a +inf sentinel for a perfect predictor."""
    if mse == 0.0:
        return math.inf
    return metric_psnr(mse)


def cosine_similarity(e: np.ndarray, e_hat: np.ndarray) -> float:
    denom = float(np.linalg.norm(e) * np.linalg.norm(e_hat))
    if denom <= COSINE_EPS:
        return 0.0
    return float(np.dot(e, e_hat) / denom)


def row_cosines(e: np.ndarray, e_hat: np.ndarray) -> np.ndarray:
    """Cosine of every matching row pair of two ``n x d`` arrays."""
    denom = np.linalg.norm(e, axis=-1) * np.linalg.norm(e_hat, axis=-1)
    dots = (e * e_hat).sum(axis=-1)
    return np.where(denom > COSINE_EPS, dots / np.where(denom > COSINE_EPS, denom, 1.0), 0.0)


def frame_mse(e: np.ndarray, e_hat: np.ndarray) -> np.ndarray:
    """Per-row squared L2 error."""
    diff = np.asarray(e, dtype=np.float64) - np.asarray(e_hat, dtype=np.float64)
    return (diff ** 2).sum(axis=-1)


def error_map(e: np.ndarray, e_hat: np.ndarray, grid_cols: int) -> Tuple[np.ndarray, np.ndarray]:
    """``|e - e_hat|`` laid out row-major on a grid, plus a max-normalized 8-bit copy.

    Widths that ``grid_cols`` does not divide are zero-padded.
    """
    if grid_cols < 1:
        raise ValueError(f"grid_cols must be >= 1, got {grid_cols}")
    diff = np.abs(np.asarray(e, dtype=np.float64) - np.asarray(e_hat, dtype=np.float64)).ravel()
    rows = -(-diff.size // grid_cols)
    padded = np.zeros(rows * grid_cols)
    padded[: diff.size] = diff
    grid = padded.reshape(rows, grid_cols)
    peak = grid.max()
    if peak > 0:
        image = np.rint(grid / peak * 255.0).astype(np.uint8)
    else:
        image = np.zeros(grid.shape, dtype=np.uint8)
    return grid, image


def head_cosines(heads_by_block: Sequence[Sequence[Tensor]]) -> np.ndarray:
    """Every head-pair row cosine, flattened; these are the values the loss takes |.| of."""
    values = [
        row_cosine(heads[i], heads[j], COSINE_EPS).data.ravel()
        for heads in heads_by_block
        for i in range(len(heads))
        for j in range(i + 1, len(heads))
    ]
    return np.concatenate(values) if values else np.zeros(0)
