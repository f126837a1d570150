"""Baseline split-head self-attention and semantic-concentration self-attention.

Rows are time steps, so projections are right-multiplications: ``q = E @ W_q``.
Both blocks are bias-free and unmasked (every frame in the window attends to
every other frame).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

from .errors import ShapeError
from .tensor import Tensor, concat_cols, matmul, slice_cols, softmax_rows, transpose


@dataclass
class MhsaWeights:
    """Per-head d_h x d_h projections (d_h = d/N) and a shared d x d output matrix."""

    w_q: List[Tensor]
    w_k: List[Tensor]
    w_v: List[Tensor]
    w_o: Tensor

    @property
    def heads(self) -> int:
        return len(self.w_q)

    def validate(self, d: int) -> int:
        n = self.heads
        if n < 1 or d % n != 0:
            raise ShapeError(f"baseline attention needs heads to divide d (d={d}, heads={n})")
        d_h = d // n
        for group in (self.w_q, self.w_k, self.w_v):
            if len(group) != n or any(w.shape != (d_h, d_h) for w in group):
                raise ShapeError(f"baseline head projections must be {d_h}x{d_h}")
        if self.w_o.shape != (d, d):
            raise ShapeError(f"baseline W_o must be {d}x{d}, got {self.w_o.shape}")
        return d_h


@dataclass
class ScmhsaWeights:
    """Per-head d x d'_h projections of the full embedding and an (N*d'_h) x d output matrix."""

    w_q: List[Tensor]
    w_k: List[Tensor]
    w_v: List[Tensor]
    w_o: Tensor

    @property
    def heads(self) -> int:
        return len(self.w_q)

    def validate(self, d: int) -> int:
        n = self.heads
        if n < 1:
            raise ShapeError("semantic-concentration attention needs at least one head")
        width = self.w_q[0].shape[-1]
        for group in (self.w_q, self.w_k, self.w_v):
            if len(group) != n or any(w.shape != (d, width) for w in group):
                raise ShapeError(f"head projections must all be {d}x{width}")
        if self.w_o.shape != (n * width, d):
            raise ShapeError(f"W_o must be {n * width}x{d}, got {self.w_o.shape}")
        return width


@dataclass
class AttentionOutput:
    final: Tensor
    heads: List[Tensor]


def attention_core(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(Q K^T / sqrt(w)) V over the whole window."""
    if not (q.shape == k.shape == v.shape):
        raise ShapeError(f"attention widths differ: q{q.shape} k{k.shape} v{v.shape}")
    width = q.shape[-1]
    scores = matmul(q, transpose(k))
    return matmul(softmax_rows(scores, math.sqrt(width)), v)


def mhsa_forward(e: Tensor, weights: MhsaWeights) -> AttentionOutput:
    d = e.shape[-1]
    d_h = weights.validate(d)
    heads = []
    for i in range(weights.heads):
        chunk = slice_cols(e, i * d_h, (i + 1) * d_h)
        q = matmul(chunk, weights.w_q[i])
        k = matmul(chunk, weights.w_k[i])
        v = matmul(chunk, weights.w_v[i])
        heads.append(attention_core(q, k, v))
    final = matmul(concat_cols(heads), weights.w_o)
    return AttentionOutput(final=final, heads=heads)


def scmhsa_forward(e: Tensor, weights: ScmhsaWeights) -> AttentionOutput:
    d = e.shape[-1]
    weights.validate(d)
    heads = []
    for i in range(weights.heads):
        q = matmul(e, weights.w_q[i])
        k = matmul(e, weights.w_k[i])
        v = matmul(e, weights.w_v[i])
        heads.append(attention_core(q, k, v))
    final = matmul(concat_cols(heads), weights.w_o)
    return AttentionOutput(final=final, heads=heads)


def attention_param_count(variant: str, d: int, heads: int, head_width: int) -> int:
    if variant == "mhsa_baseline":
        d_h = d // heads
        return 3 * heads * d_h * d_h + d * d
    return 3 * heads * d * head_width + heads * head_width * d
