"""Strided windowing of embedding sequences and seeded dataset splits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..storage.eseq_format import EmbeddingSequenceFile
from ..utils.prng import Xoshiro256pp
from .errors import EmptyDatasetError

logger = logging.getLogger(__name__)

_ROUNDING_SLACK = 1e-9


@dataclass
class WindowInstance:
    inputs: np.ndarray
    label: np.ndarray
    sequence: int
    start: int
    stride: int

    @property
    def frame_indices(self) -> List[int]:
        m = self.inputs.shape[0]
        return [self.start + k * self.stride for k in range(m + 1)]


@dataclass
class WindowSet:
    """Stacked windows: ``inputs`` is ``n x M x d``, ``labels`` is ``n x d``.

    ``provenance`` rows are (sequence, start, stride).
    """

    inputs: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def d(self) -> int:
        return int(self.inputs.shape[-1])

    @classmethod
    def from_instances(cls, instances: Sequence[WindowInstance]) -> "WindowSet":
        if not instances:
            raise EmptyDatasetError("no windows")
        return cls(
            inputs=np.stack([w.inputs for w in instances]),
            labels=np.stack([w.label for w in instances]),
            provenance=np.array([(w.sequence, w.start, w.stride) for w in instances], dtype=np.int64),
        )

    def take(self, indices: Sequence[int]) -> "WindowSet":
        idx = np.asarray(indices, dtype=np.int64)
        return WindowSet(
            inputs=self.inputs[idx], labels=self.labels[idx], provenance=self.provenance[idx]
        )


def window_count(length: int, m: int, stride: int, disjoint: bool = False) -> int:
    span = m * stride
    if length <= span:
        return 0
    if disjoint:
        return (length - span - 1) // (span + 1) + 1
    return length - span


def make_windows(
    file: EmbeddingSequenceFile, m: int, stride: int = 5, disjoint: bool = False
) -> List[WindowInstance]:
    """Frames ``s, s+stride, ..., s+M*stride`` per valid start ``s``; the last one is the label.

    With ``disjoint`` the starts advance by ``M*stride + 1`` so no frame is shared.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if m < 1:
        raise ValueError(f"sequence length must be >= 1, got {m}")
    step = m * stride + 1 if disjoint else 1
    out: List[WindowInstance] = []
    for seq_id, seq in enumerate(file.sequences):
        for k in range(window_count(seq.shape[0], m, stride, disjoint)):
            s = k * step
            frames = seq[s: s + m * stride + 1: stride]
            out.append(WindowInstance(
                inputs=frames[:m].copy(), label=frames[m].copy(),
                sequence=seq_id, start=s, stride=stride,
            ))
    logger.debug("Built %d windows from %d sequences (M=%d, stride=%d)", len(out), len(file.sequences), m, stride)
    return out


def split_sizes(n: int, ratios: Tuple[float, float, float]) -> Tuple[int, int, int]:
    """Floor cuts for train and val, the rest to test.

    If flooring leaves test more than ``ceil(r_test * n)`` items, one moves to val.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    n_train = math.floor(ratios[0] * n + _ROUNDING_SLACK)
    n_val = math.floor(ratios[1] * n + _ROUNDING_SLACK)
    n_test = n - n_train - n_val
    if n_test > math.ceil(ratios[2] * n - _ROUNDING_SLACK):
        n_val += 1
        n_test -= 1
    return n_train, n_val, n_test


def _cut(order: Sequence[int], sizes: Tuple[int, int, int]) -> Tuple[List[int], List[int], List[int]]:
    a, b = sizes[0], sizes[0] + sizes[1]
    return list(order[:a]), list(order[a:b]), list(order[b:])


def split_indices(
    n: int, ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15), seed: int = 2023
) -> Tuple[List[int], List[int], List[int]]:
    if n == 0:
        raise EmptyDatasetError("cannot split an empty instance set")
    order = Xoshiro256pp(seed).permutation(n)
    return _cut(order, split_sizes(n, ratios))


def split(
    instances: Sequence[WindowInstance],
    ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 2023,
) -> Tuple[List[WindowInstance], List[WindowInstance], List[WindowInstance]]:
    """Seeded Fisher-Yates shuffle of the windows, then contiguous cuts."""
    train, val, test = split_indices(len(instances), ratios, seed)
    return (
        [instances[i] for i in train],
        [instances[i] for i in val],
        [instances[i] for i in test],
    )


def split_by_sequence(
    instances: Sequence[WindowInstance],
    ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 2023,
) -> Tuple[List[WindowInstance], List[WindowInstance], List[WindowInstance]]:
    """Shuffle and cut sequence ids, so every window of a sequence lands in one split."""
    if not instances:
        raise EmptyDatasetError("cannot split an empty instance set")
    ids = sorted({w.sequence for w in instances})
    parts = split_indices(len(ids), ratios, seed)
    owner = {ids[i]: p for p, chosen in enumerate(parts) for i in chosen}
    buckets: Tuple[List[WindowInstance], ...] = ([], [], [])
    for w in instances:
        buckets[owner[w.sequence]].append(w)
    return buckets[0], buckets[1], buckets[2]


SPLIT_NAMES = ("train", "val", "test")


@dataclass
class DatasetSplits:
    train: List[WindowInstance]
    val: List[WindowInstance]
    test: List[WindowInstance]

    def get(self, name: str) -> List[WindowInstance]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        parts: List[WindowInstance] = getattr(self, name)
        return parts

    def window_set(self, name: str) -> WindowSet | None:
        parts = self.get(name)
        return WindowSet.from_instances(parts) if parts else None


def build_splits(
    file: EmbeddingSequenceFile,
    m: int,
    stride: int = 5,
    ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 2023,
    by_sequence: bool = False,
    disjoint: bool = False,
) -> DatasetSplits:
    instances = make_windows(file, m, stride, disjoint)
    cut = split_by_sequence if by_sequence else split
    train, val, test = cut(instances, ratios, seed)
    logger.info("Split %d windows into %d/%d/%d", len(instances), len(train), len(val), len(test))
    return DatasetSplits(train=train, val=val, test=test)
