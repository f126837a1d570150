from __future__ import annotations

import numpy as np
import pytest

from scvfp.core.errors import EmptyDatasetError, ShapeError
from scvfp.core.synthetic import SyntheticConfig, generate_synthetic
from scvfp.core.windows import (
    WindowSet,
    build_splits,
    make_windows,
    split,
    split_by_sequence,
    split_sizes,
    window_count,
)
from scvfp.storage.eseq_format import EmbeddingSequenceFile


def _file(lengths: list[int], d: int = 2) -> EmbeddingSequenceFile:
    seqs = [
        (np.arange(t * d, dtype=np.float32).reshape(t, d) + 1000 * i) for i, t in enumerate(lengths)
    ]
    return EmbeddingSequenceFile(d=d, sequences=seqs)


def test_static_noiseless_sequences_repeat_the_first_frame() -> None:
    data = generate_synthetic(SyntheticConfig(d=6, num_sequences=3, length=10, sigma=0.0, theta_max=0.0))
    for seq in data.sequences:
        assert seq.dtype == np.float32
        np.testing.assert_array_equal(seq, np.broadcast_to(seq[0], seq.shape))


def test_noiseless_rotation_preserves_norm() -> None:
    data = generate_synthetic(SyntheticConfig(d=8, num_sequences=4, length=50, sigma=0.0))
    for seq in data.sequences:
        norms = np.linalg.norm(seq.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, norms[0], atol=1e-5)


def test_generator_is_byte_deterministic() -> None:
    cfg = SyntheticConfig(d=4, num_sequences=5, length=12, seed=11)
    assert generate_synthetic(cfg).to_bytes() == generate_synthetic(cfg).to_bytes()
    other = SyntheticConfig(d=4, num_sequences=5, length=12, seed=12)
    assert generate_synthetic(cfg).sha256() != generate_synthetic(other).sha256()


def test_generator_rejects_odd_width_and_negative_noise() -> None:
    with pytest.raises(ShapeError):
        generate_synthetic(SyntheticConfig(d=5))
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticConfig(d=4, sigma=-1.0))


def test_window_indices_for_stride_five() -> None:
    windows = make_windows(_file([26]), m=5, stride=5)
    assert len(windows) == 1
    w = windows[0]
    assert w.frame_indices == [0, 5, 10, 15, 20, 25]
    np.testing.assert_array_equal(w.inputs[:, 0], [0, 10, 20, 30, 40])
    np.testing.assert_array_equal(w.label, [50, 51])


def test_consecutive_window_when_stride_is_one() -> None:
    windows = make_windows(_file([4]), m=3, stride=1)
    assert len(windows) == 1
    assert windows[0].frame_indices == [0, 1, 2, 3]


@pytest.mark.parametrize("length", [0, 5, 10, 11, 17, 40])
def test_window_count_matches_enumeration(length: int) -> None:
    windows = make_windows(_file([length, 30]), m=2, stride=5)
    first = [w for w in windows if w.sequence == 0]
    assert len(first) == max(0, length - 10) == window_count(length, 2, 5)


def test_windows_never_cross_sequences() -> None:
    windows = make_windows(_file([12, 9, 15]), m=2, stride=3)
    for w in windows:
        assert w.frame_indices[-1] < [12, 9, 15][w.sequence]
        assert np.all((w.inputs // 1000) == w.sequence)


def test_disjoint_windows_share_no_frames() -> None:
    windows = make_windows(_file([40]), m=2, stride=3, disjoint=True)
    assert len(windows) == window_count(40, 2, 3, disjoint=True) == 5
    frames = [i for w in windows for i in w.frame_indices]
    assert len(frames) == len(set(frames))


def test_split_sizes() -> None:
    assert split_sizes(100, (0.7, 0.15, 0.15)) == (70, 15, 15)
    assert split_sizes(9, (0.7, 0.15, 0.15)) == (6, 1, 2)
    assert split_sizes(10, (0.7, 0.15, 0.15)) == (7, 1, 2)
    assert split_sizes(1, (0.7, 0.15, 0.15)) == (0, 0, 1)
    with pytest.raises(ValueError):
        split_sizes(10, (0.5, 0.2, 0.2))


def test_split_is_seeded_disjoint_and_complete() -> None:
    instances = make_windows(_file([30, 30]), m=2, stride=2)
    train, val, test = split(instances, seed=2023)
    again = split(instances, seed=2023)
    assert [id(w) for w in train] == [id(w) for w in again[0]]
    ids = [id(w) for part in (train, val, test) for w in part]
    assert sorted(ids) == sorted(id(w) for w in instances)
    other = split(instances, seed=2024)
    assert [id(w) for w in other[0]] != [id(w) for w in train]


def test_split_rejects_empty_input() -> None:
    with pytest.raises(EmptyDatasetError):
        split([])


def test_sequence_split_keeps_sequences_whole() -> None:
    instances = make_windows(_file([12] * 20), m=2, stride=2)
    parts = split_by_sequence(instances, seed=5)
    owners = [{w.sequence for w in part} for part in parts]
    assert sum(len(o) for o in owners) == 20
    assert not (owners[0] & owners[1] or owners[0] & owners[2] or owners[1] & owners[2])
    assert sum(len(p) for p in parts) == len(instances)


def test_window_set_stacks_and_takes() -> None:
    splits = build_splits(_file([20, 20]), m=3, stride=2, seed=1)
    ws = splits.window_set("train")
    assert ws is not None
    assert ws.inputs.shape == (len(splits.train), 3, 2)
    assert ws.labels.shape == (len(splits.train), 2)
    sub = ws.take([2, 0])
    np.testing.assert_array_equal(sub.labels[1], ws.labels[0])
    assert tuple(sub.provenance[0]) == (splits.train[2].sequence, splits.train[2].start, 2)
    with pytest.raises(EmptyDatasetError):
        WindowSet.from_instances([])
