from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from scvfp.core.config import RunSpec, run_spec_from_dict
from scvfp.core.errors import (
    BadMagicError,
    FormatError,
    ShapeError,
    TrailingDataError,
    TruncatedFileError,
    VersionMismatchError,
)
from scvfp.core.model import init_state
from scvfp.core.synthetic import SyntheticConfig, generate_synthetic
from scvfp.storage.checkpoint_format import Checkpoint, load_checkpoint, save_checkpoint
from scvfp.storage.csv_import import import_csv_files, read_embedding_csv
from scvfp.storage.eseq_format import EmbeddingSequenceFile, read_eseq, write_eseq
from scvfp.storage.local_strategy import LocalStrategy
from scvfp.storage.strategy_loader import load_sequences
from scvfp.utils.prng import Xoshiro256pp


def _synthetic() -> EmbeddingSequenceFile:
    return generate_synthetic(SyntheticConfig(d=4, num_sequences=3, length=7, seed=3))


def test_eseq_header_layout() -> None:
    data = EmbeddingSequenceFile(d=2, sequences=[np.array([[1.0, 2.0]], dtype=np.float32)]).to_bytes()
    assert data[:4] == b"ESEQ"
    assert np.frombuffer(data[4:16], dtype="<u4").tolist() == [1, 2, 1]
    assert np.frombuffer(data[16:20], dtype="<u4").tolist() == [1]
    assert np.frombuffer(data[20:], dtype="<f4").tolist() == [1.0, 2.0]
    assert len(data) == 16 + 4 + 2 * 4


def test_eseq_round_trip_is_byte_identical(tmp_path: Path) -> None:
    original = _synthetic()
    path = tmp_path / "data.eseq"
    digest = write_eseq(original, path)
    loaded = read_eseq(path)
    assert loaded.to_bytes() == path.read_bytes()
    assert loaded.sha256() == digest
    assert loaded.lengths == [7, 7, 7]


def test_eseq_errors_are_distinct() -> None:
    good = _synthetic().to_bytes()
    with pytest.raises(BadMagicError):
        EmbeddingSequenceFile.from_bytes(b"")
    with pytest.raises(BadMagicError):
        EmbeddingSequenceFile.from_bytes(b"XSEQ" + good[4:])
    with pytest.raises(VersionMismatchError):
        EmbeddingSequenceFile.from_bytes(good[:4] + np.array([2], "<u4").tobytes() + good[8:])
    with pytest.raises(TruncatedFileError):
        EmbeddingSequenceFile.from_bytes(good[:-1])
    with pytest.raises(TruncatedFileError):
        EmbeddingSequenceFile.from_bytes(good[:10])
    with pytest.raises(TrailingDataError):
        EmbeddingSequenceFile.from_bytes(good + b"\x00")


def test_eseq_rejects_wrong_width_sequences() -> None:
    with pytest.raises(ShapeError):
        EmbeddingSequenceFile(d=3, sequences=[np.zeros((2, 4), dtype=np.float32)])


def _checkpoint(precision: int) -> Checkpoint:
    spec = run_spec_from_dict({"model": {"d": 8, "seq_len": 3, "heads": 2, "blocks": 1, "precision": precision}})
    rng = Xoshiro256pp(4)
    state = init_state(spec.model, rng)
    rng.gaussian()
    return Checkpoint(spec=spec, epoch=3, prng=rng.get_state(), state=state)


@pytest.mark.parametrize("precision", [32, 64])
def test_checkpoint_round_trip(tmp_path: Path, precision: int) -> None:
    ckpt = _checkpoint(precision)
    path = tmp_path / "run.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.to_bytes() == path.read_bytes()
    assert loaded.epoch == 3
    assert loaded.prng == ckpt.prng
    assert loaded.spec.sha256() == ckpt.spec.sha256()
    for name, value in ckpt.state.items():
        assert loaded.state[name].dtype == value.dtype
        np.testing.assert_array_equal(loaded.state[name], value)


def test_checkpoint_rejects_corruption() -> None:
    data = _checkpoint(64).to_bytes()
    with pytest.raises(BadMagicError):
        Checkpoint.from_bytes(b"ESEQ" + data[4:])
    with pytest.raises(TruncatedFileError):
        Checkpoint.from_bytes(data[:-3])
    with pytest.raises(TrailingDataError):
        Checkpoint.from_bytes(data + b"\x01")
    with pytest.raises(VersionMismatchError):
        Checkpoint.from_bytes(data[:4] + np.array([9], "<u4").tobytes() + data[8:])


def test_default_spec_is_full_scale() -> None:
    assert RunSpec().model.d == 768


def test_csv_import(tmp_path: Path) -> None:
    (tmp_path / "b.csv").write_text("1,2,3\n4,5,6\n", encoding="utf-8")
    (tmp_path / "a.csv").write_text("0.5,0.25,-1\n", encoding="utf-8")
    (tmp_path / "notes.txt").write_text("ignored", encoding="utf-8")
    files = LocalStrategy({"base_path": str(tmp_path)}).csv_files()
    assert [p.name for p in files] == ["a.csv", "b.csv"]
    data = import_csv_files(files)
    assert data.d == 3 and data.lengths == [1, 2]
    np.testing.assert_array_equal(data.sequences[1], np.array([[1, 2, 3], [4, 5, 6]], dtype=np.float32))


def test_csv_import_rejects_bad_rows(tmp_path: Path) -> None:
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n", encoding="utf-8")
    with pytest.raises(FormatError):
        read_embedding_csv(ragged)
    text = tmp_path / "text.csv"
    text.write_text("1,x\n", encoding="utf-8")
    with pytest.raises(FormatError):
        read_embedding_csv(text)
    wide = tmp_path / "wide.csv"
    wide.write_text("1,2,3,4\n", encoding="utf-8")
    narrow = tmp_path / "narrow.csv"
    narrow.write_text("1,2\n", encoding="utf-8")
    with pytest.raises(ShapeError):
        import_csv_files([wide, narrow])


def test_load_sequences_dispatches_on_path(tmp_path: Path) -> None:
    write_eseq(_synthetic(), tmp_path / "x.eseq")
    assert load_sequences(tmp_path / "x.eseq").d == 4
    csv_dir = tmp_path / "csvs"
    csv_dir.mkdir()
    (csv_dir / "s.csv").write_text("1,2\n3,4\n", encoding="utf-8")
    assert load_sequences(csv_dir).lengths == [2]
    with pytest.raises(ValueError):
        load_sequences(csv_dir, source="parquet")
    with pytest.raises(FileNotFoundError):
        load_sequences(tmp_path / "missing.eseq")
