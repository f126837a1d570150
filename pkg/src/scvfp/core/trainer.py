"""Training loop, evaluation and run outputs."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Tuple

import numpy as np
import pandas as pd

from ..storage.checkpoint_format import Checkpoint, save_checkpoint
from ..storage.eseq_format import EmbeddingSequenceFile
from ..utils.log_decorator import log_process
from ..utils.prng import Xoshiro256pp
from .config import ModelConfig, RunSpec, save_run_spec, worker_threads
from .errors import DataMismatchError, EmptyDatasetError, NonFiniteError, TrainingDivergedError
from .model import ModelState, forward, init_state, rollout
from .objective import LossBreakdown, frame_mse, psnr_or_inf, row_cosines, total_loss
from .optim import AdamW, clip_grad_norm
from .report import write_csv
from .tensor import Tensor, scalar_mul
from .types import MetricReport
from .windows import DatasetSplits, WindowSet, build_splits

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_mse", "train_ss", "train_total", "val_mse", "val_psnr", "seconds"]


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    train_ss: float
    train_total: float
    val_mse: float
    val_psnr: float
    seconds: float


@dataclass
class RunHistory:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=HISTORY_COLUMNS)

    def losses(self) -> List[Tuple[float, ...]]:
        """Every recorded value except wall time."""
        return [
            (r.train_mse, r.train_ss, r.train_total, r.val_mse, r.val_psnr) for r in self.records
        ]


@dataclass
class TrainResult:
    final: Checkpoint
    best: Checkpoint
    history: RunHistory
    splits: DatasetSplits


def batch_loss(
    params: Mapping[str, Tensor], inputs: np.ndarray, labels: np.ndarray, config: ModelConfig
) -> LossBreakdown:
    """Batch-mean total loss for ``b`` windows."""
    out = forward(inputs, params, config)
    target = Tensor(np.asarray(labels, dtype=config.dtype))
    return total_loss(target, out.prediction, out.encoded.heads, config.ssl_weight)


def _chunk_gradients(
    state: ModelState, inputs: np.ndarray, labels: np.ndarray, config: ModelConfig, weight: float
) -> List[Tuple[Dict[str, np.ndarray], np.ndarray]]:
    """Per-window gradients of ``weight`` times each window's loss."""
    out = []
    for i in range(inputs.shape[0]):
        leaves = state.tensors(requires_grad=True)
        loss = batch_loss(leaves, inputs[i:i + 1], labels[i:i + 1], config)
        scalar_mul(loss.total, weight).backward()
        grads = {
            name: leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
            for name, leaf in leaves.items()
        }
        out.append((grads, weight * np.array(loss.values)))
    return out


def compute_gradients(
    state: ModelState,
    inputs: np.ndarray,
    labels: np.ndarray,
    config: ModelConfig,
    threads: int = 1,
    pool: ThreadPoolExecutor | None = None,
) -> Tuple[Dict[str, np.ndarray], Tuple[float, float, float]]:
    """Gradients of the batch-mean loss and its (mse, ss, total) values.

    The batch is cut into contiguous chunks, one per worker. Every window is
    differentiated on its own with weight 1/b and the per-window results are
    summed in window order, so the sums do not depend on the thread count.
    """
    b = inputs.shape[0]
    chunks = [c for c in np.array_split(np.arange(b), min(max(1, threads), b)) if c.size]
    jobs = [(inputs[c], labels[c]) for c in chunks]
    if pool is None or len(jobs) == 1:
        results = [_chunk_gradients(state, x, y, config, 1.0 / b) for x, y in jobs]
    else:
        futures = [pool.submit(_chunk_gradients, state, x, y, config, 1.0 / b) for x, y in jobs]
        results = [f.result() for f in futures]
    per_window = [item for chunk in results for item in chunk]
    grads = dict(per_window[0][0])
    values = per_window[0][1].copy()
    for extra, extra_values in per_window[1:]:
        for name in grads:
            grads[name] = grads[name] + extra[name]
        values = values + extra_values
    mse, ss, total = (float(v) for v in values)
    return grads, (mse, ss, total)


def predict_windows(
    state: ModelState, config: ModelConfig, windows: WindowSet, batch: int
) -> np.ndarray:
    params = state.tensors()
    preds = [
        forward(windows.inputs[i:i + batch], params, config).prediction.data
        for i in range(0, len(windows), batch)
    ]
    return np.concatenate(preds, axis=0)


def evaluate_windows(
    state: ModelState, config: ModelConfig, windows: WindowSet, batch: int = 32
) -> Tuple[float, float, np.ndarray]:
    """(mean frame MSE, mean cosine, predictions) over ``windows``."""
    if windows.d != config.d:
        raise DataMismatchError(f"data width {windows.d} != model width {config.d}")
    preds = predict_windows(state, config, windows, batch)
    mse = float(frame_mse(windows.labels, preds).mean())
    cos = float(row_cosines(windows.labels.astype(np.float64), preds.astype(np.float64)).mean())
    return mse, cos, preds


def rollout_targets(
    windows: WindowSet, sequences: EmbeddingSequenceFile, steps: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of windows whose next ``steps`` strided frames all exist, and those frames."""
    m = windows.inputs.shape[1]
    keep: List[int] = []
    targets: List[np.ndarray] = []
    for i, (seq, start, stride) in enumerate(windows.provenance):
        frames = sequences.sequences[int(seq)]
        idx = [int(start) + (m + j) * int(stride) for j in range(steps)]
        if idx[-1] < frames.shape[0]:
            keep.append(i)
            targets.append(frames[idx])
    if not keep:
        return np.zeros(0, dtype=np.int64), np.zeros((0, steps, windows.d))
    return np.asarray(keep, dtype=np.int64), np.stack(targets)


def rollout_cosines(
    state: ModelState,
    config: ModelConfig,
    windows: WindowSet,
    sequences: EmbeddingSequenceFile,
    steps: int,
    batch: int = 32,
) -> List[float]:
    keep, targets = rollout_targets(windows, sequences, steps)
    if keep.size == 0:
        logger.warning("No window has %d future frames; per-step cosines skipped", steps)
        return []
    inputs = windows.inputs[keep]
    preds = np.concatenate(
        [rollout(inputs[i:i + batch], steps, state, config) for i in range(0, len(keep), batch)],
        axis=0,
    )
    return [
        float(row_cosines(targets[:, j].astype(np.float64), preds[:, j].astype(np.float64)).mean())
        for j in range(steps)
    ]


@log_process("evaluate")
def evaluate(
    state: ModelState,
    config: ModelConfig,
    windows: WindowSet,
    sequences: EmbeddingSequenceFile | None = None,
    rollout_steps: int = 5,
    batch: int = 32,
) -> MetricReport:
    """Embedding MSE, PSNR and cosine over ``windows``, plus per-step rollout cosines."""
    if len(windows) == 0:
        raise EmptyDatasetError("evaluation split is empty")
    mse, cos, _ = evaluate_windows(state, config, windows, batch)
    persistence = float(frame_mse(windows.labels, windows.inputs[:, -1, :]).mean())
    steps: List[float] = []
    if sequences is not None and rollout_steps > 0:
        steps = rollout_cosines(state, config, windows, sequences, rollout_steps, batch)
    return MetricReport(
        mse=mse,
        psnr=psnr_or_inf(mse),
        mean_cosine=cos,
        step_cosines=steps,
        windows=len(windows),
        persistence_mse=persistence,
    )


def splits_for(spec: RunSpec, data: EmbeddingSequenceFile) -> DatasetSplits:
    if data.d != spec.model.d:
        raise DataMismatchError(f"data width {data.d} != model width {spec.model.d}")
    return build_splits(
        data,
        spec.model.seq_len,
        stride=spec.data.stride,
        ratios=spec.data.split_ratios,
        seed=spec.data.split_seed,
        by_sequence=spec.data.split_by_sequence,
        disjoint=spec.data.disjoint_windows,
    )


def _check_finite(epoch: int, batch: int, values: Tuple[float, float, float], grads: Dict[str, np.ndarray]) -> None:
    mse, ss, total = values
    terms = {"mse": mse, "ss": ss, "total": total}
    if not all(math.isfinite(v) for v in values):
        raise TrainingDivergedError(epoch, batch, terms)
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise TrainingDivergedError(epoch, batch, {**terms, "non_finite_grads": bad[:5]})


@log_process("train")
def train(
    spec: RunSpec,
    data: EmbeddingSequenceFile,
    out_dir: Path | None = None,
    threads: int | None = None,
) -> TrainResult:
    """Optimize the model of ``spec`` on the train split of ``data``.

    Writes ``final.ckpt``, ``best.ckpt``, ``history.csv`` and ``runspec.json``
    when ``out_dir`` is given.
    """
    cfg, tcfg = spec.model, spec.train
    splits = splits_for(spec, data)
    train_set = splits.window_set("train")
    if train_set is None:
        raise EmptyDatasetError("train split is empty")
    val_set = splits.window_set("val")
    eval_batch = tcfg.eval_batch or tcfg.batch
    threads = threads if threads is not None else worker_threads()

    rng = Xoshiro256pp(tcfg.seed)
    state = init_state(cfg, rng)
    opt = AdamW(lr=tcfg.lr, betas=tcfg.betas, eps=tcfg.eps, weight_decay=tcfg.weight_decay)
    history = RunHistory()
    best = Checkpoint(spec=spec, epoch=0, prng=rng.get_state(), state=state.copy())
    best_val = math.inf
    logger.info(
        "Training %s: %d parameters, %d train / %d val windows, %d epochs",
        cfg.variant, state.num_parameters(), len(train_set), len(val_set) if val_set else 0, tcfg.epochs,
    )

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for epoch in range(1, tcfg.epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(len(train_set))
            sums = np.zeros(3)
            for batch_no, i in enumerate(range(0, len(order), tcfg.batch), start=1):
                idx = order[i:i + tcfg.batch]
                try:
                    grads, values = compute_gradients(
                        state, train_set.inputs[idx], train_set.labels[idx], cfg, threads, pool
                    )
                except NonFiniteError as exc:
                    raise TrainingDivergedError(epoch, batch_no, {"error": str(exc)}) from exc
                _check_finite(epoch, batch_no, values, grads)
                if tcfg.clip_grad_norm is not None:
                    clip_grad_norm(grads, tcfg.clip_grad_norm)
                arrays = state.arrays()
                opt.step(arrays, grads)
                state = ModelState(arrays)
                sums += np.array(values) * len(idx)
                logger.debug("epoch %d batch %d: mse=%.6g ss=%.6g total=%.6g", epoch, batch_no, *values)

            train_mse, train_ss, train_total = (float(v) for v in sums / len(train_set))
            val_mse, val_psnr = math.nan, math.nan
            if val_set is not None:
                val_mse, _, _ = evaluate_windows(state, cfg, val_set, eval_batch)
                val_psnr = psnr_or_inf(val_mse)
            seconds = time.perf_counter() - start
            history.records.append(EpochRecord(
                epoch, train_mse, train_ss, train_total, val_mse, val_psnr, seconds,
            ))
            logger.info(
                "epoch %d/%d: train mse=%.6g ss=%.6g total=%.6g | val mse=%.6g psnr=%.4f (%.1fs)",
                epoch, tcfg.epochs, train_mse, train_ss, train_total, val_mse, val_psnr, seconds,
            )
            if val_set is None or val_mse < best_val:
                best_val = val_mse if val_set is not None else best_val
                best = Checkpoint(spec=spec, epoch=epoch, prng=rng.get_state(), state=state.copy())
    finally:
        if pool is not None:
            pool.shutdown()

    final = Checkpoint(spec=spec, epoch=tcfg.epochs, prng=rng.get_state(), state=state)
    result = TrainResult(final=final, best=best, history=history, splits=splits)
    if out_dir is not None:
        write_run_outputs(result, out_dir)
    return result


def write_run_outputs(result: TrainResult, out_dir: Path) -> None:
    spec = result.final.spec
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.final, out_dir / "final.ckpt")
    save_checkpoint(result.best, out_dir / "best.ckpt")
    write_csv(result.history.to_frame(), out_dir / "history.csv", spec.sha256())
    save_run_spec(spec, out_dir / "runspec.json")

