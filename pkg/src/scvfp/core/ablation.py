"""2x2 ablation grid: attention variant x semantic similarity loss on/off, over seeds."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import pandas as pd

from ..storage.eseq_format import EmbeddingSequenceFile
from ..utils.log_decorator import log_process
from .config import RunSpec, run_spec_from_dict
from .errors import EmptyDatasetError
from .objective import psnr_or_inf
from .report import write_csv
from .trainer import evaluate_windows, train

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (2023, 2024, 2025)
VARIANT_ORDER = ("scmhsa", "mhsa_baseline")


@dataclass
class AblationResult:
    runs: pd.DataFrame
    summary: pd.DataFrame
    curves: pd.DataFrame


def ablation_cells(spec: RunSpec, seeds: Sequence[int]) -> List[Tuple[str, float, int, RunSpec]]:
    """Every (variant, ssl_weight, seed) run of the grid, each with a validated RunSpec."""
    cells = []
    for seed in seeds:
        for variant in VARIANT_ORDER:
            for lam in (spec.model.ssl_weight, 0.0):
                raw = replace(
                    spec,
                    model=replace(spec.model, variant=variant, ssl_weight=lam),
                    train=replace(spec.train, seed=seed),
                ).to_dict()
                cells.append((variant, lam, seed, run_spec_from_dict(raw)))
    return cells


@log_process("run_ablation")
def run_ablation(
    spec: RunSpec,
    data: EmbeddingSequenceFile,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    out_dir: Path | None = None,
) -> AblationResult:
    """Train every cell on the same split and score it on the test split.

    The data split is fixed by ``spec.data.split_seed``; only the training seed varies.
    """
    run_rows: List[Dict[str, Any]] = []
    curve_rows: List[Dict[str, Any]] = []
    for variant, lam, seed, cell_spec in ablation_cells(spec, seeds):
        ssl = lam > 0
        logger.info("Ablation run: variant=%s ssl=%s seed=%d", variant, ssl, seed)
        result = train(cell_spec, data)
        test = result.splits.window_set("test")
        if test is None:
            raise EmptyDatasetError("ablation needs a non-empty test split")
        batch = cell_spec.train.eval_batch or cell_spec.train.batch
        mse, cos, _ = evaluate_windows(result.final.state, cell_spec.model, test, batch)
        run_rows.append({
            "variant": variant, "ssl": ssl, "ssl_weight": lam, "seed": seed,
            "test_mse": mse, "test_psnr": psnr_or_inf(mse), "test_cosine": cos,
            "parameters": result.final.state.num_parameters(),
        })
        for rec in result.history.records:
            curve_rows.append({
                "variant": variant, "ssl": ssl, "seed": seed, "epoch": rec.epoch,
                "train_mse": rec.train_mse, "train_ss": rec.train_ss,
                "train_total": rec.train_total, "val_mse": rec.val_mse,
            })

    runs = pd.DataFrame(run_rows)
    curves = pd.DataFrame(curve_rows)
    summary = summarize_runs(runs)
    if out_dir is not None:
        digest = spec.sha256()
        write_csv(runs, out_dir / "ablation_runs.csv", digest)
        write_csv(summary, out_dir / "ablation_summary.csv", digest)
        write_csv(curves, out_dir / "ablation_curves.csv", digest)
    return AblationResult(runs=runs, summary=summary, curves=curves)


def summarize_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample standard deviation of test MSE and PSNR per grid cell."""
    grouped = runs.groupby(["variant", "ssl"], sort=False)
    summary = grouped.agg(
        runs=("seed", "count"),
        test_mse_mean=("test_mse", "mean"),
        test_mse_sd=("test_mse", "std"),
        test_psnr_mean=("test_psnr", "mean"),
        test_psnr_sd=("test_psnr", "std"),
    ).reset_index()
    return summary


def mean_curves(curves: pd.DataFrame, column: str = "train_total") -> pd.DataFrame:
    """Seed-averaged curve per (variant, ssl), one column per cell, indexed by epoch."""
    table = curves.pivot_table(index="epoch", columns=["variant", "ssl"], values=column, aggfunc="mean")
    return table.sort_index()
