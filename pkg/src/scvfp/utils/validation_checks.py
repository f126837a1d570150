from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, List

from ..core.types import ValidationIssue

if TYPE_CHECKING:
    from ..core.config import DataConfig, ModelConfig, TrainConfig


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def check_model_extents(cfg: "ModelConfig") -> List[ValidationIssue]:
    """All extents must be integers >= 1 (optional ones may be null)."""
    issues = []
    required = ("d", "seq_len", "heads", "blocks")
    optional = ("d_head", "ffn_width", "head_hidden")
    bad = [name for name in required if not _is_int(getattr(cfg, name)) or getattr(cfg, name) < 1]
    bad += [
        name for name in optional
        if getattr(cfg, name) is not None
        and (not _is_int(getattr(cfg, name)) or getattr(cfg, name) < 1)
    ]
    if bad:
        issues.append(ValidationIssue(
            rule_id="model.extents",
            message=f"extents must be integers >= 1: {sorted(bad)}",
            keywords=["model", "shape"],
        ))
    return issues


def check_variant(cfg: "ModelConfig") -> List[ValidationIssue]:
    from ..core.config import VARIANTS

    if cfg.variant not in VARIANTS:
        return [ValidationIssue(
            rule_id="model.variant",
            message=f"variant must be one of {list(VARIANTS)}, got {cfg.variant!r}",
            keywords=["model", "variant"],
        )]
    return []


def check_head_split(cfg: "ModelConfig") -> List[ValidationIssue]:
    """The baseline splits d into N chunks, so N must divide d."""
    if not (_is_int(cfg.d) and _is_int(cfg.heads)) or cfg.heads < 1:
        return []
    if cfg.variant == "mhsa_baseline" and cfg.d % cfg.heads != 0:
        return [ValidationIssue(
            rule_id="model.head_split",
            message=f"mhsa_baseline needs heads to divide d (d={cfg.d}, heads={cfg.heads})",
            keywords=["model", "heads"],
        )]
    return []


def check_positional_width(cfg: "ModelConfig") -> List[ValidationIssue]:
    if _is_int(cfg.d) and cfg.d % 2 != 0:
        return [ValidationIssue(
            rule_id="model.even_width",
            message=f"sinusoidal positional encoding needs an even d, got {cfg.d}",
            keywords=["model", "positional"],
        )]
    return []


def check_ssl_weight(cfg: "ModelConfig") -> List[ValidationIssue]:
    if not _is_number(cfg.ssl_weight) or cfg.ssl_weight < 0 or not math.isfinite(cfg.ssl_weight):
        return [ValidationIssue(
            rule_id="model.ssl_weight",
            message=f"ssl_weight must be a finite number >= 0, got {cfg.ssl_weight!r}",
            keywords=["model", "loss"],
        )]
    return []


def check_precision(cfg: "ModelConfig") -> List[ValidationIssue]:
    from ..core.config import PRECISIONS

    if cfg.precision not in PRECISIONS:
        return [ValidationIssue(
            rule_id="model.precision",
            message=f"precision must be 32 or 64, got {cfg.precision!r}",
            keywords=["model", "precision"],
        )]
    return []


def check_optimizer(cfg: "TrainConfig") -> List[ValidationIssue]:
    issues = []
    if not _is_number(cfg.lr) or cfg.lr <= 0:
        issues.append(ValidationIssue(
            rule_id="train.lr",
            message=f"lr must be > 0, got {cfg.lr!r}",
            keywords=["train", "optimizer"],
        ))
    betas = cfg.betas
    if (
        not isinstance(betas, tuple)
        or len(betas) != 2
        or not all(_is_number(b) and 0 <= b < 1 for b in betas)
    ):
        issues.append(ValidationIssue(
            rule_id="train.betas",
            message=f"betas must be two numbers in [0, 1), got {betas!r}",
            keywords=["train", "optimizer"],
        ))
    if not _is_number(cfg.eps) or cfg.eps <= 0:
        issues.append(ValidationIssue(
            rule_id="train.eps",
            message=f"eps must be > 0, got {cfg.eps!r}",
            keywords=["train", "optimizer"],
        ))
    if not _is_number(cfg.weight_decay) or cfg.weight_decay < 0:
        issues.append(ValidationIssue(
            rule_id="train.weight_decay",
            message=f"weight_decay must be >= 0, got {cfg.weight_decay!r}",
            keywords=["train", "optimizer"],
        ))
    if cfg.clip_grad_norm is not None and (not _is_number(cfg.clip_grad_norm) or cfg.clip_grad_norm <= 0):
        issues.append(ValidationIssue(
            rule_id="train.clip_grad_norm",
            message=f"clip_grad_norm must be null or > 0, got {cfg.clip_grad_norm!r}",
            keywords=["train", "optimizer"],
        ))
    return issues


def check_schedule(cfg: "TrainConfig") -> List[ValidationIssue]:
    issues = []
    if not _is_int(cfg.batch) or cfg.batch < 1:
        issues.append(ValidationIssue(
            rule_id="train.batch",
            message=f"batch must be an integer >= 1, got {cfg.batch!r}",
            keywords=["train", "batch"],
        ))
    if cfg.eval_batch is not None and (not _is_int(cfg.eval_batch) or cfg.eval_batch < 1):
        issues.append(ValidationIssue(
            rule_id="train.eval_batch",
            message=f"eval_batch must be null or an integer >= 1, got {cfg.eval_batch!r}",
            keywords=["train", "batch"],
        ))
    if not _is_int(cfg.epochs) or cfg.epochs < 0:
        issues.append(ValidationIssue(
            rule_id="train.epochs",
            message=f"epochs must be an integer >= 0, got {cfg.epochs!r}",
            keywords=["train", "epochs"],
        ))
    if not _is_int(cfg.seed) or cfg.seed < 0:
        issues.append(ValidationIssue(
            rule_id="train.seed",
            message=f"seed must be a non-negative integer, got {cfg.seed!r}",
            keywords=["train", "seed"],
        ))
    if not _is_int(cfg.rollout_steps) or cfg.rollout_steps < 1:
        issues.append(ValidationIssue(
            rule_id="train.rollout_steps",
            message=f"rollout_steps must be an integer >= 1, got {cfg.rollout_steps!r}",
            keywords=["train", "rollout"],
        ))
    return issues


def check_stride(cfg: "DataConfig") -> List[ValidationIssue]:
    if not _is_int(cfg.stride) or cfg.stride < 1:
        return [ValidationIssue(
            rule_id="data.stride",
            message=f"stride must be an integer >= 1, got {cfg.stride!r}",
            keywords=["data", "windows"],
        )]
    return []


def check_split_ratios(cfg: "DataConfig") -> List[ValidationIssue]:
    issues = []
    ratios = cfg.split_ratios
    if (
        not isinstance(ratios, tuple)
        or len(ratios) != 3
        or not all(_is_number(r) and r >= 0 for r in ratios)
    ):
        issues.append(ValidationIssue(
            rule_id="data.split_ratios",
            message=f"split_ratios must be three non-negative numbers, got {ratios!r}",
            keywords=["data", "split"],
        ))
    elif abs(sum(ratios) - 1.0) > 1e-9:
        issues.append(ValidationIssue(
            rule_id="data.split_ratios",
            message=f"split_ratios must sum to 1, got {sum(ratios)}",
            keywords=["data", "split"],
        ))
    if not _is_int(cfg.split_seed) or cfg.split_seed < 0:
        issues.append(ValidationIssue(
            rule_id="data.split_seed",
            message=f"split_seed must be a non-negative integer, got {cfg.split_seed!r}",
            keywords=["data", "seed"],
        ))
    return issues
