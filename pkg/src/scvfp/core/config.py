from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .errors import ConfigError
from .types import ValidationIssue

VARIANTS = ("scmhsa", "mhsa_baseline")
PRECISIONS = (32, 64)
THREADS_ENV = "SCVFP_THREADS"


@dataclass
class ModelConfig:
    d: int = 768
    seq_len: int = 5
    heads: int = 6
    d_head: Optional[int] = None
    blocks: int = 6
    ffn_width: Optional[int] = None
    head_hidden: Optional[int] = None
    variant: str = "scmhsa"
    ssl_weight: float = 0.1
    precision: int = 64

    @property
    def head_width(self) -> int:
        """Per-head width: d/N for the baseline, d'_h (default d/N) for SCMHSA."""
        if self.variant == "mhsa_baseline":
            return self.d // self.heads
        return self.d_head if self.d_head is not None else max(1, self.d // self.heads)

    @property
    def ffn(self) -> int:
        return self.ffn_width if self.ffn_width is not None else 4 * self.d

    @property
    def hidden(self) -> int:
        return self.head_hidden if self.head_hidden is not None else self.d

    @property
    def dtype(self) -> type[np.floating[Any]]:
        return np.float32 if self.precision == 32 else np.float64


@dataclass
class TrainConfig:
    lr: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    batch: int = 32
    epochs: int = 25
    seed: int = 2023
    clip_grad_norm: Optional[float] = None
    eval_batch: Optional[int] = None
    rollout_steps: int = 5


@dataclass
class DataConfig:
    path: Optional[str] = None
    stride: int = 5
    split_ratios: Tuple[float, float, float] = (0.7, 0.15, 0.15)
    split_seed: int = 2023
    split_by_sequence: bool = False
    disjoint_windows: bool = False


@dataclass
class RunSpec:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def to_dict(self) -> Dict[str, Any]:
        raw = asdict(self)
        raw["train"]["betas"] = list(self.train.betas)
        raw["data"]["split_ratios"] = list(self.data.split_ratios)
        return raw

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "data": DataConfig}
_TUPLE_FIELDS = {("train", "betas"), ("data", "split_ratios")}


def _unknown_keys(section: str, raw: Dict[str, Any], cls: type) -> List[ValidationIssue]:
    allowed = {f.name for f in fields(cls)}
    extra = sorted(set(raw) - allowed)
    if not extra:
        return []
    return [ValidationIssue(
        rule_id="schema.unknown_keys",
        message=f"unknown keys in '{section}': {extra}",
        keywords=["schema", section],
    )]


def _coerce_float(annotation: str, value: Any) -> Any:
    # YAML reads 1 as int; float fields keep one canonical JSON spelling.
    if "float" not in annotation:
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, tuple):
        return tuple(
            float(v) if isinstance(v, int) and not isinstance(v, bool) else v for v in value
        )
    return value


def run_spec_from_dict(data: Dict[str, Any] | None) -> RunSpec:
    """Build and validate a RunSpec; any unknown key or rule violation raises ConfigError."""
    from .rules_loader import run_rules

    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError([ValidationIssue("schema.type", "run spec must be a mapping", ["schema"])])

    issues: List[ValidationIssue] = []
    extra = sorted(set(data) - set(_SECTIONS))
    if extra:
        issues.append(ValidationIssue(
            rule_id="schema.unknown_keys",
            message=f"unknown top-level keys: {extra}",
            keywords=["schema"],
        ))

    sections: Dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name) or {}
        if not isinstance(raw, dict):
            issues.append(ValidationIssue("schema.type", f"'{name}' must be a mapping", ["schema"]))
            raw = {}
        issues.extend(_unknown_keys(name, raw, cls))
        known = {k: v for k, v in raw.items() if k in {f.name for f in fields(cls)}}
        types = {f.name: str(f.type) for f in fields(cls)}
        for key in list(known):
            if (name, key) in _TUPLE_FIELDS and isinstance(known[key], list):
                known[key] = tuple(known[key])
            known[key] = _coerce_float(types[key], known[key])
        sections[name] = cls(**known)

    if issues:
        raise ConfigError(issues)

    spec = RunSpec(**sections)
    issues = run_rules(spec)
    if issues:
        raise ConfigError(issues)
    return spec


def load_run_spec(config_path: Optional[Path] = None) -> RunSpec:
    """Read a YAML or canonical-JSON run spec; no path means all defaults."""
    if config_path is None:
        return run_spec_from_dict({})
    with config_path.open("r", encoding="utf-8") as f:
        try:
            # YAML 1.1 reads JSON exponents like 1e-08 as strings.
            data = json.load(f) if config_path.suffix.lower() == ".json" else yaml.safe_load(f) or {}
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError([ValidationIssue(
                rule_id="schema.parse",
                message=f"{config_path}: {e}",
                keywords=["schema"],
            )]) from e
    return run_spec_from_dict(data)


def run_spec_from_json(text: str) -> RunSpec:
    return run_spec_from_dict(json.loads(text))


def save_run_spec(spec: RunSpec, config_path: Path) -> None:
    config_path.parent.mkdir(parents=True, exist_ok=True)
    config_path.write_text(spec.canonical_json() + "\n", encoding="utf-8")


def worker_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
