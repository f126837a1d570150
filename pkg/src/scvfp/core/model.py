"""Next-frame embedding predictor: positional encoding, encoder stack, MLP head."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from ..utils.prng import Xoshiro256pp
from .attention import (
    AttentionOutput,
    MhsaWeights,
    ScmhsaWeights,
    attention_param_count,
    mhsa_forward,
    scmhsa_forward,
)
from .config import ModelConfig
from .errors import ShapeError
from .tensor import Tensor, add, gelu, layer_norm, matmul, take_row

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


def state_shapes(config: ModelConfig) -> Dict[str, Shape]:
    """Every parameter tensor's name and shape, in allocation order."""
    d, n, w = config.d, config.heads, config.head_width
    proj = (d // n, d // n) if config.variant == "mhsa_baseline" else (d, w)
    out_rows = d if config.variant == "mhsa_baseline" else n * w
    shapes: Dict[str, Shape] = {}
    for b in range(config.blocks):
        p = f"blocks.{b}"
        for kind in ("w_q", "w_k", "w_v"):
            for i in range(n):
                shapes[f"{p}.attn.{kind}.{i}"] = proj
        shapes[f"{p}.attn.w_o"] = (out_rows, d)
        shapes[f"{p}.ln1.gain"] = (d,)
        shapes[f"{p}.ln1.bias"] = (d,)
        shapes[f"{p}.ln2.gain"] = (d,)
        shapes[f"{p}.ln2.bias"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, config.ffn)
        shapes[f"{p}.ffn.b1"] = (config.ffn,)
        shapes[f"{p}.ffn.w2"] = (config.ffn, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    shapes["final_ln.gain"] = (d,)
    shapes["final_ln.bias"] = (d,)
    shapes["head.w_a"] = (d, config.hidden)
    shapes["head.b_a"] = (config.hidden,)
    shapes["head.w_b"] = (config.hidden, d)
    shapes["head.b_b"] = (d,)
    return shapes


class ModelState:
    """Named parameter arrays in allocation order."""

    def __init__(self, arrays: Mapping[str, np.ndarray]) -> None:
        self._arrays: Dict[str, np.ndarray] = dict(arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if value.shape != self._arrays[name].shape:
            raise ShapeError(f"{name}: shape {value.shape} != {self._arrays[name].shape}")
        self._arrays[name] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._arrays.items())

    def arrays(self) -> Dict[str, np.ndarray]:
        return dict(self._arrays)

    def copy(self) -> "ModelState":
        return ModelState({k: v.copy() for k, v in self._arrays.items()})

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self._arrays.values()))

    def tensors(self, requires_grad: bool = False) -> Dict[str, Tensor]:
        return {k: Tensor(v, requires_grad=requires_grad) for k, v in self._arrays.items()}

    def matches(self, config: ModelConfig) -> bool:
        expected = state_shapes(config)
        return list(expected) == list(self._arrays) and all(
            self._arrays[k].shape == s for k, s in expected.items()
        )


def init_state(config: ModelConfig, rng: Xoshiro256pp) -> ModelState:
    """Matrices ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases 0; layer-norm gains 1."""
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in state_shapes(config).items():
        if len(shape) == 2:
            bound = 1.0 / math.sqrt(shape[0])
            values = rng.uniforms(shape[0] * shape[1], -bound, bound).reshape(shape)
        elif name.endswith(".gain"):
            values = np.ones(shape)
        else:
            values = np.zeros(shape)
        arrays[name] = values.astype(config.dtype)
    return ModelState(arrays)


def positional_encoding(m: int, d: int) -> np.ndarray:
    """Fixed sinusoidal table: PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(...)."""
    if d % 2 != 0:
        raise ShapeError(f"positional encoding needs an even width, got {d}")
    t = np.arange(m, dtype=np.float64)[:, None]
    freq = 10000.0 ** (np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.zeros((m, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(t / freq)
    pe[:, 1::2] = np.cos(t / freq)
    return pe


def _attention(x: Tensor, params: Mapping[str, Tensor], block: int, config: ModelConfig) -> AttentionOutput:
    p = f"blocks.{block}.attn"
    n = config.heads
    groups = {
        kind: [params[f"{p}.{kind}.{i}"] for i in range(n)] for kind in ("w_q", "w_k", "w_v")
    }
    if config.variant == "mhsa_baseline":
        return mhsa_forward(x, MhsaWeights(**groups, w_o=params[f"{p}.w_o"]))
    return scmhsa_forward(x, ScmhsaWeights(**groups, w_o=params[f"{p}.w_o"]))


def _ffn(x: Tensor, params: Mapping[str, Tensor], block: int) -> Tensor:
    p = f"blocks.{block}.ffn"
    hidden = gelu(add(matmul(x, params[f"{p}.w1"]), params[f"{p}.b1"]))
    return add(matmul(hidden, params[f"{p}.w2"]), params[f"{p}.b2"])


@dataclass
class EncoderOutput:
    y: Tensor
    heads: List[List[Tensor]] = field(default_factory=list)


def encode(e: Tensor, params: Mapping[str, Tensor], config: ModelConfig) -> EncoderOutput:
    """Pre-norm encoder stack over ``M x d`` or ``b x M x d`` embeddings."""
    if e.shape[-1] != config.d:
        raise ShapeError(f"embedding width {e.shape[-1]} != model d {config.d}")
    pe = Tensor(positional_encoding(e.shape[-2], config.d), dtype=e.dtype)
    x = add(e, pe)
    all_heads: List[List[Tensor]] = []
    for b in range(config.blocks):
        p = f"blocks.{b}"
        attn = _attention(layer_norm(x, params[f"{p}.ln1.gain"], params[f"{p}.ln1.bias"]), params, b, config)
        x = add(x, attn.final)
        x = add(x, _ffn(layer_norm(x, params[f"{p}.ln2.gain"], params[f"{p}.ln2.bias"]), params, b))
        all_heads.append(attn.heads)
    y = layer_norm(x, params["final_ln.gain"], params["final_ln.bias"])
    return EncoderOutput(y=y, heads=all_heads)


def prediction_head(last: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    hidden = gelu(add(matmul(last, params["head.w_a"]), params["head.b_a"]))
    return add(matmul(hidden, params["head.w_b"]), params["head.b_b"])


@dataclass
class ForwardPass:
    prediction: Tensor
    encoded: EncoderOutput


def as_batch(inputs: np.ndarray | Tensor, config: ModelConfig) -> Tensor:
    if isinstance(inputs, Tensor):
        if inputs.ndim != 3:
            raise ShapeError(f"batched inputs must be b x M x d, got {inputs.shape}")
        return inputs
    arr = np.asarray(inputs, dtype=config.dtype)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[-1] != config.d:
        raise ShapeError(f"inputs must be M x {config.d} or b x M x {config.d}, got {arr.shape}")
    return Tensor(arr)


def forward(inputs: np.ndarray | Tensor, params: Mapping[str, Tensor], config: ModelConfig) -> ForwardPass:
    """Encode a batch of windows and predict the next embedding of each from its last row."""
    x = as_batch(inputs, config)
    encoded = encode(x, params, config)
    return ForwardPass(prediction=prediction_head(take_row(encoded.y, -1), params), encoded=encoded)


def predict_next(inputs: np.ndarray, state: ModelState, config: ModelConfig) -> np.ndarray:
    """Predicted next embedding: ``d`` for an ``M x d`` window, ``b x d`` for a batch."""
    out = forward(inputs, state.tensors(), config).prediction.data
    return out[0] if np.ndim(inputs) == 2 else out


def rollout(
    inputs: np.ndarray,
    steps: int,
    state: ModelState,
    config: ModelConfig,
    windows: List[np.ndarray] | None = None,
) -> np.ndarray:
    """Autoregressive prediction: drop the oldest row, append the prediction, repeat.

    Returns ``k x d`` for one window or ``b x k x d`` for a batch. When ``windows``
    is a list, the window fed at each step is appended to it.
    """
    if steps < 1:
        raise ValueError(f"rollout needs at least one step, got {steps}")
    single = np.ndim(inputs) == 2
    window = np.asarray(inputs, dtype=config.dtype)
    if single:
        window = window[None]
    params = state.tensors()
    preds = []
    for _ in range(steps):
        if windows is not None:
            windows.append(window[0].copy() if single else window.copy())
        nxt = forward(window, params, config).prediction.data
        preds.append(nxt)
        window = np.concatenate([window[:, 1:, :], nxt[:, None, :]], axis=1)
    out = np.stack(preds, axis=1)
    return out[0] if single else out


@dataclass
class ParamTable:
    rows: List[Tuple[str, int]]

    @property
    def total(self) -> int:
        return sum(count for _, count in self.rows)

    def as_dict(self) -> Dict[str, int]:
        return dict(self.rows)


def param_count(config: ModelConfig) -> ParamTable:
    """Closed-form parameter count per component."""
    d, f, h, blocks = config.d, config.ffn, config.hidden, config.blocks
    attn = attention_param_count(config.variant, d, config.heads, config.head_width)
    return ParamTable(rows=[
        ("attention", blocks * attn),
        ("layer_norms", blocks * 2 * (2 * d)),
        ("ffn", blocks * (d * f + f + f * d + d)),
        ("final_layer_norm", 2 * d),
        ("prediction_head", d * h + h + h * d + d),
    ])
