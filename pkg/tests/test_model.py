from __future__ import annotations

import numpy as np
import pytest

from scvfp.core.attention import attention_param_count
from scvfp.core.config import ModelConfig
from scvfp.core.errors import ShapeError
from scvfp.core.model import (
    ModelState,
    encode,
    forward,
    init_state,
    param_count,
    positional_encoding,
    predict_next,
    rollout,
    state_shapes,
)
from scvfp.core.tensor import Tensor, layer_norm
from scvfp.utils.prng import Xoshiro256pp

TINY = ModelConfig(d=8, seq_len=3, heads=2, d_head=4, blocks=1, ffn_width=32, head_hidden=8)
FULL = ModelConfig(d=768, seq_len=5, heads=6, d_head=128, blocks=6, ffn_width=3072, head_hidden=768)


def _window(cfg: ModelConfig, seed: int = 0, batch: int | None = None) -> np.ndarray:
    shape = (cfg.seq_len, cfg.d) if batch is None else (batch, cfg.seq_len, cfg.d)
    return np.random.default_rng(seed).standard_normal(shape)


def test_positional_encoding_values() -> None:
    pe = positional_encoding(5, 8)
    assert pe.shape == (5, 8)
    np.testing.assert_array_equal(pe[0, 0::2], 0.0)
    np.testing.assert_array_equal(pe[0, 1::2], 1.0)
    assert pe[1, 0] == pytest.approx(0.841471, abs=1e-6)
    assert np.all(np.abs(pe) <= 1.0)


def test_positional_encoding_rejects_odd_width() -> None:
    with pytest.raises(ShapeError):
        positional_encoding(3, 7)


def test_tiny_scmhsa_has_exactly_1000_parameters() -> None:
    table = param_count(TINY)
    assert table.total == 1000
    parts = table.as_dict()
    assert list(parts) == ["attention", "layer_norms", "ffn", "final_layer_norm", "prediction_head"]
    assert sum(parts.values()) == 1000
    state = init_state(TINY, Xoshiro256pp(1))
    assert state.num_parameters() == 1000


@pytest.mark.parametrize("variant", ["scmhsa", "mhsa_baseline"])
def test_param_count_matches_allocated_tensors(variant: str) -> None:
    cfg = ModelConfig(d=12, seq_len=4, heads=3, blocks=2, variant=variant)
    total = sum(int(np.prod(s)) for s in state_shapes(cfg).values())
    assert param_count(cfg).total == total


def test_full_scale_parameter_totals() -> None:
    sc = param_count(FULL).total
    base = param_count(ModelConfig(**{**FULL.__dict__, "variant": "mhsa_baseline"})).total
    assert sc == 43_691_520
    assert base == 34_844_160
    assert abs(sc - 42.7e6) / 42.7e6 < 0.05
    assert abs(base - 31.4e6) / 31.4e6 < 0.15
    assert 1.2 <= sc / base <= 1.45
    assert round(sc / base, 3) == 1.254
    block_sc = attention_param_count("scmhsa", 768, 6, 128)
    block_base = attention_param_count("mhsa_baseline", 768, 6, 128)
    assert block_sc * 3 == block_base * 8


def test_init_is_seeded_and_deterministic() -> None:
    a = init_state(TINY, Xoshiro256pp(7))
    b = init_state(TINY, Xoshiro256pp(7))
    c = init_state(TINY, Xoshiro256pp(8))
    assert list(a) == list(b)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["head.w_a"], c["head.w_a"])
    np.testing.assert_array_equal(a["final_ln.gain"], 1.0)
    np.testing.assert_array_equal(a["head.b_a"], 0.0)
    bound = 1.0 / np.sqrt(8)
    assert np.all(np.abs(a["blocks.0.ffn.w1"]) <= bound)


def test_zero_attention_and_ffn_leave_the_residual_path() -> None:
    state = init_state(TINY, Xoshiro256pp(3))
    for name in state:
        if ".attn." in name or ".ffn." in name:
            state[name] = np.zeros_like(state[name])
    e = _window(TINY)
    out = encode(Tensor(e), state.tensors(), TINY)
    expected = layer_norm(
        Tensor(e + positional_encoding(3, 8)),
        Tensor(state["final_ln.gain"]), Tensor(state["final_ln.bias"]),
    )
    np.testing.assert_allclose(out.y.data, expected.data, atol=1e-12)
    assert len(out.heads) == 1 and len(out.heads[0]) == 2


def test_zero_prediction_head_predicts_zero() -> None:
    state = init_state(TINY, Xoshiro256pp(3))
    for name in ("head.w_a", "head.b_a", "head.w_b", "head.b_b"):
        state[name] = np.zeros_like(state[name])
    np.testing.assert_array_equal(predict_next(_window(TINY), state, TINY), np.zeros(8))


def test_predict_next_reads_last_position_and_batches() -> None:
    state = init_state(TINY, Xoshiro256pp(5))
    batch = _window(TINY, batch=4)
    stacked = predict_next(batch, state, TINY)
    assert stacked.shape == (4, 8)
    one = predict_next(batch[2], state, TINY)
    assert one.shape == (8,)
    np.testing.assert_allclose(one, stacked[2], atol=1e-12)


def test_forward_is_bit_deterministic() -> None:
    state = init_state(TINY, Xoshiro256pp(5))
    e = _window(TINY, batch=2)
    a = forward(e, state.tensors(), TINY).prediction.data
    b = forward(e, state.tensors(), TINY).prediction.data
    assert a.tobytes() == b.tobytes()


def test_forward_rejects_wrong_width() -> None:
    state = init_state(TINY, Xoshiro256pp(5))
    with pytest.raises(ShapeError):
        forward(np.zeros((3, 6)), state.tensors(), TINY)


def test_rollout_one_step_equals_predict_next() -> None:
    state = init_state(TINY, Xoshiro256pp(9))
    e = _window(TINY)
    np.testing.assert_array_equal(rollout(e, 1, state, TINY)[0], predict_next(e, state, TINY))


def test_rollout_feeds_predictions_back() -> None:
    state = init_state(TINY, Xoshiro256pp(9))
    e = _window(TINY)
    seen: list[np.ndarray] = []
    preds = rollout(e, 3, state, TINY, windows=seen)
    assert preds.shape == (3, 8)
    assert len(seen) == 3
    np.testing.assert_array_equal(seen[0], e)
    np.testing.assert_array_equal(seen[1][:-1], e[1:])
    np.testing.assert_array_equal(seen[1][-1], preds[0])
    np.testing.assert_array_equal(seen[2][-1], preds[1])
    np.testing.assert_array_equal(seen[2][-2], preds[0])


def test_rollout_rejects_zero_steps() -> None:
    state = init_state(TINY, Xoshiro256pp(9))
    with pytest.raises(ValueError):
        rollout(_window(TINY), 0, state, TINY)


def _np_ln(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-5) * gain + bias


def _np_gelu(u: np.ndarray) -> np.ndarray:
    return 0.5 * u * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (u + 0.044715 * u ** 3)))


def _np_attend(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = q @ k.T / np.sqrt(q.shape[-1])
    a = np.exp(s - s.max(axis=-1, keepdims=True))
    return (a / a.sum(axis=-1, keepdims=True)) @ v


def _np_encode(e: np.ndarray, state: ModelState, cfg: ModelConfig) -> np.ndarray:
    x = e + positional_encoding(cfg.seq_len, cfg.d)
    d_h = cfg.d // cfg.heads
    for b in range(cfg.blocks):
        p = f"blocks.{b}"
        h = _np_ln(x, state[f"{p}.ln1.gain"], state[f"{p}.ln1.bias"])
        heads = []
        for i in range(cfg.heads):
            src = h[:, i * d_h:(i + 1) * d_h] if cfg.variant == "mhsa_baseline" else h
            heads.append(_np_attend(*(src @ state[f"{p}.attn.{w}.{i}"] for w in ("w_q", "w_k", "w_v"))))
        x = x + np.hstack(heads) @ state[f"{p}.attn.w_o"]
        h = _np_ln(x, state[f"{p}.ln2.gain"], state[f"{p}.ln2.bias"])
        x = x + _np_gelu(h @ state[f"{p}.ffn.w1"] + state[f"{p}.ffn.b1"]) @ state[f"{p}.ffn.w2"] + state[f"{p}.ffn.b2"]
    return _np_ln(x, state["final_ln.gain"], state["final_ln.bias"])


def _jittered_state(cfg: ModelConfig, seed: int) -> ModelState:
    state = init_state(cfg, Xoshiro256pp(seed))
    rng = np.random.default_rng(seed)
    for name in state:
        if name.rsplit(".", 1)[-1] in ("gain", "bias", "b1", "b2", "b_a", "b_b"):
            state[name] = state[name] + 0.3 * rng.standard_normal(state[name].shape)
    return state


@pytest.mark.parametrize("variant", ["scmhsa", "mhsa_baseline"])
def test_encode_matches_staged_numpy(variant: str) -> None:
    cfg = ModelConfig(d=8, seq_len=4, heads=2, d_head=4, blocks=2, ffn_width=16, head_hidden=8, variant=variant)
    state = _jittered_state(cfg, 21)
    e = _window(cfg, seed=21)
    out = encode(Tensor(e), state.tensors(), cfg)
    np.testing.assert_allclose(out.y.data, _np_encode(e, state, cfg), rtol=1e-10, atol=1e-12)


def test_predict_next_matches_numpy_head_on_last_row() -> None:
    cfg = ModelConfig(d=8, seq_len=4, heads=2, d_head=4, blocks=2, ffn_width=16, head_hidden=8)
    state = _jittered_state(cfg, 22)
    e = _window(cfg, seed=22)
    last = _np_encode(e, state, cfg)[-1]
    hidden = _np_gelu(last @ state["head.w_a"] + state["head.b_a"])
    expected = hidden @ state["head.w_b"] + state["head.b_b"]
    np.testing.assert_allclose(predict_next(e, state, cfg), expected, rtol=1e-10, atol=1e-12)
