from __future__ import annotations

import numpy as np
import pytest

from scvfp.core.errors import ShapeError
from scvfp.core.optim import AdamW, adamw_step, clip_grad_norm, global_grad_norm


def test_first_step_moves_by_lr_against_the_gradient_sign() -> None:
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([3.0, -0.1, 0.0])}
    adamw_step(params, grads, {}, {}, t=1, lr=0.1, weight_decay=0.0)
    # m_hat = g and v_hat = g^2 on step 1, so the move is lr * sign(g).
    np.testing.assert_allclose(params["w"], [0.9, -1.9, 0.5], atol=1e-7)


def test_zero_gradient_without_decay_leaves_params() -> None:
    params = {"w": np.array([[1.0, 2.0], [3.0, 4.0]])}
    opt = AdamW(lr=0.01, weight_decay=0.0)
    for _ in range(3):
        opt.step(params, {"w": np.zeros((2, 2))})
    np.testing.assert_array_equal(params["w"], [[1.0, 2.0], [3.0, 4.0]])
    assert opt.t == 3


def test_weight_decay_is_decoupled() -> None:
    params = {"w": np.array([2.0])}
    adamw_step(params, {"w": np.zeros(1)}, {}, {}, t=1, lr=0.1, weight_decay=0.5)
    np.testing.assert_allclose(params["w"], [2.0 - 0.1 * 0.5 * 2.0])


def test_missing_gradient_counts_as_zero() -> None:
    params = {"a": np.array([1.0]), "b": np.array([1.0])}
    adamw_step(params, {"a": np.array([1.0])}, {}, {}, t=1, lr=0.1, weight_decay=0.0)
    np.testing.assert_allclose(params["a"], [0.9], atol=1e-7)
    np.testing.assert_array_equal(params["b"], [1.0])


def test_quadratic_bowl_descends() -> None:
    params = {"x": np.array([3.0, -4.0])}
    opt = AdamW(lr=0.05, weight_decay=0.0)
    losses = []
    for _ in range(60):
        x = params["x"]
        losses.append(float((x ** 2).sum()))
        opt.step(params, {"x": 2.0 * x})
    assert all(b < a for a, b in zip(losses[5:30], losses[6:31]))
    assert losses[-1] < losses[0] * 0.5


def test_dtype_is_preserved() -> None:
    params = {"w": np.ones(3, dtype=np.float32)}
    AdamW(lr=0.01).step(params, {"w": np.ones(3, dtype=np.float32)})
    assert params["w"].dtype == np.float32


def test_invalid_inputs() -> None:
    with pytest.raises(ShapeError):
        adamw_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, {}, {}, t=1, lr=0.1)
    with pytest.raises(ValueError):
        adamw_step({"w": np.zeros(2)}, {"w": np.zeros(2)}, {}, {}, t=0, lr=0.1)
    with pytest.raises(ValueError):
        AdamW(lr=0.0)
    with pytest.raises(ValueError):
        AdamW(betas=(0.9, 1.0))


def test_clip_grad_norm() -> None:
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert global_grad_norm(grads) == pytest.approx(5.0)
    assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose([grads["a"][0], grads["b"][0]], [0.6, 0.8])
    small = {"a": np.array([0.1])}
    clip_grad_norm(small, 1.0)
    np.testing.assert_array_equal(small["a"], [0.1])
