"""AdamW with decoupled weight decay and bias-corrected moments."""
from __future__ import annotations

import logging
import math
from typing import Dict, Mapping, MutableMapping, Tuple

import numpy as np

from .errors import ShapeError

logger = logging.getLogger(__name__)


def adamw_step(
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    m: MutableMapping[str, np.ndarray],
    v: MutableMapping[str, np.ndarray],
    t: int,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> None:
    """One update at step ``t`` (1-based), in place on ``params``, ``m`` and ``v``.

    theta <- theta - lr*wd*theta, then theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    """
    if t < 1:
        raise ValueError(f"AdamW step count starts at 1, got {t}")
    b1, b2 = betas
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(theta)
        if g.shape != theta.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        if name not in m:
            m[name] = np.zeros_like(theta)
            v[name] = np.zeros_like(theta)
        m[name] = b1 * m[name] + (1.0 - b1) * g
        v[name] = b2 * v[name] + (1.0 - b2) * g * g
        m_hat = m[name] / c1
        v_hat = v[name] / c2
        decayed = theta - lr * weight_decay * theta
        params[name] = (decayed - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(theta.dtype)


def global_grad_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is at most ``max_norm``."""
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = (grads[name] * scale).astype(grads[name].dtype)
    return norm


class AdamW:
    def __init__(
        self,
        lr: float = 1e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ) -> None:
        if lr <= 0:
            raise ValueError(f"Invalid learning rate: {lr}")
        if not all(0.0 <= b < 1.0 for b in betas):
            raise ValueError(f"Invalid betas: {betas}")
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: MutableMapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        adamw_step(
            params, grads, self.m, self.v, self.t,
            lr=self.lr, betas=self.betas, eps=self.eps, weight_decay=self.weight_decay,
        )
