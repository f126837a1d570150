from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from ..utils.prng import Xoshiro256pp
from .config import ModelConfig
from .errors import TensorError
from .model import forward, init_state
from .objective import head_cosines
from .tensor import Tensor
from .trainer import batch_loss

logger = logging.getLogger(__name__)

Objective = Callable[[Mapping[str, Tensor]], Tensor]
KinkWatch = Callable[[Mapping[str, np.ndarray]], np.ndarray]


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: Dict[str, float] = field(default_factory=dict)
    worst: Tuple[str, Tuple[int, ...]] | None = None
    checked: int = 0
    skipped: int = 0


def relative_error(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def analytic_gradients(f: Objective, params: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    leaves = {name: Tensor(value, requires_grad=True) for name, value in params.items()}
    loss = f(leaves)
    loss.backward()
    return {
        name: leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for name, leaf in leaves.items()
    }


def _evaluate(f: Objective, params: Mapping[str, np.ndarray]) -> float:
    return f({name: Tensor(value) for name, value in params.items()}).item()


def grad_check(
    f: Objective,
    params: Mapping[str, np.ndarray],
    eps: float = 1e-5,
    kink_watch: KinkWatch | None = None,
    kink_tol: float = 1e-3,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare autodiff gradients of ``f`` with central differences, element by element.

    When ``kink_watch`` is given it must return the values whose absolute value
    enters the objective (head-pair cosines); an element is skipped if moving it
    by +/-eps changes one of those values while it sits within ``kink_tol`` of 0.
    ``floor`` bounds the relative-error denominator from below.
    """
    for name, value in params.items():
        if value.dtype != np.float64:
            raise TensorError(f"grad_check needs 64-bit parameters, {name} is {value.dtype}")

    work = {name: np.array(value, copy=True) for name, value in params.items()}
    grads = analytic_gradients(f, work)

    report = GradCheckReport(max_rel_error=0.0)
    for name, value in work.items():
        worst_here = 0.0
        flat = value.reshape(-1)
        grad_flat = grads[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            f_plus = _evaluate(f, work)
            watched_plus = np.array(kink_watch(work), copy=True) if kink_watch else None
            flat[i] = original - eps
            f_minus = _evaluate(f, work)
            watched_minus = np.array(kink_watch(work), copy=True) if kink_watch else None
            flat[i] = original

            if watched_plus is not None and watched_minus is not None:
                moved = watched_plus != watched_minus
                near = np.minimum(np.abs(watched_plus), np.abs(watched_minus)) < kink_tol
                if np.any(moved & near):
                    report.skipped += 1
                    continue

            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = relative_error(float(grad_flat[i]), numeric, floor)
            report.checked += 1
            worst_here = max(worst_here, err)
            if report.worst is None or err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, tuple(int(j) for j in np.unravel_index(i, value.shape)))
        report.per_tensor[name] = worst_here

    logger.debug(
        "grad_check: %d elements checked, %d skipped, max rel error %.3e",
        report.checked, report.skipped, report.max_rel_error,
    )
    return report


TINY_MODEL = dict(d=8, seq_len=3, heads=2, d_head=4, blocks=1, ffn_width=32, head_hidden=8)


def tiny_model_config(variant: str = "scmhsa", **overrides: object) -> ModelConfig:
    """The gradient-check model: d=8, N=2, B=1, M=3, lambda=1, 64-bit."""
    fields: Dict[str, object] = {**TINY_MODEL, "variant": variant, "ssl_weight": 1.0, "precision": 64}
    fields.update(overrides)
    return ModelConfig(**fields)  # type: ignore[arg-type]


def model_grad_check(
    config: ModelConfig,
    seed: int = 2023,
    batch: int = 2,
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Finite-difference check of the total loss over every model parameter.

    Inputs, labels and weights are drawn from a seeded generator.
    """
    if config.precision != 64:
        raise TensorError("gradient checks run at 64-bit precision")
    rng = Xoshiro256pp(seed)
    state = init_state(config, rng)
    inputs = rng.gaussians(batch * config.seq_len * config.d).reshape(batch, config.seq_len, config.d)
    labels = rng.gaussians(batch * config.d).reshape(batch, config.d)

    def objective(params: Mapping[str, Tensor]) -> Tensor:
        return batch_loss(params, inputs, labels, config).total

    def watched(params: Mapping[str, np.ndarray]) -> np.ndarray:
        out = forward(inputs, {k: Tensor(v) for k, v in params.items()}, config)
        return head_cosines(out.encoded.heads)

    report = grad_check(objective, state.arrays(), eps=eps, kink_watch=watched, floor=floor)
    logger.info(
        "grad_check %s: max rel error %.3e over %d elements (%d skipped near |cos| kinks)",
        config.variant, report.max_rel_error, report.checked, report.skipped,
    )
    return report
