"""Dense tensors with reverse-mode automatic differentiation.

Only the operations the next-frame model needs are provided. Tensors have rank
0 to 3 (``batch x M x d`` at most), are row-major numpy arrays, and are never
mutated after a forward op creates them. Broadcasting is limited to scalars and
to an operand whose shape equals the trailing shape of the other (per-row bias,
positional table added to every batch item).
"""
from __future__ import annotations

import logging
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import NonFiniteError, ShapeError, TensorError

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.floating]
BackwardFn = Callable[[Array], Tuple["Array | None", ...]]

MAX_RANK = 3
_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_K = 0.044715

# Test hook: when set, matmul's backward rule scales dA by 1.5.
_backward_fault = False


def inject_backward_fault(enabled: bool) -> None:
    global _backward_fault
    _backward_fault = enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(
        self,
        data: npt.ArrayLike,
        requires_grad: bool = False,
        dtype: npt.DTypeLike | None = None,
        op: str = "leaf",
    ) -> None:
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        if arr.ndim > MAX_RANK:
            raise ShapeError(f"rank {arr.ndim} exceeds {MAX_RANK}")
        if any(extent < 1 for extent in arr.shape):
            raise ShapeError(f"extents must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{op} produced non-finite values")
        self.data: Array = arr
        self.requires_grad = requires_grad
        # None until a backward pass reaches this tensor
        self.grad: Array | None = None
        self.op = op
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def backward(self) -> None:
        backward(self)

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scalar_mul(self, float(other))

    __rmul__ = __mul__


def _make(data: Array, parents: Sequence[Tensor], fn: BackwardFn, op: str) -> Tensor:
    out = Tensor(data, op=op)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = fn
    return out


class Graph:
    """Topologically ordered op nodes reachable from an output tensor."""

    def __init__(self, nodes: List[Tensor]) -> None:
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        order: List[Tensor] = []
        visited: set[int] = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)


def backward(loss: Tensor) -> None:
    """Fill ``grad`` of every requires_grad leaf with d(loss)/d(leaf)."""
    if loss.size != 1 or loss.ndim != 0:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    graph = Graph.from_output(loss)
    for node in graph.nodes:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(graph.nodes):
        if node._backward is None or node.grad is None:
            continue
        parent_grads = node._backward(node.grad)
        for parent, g in zip(node._parents, parent_grads):
            if g is not None and parent.requires_grad:
                parent._accumulate(g)


def _swap(a: Array) -> Array:
    return np.swapaxes(a, -1, -2)


def _reduce_to(g: Array, shape: Tuple[int, ...]) -> Array:
    """Sum leading axes of ``g`` until it has ``shape``."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    out = g.sum(axis=tuple(range(lead))) if lead > 0 else g
    return out.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul batch extents differ: {a.shape} @ {b.shape}")

    def fn(g: Array) -> Tuple[Array | None, ...]:
        da = _reduce_to(g @ _swap(b.data), a.shape) if a.requires_grad else None
        db = _reduce_to(_swap(a.data) @ g, b.shape) if b.requires_grad else None
        if _backward_fault and da is not None:
            da = da * 1.5
        return da, db

    return _make(np.matmul(a.data, b.data), (a, b), fn, "matmul")


def transpose(x: Tensor) -> Tensor:
    if x.ndim < 2:
        raise ShapeError(f"transpose needs rank >= 2, got {x.shape}")
    return _make(_swap(x.data).copy(), (x,), lambda g: (_swap(g),), "transpose")


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    if b.shape == a.shape or b.ndim == 0:
        return
    if b.ndim < a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise ShapeError(f"{op}: cannot combine {a.shape} with {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b where b has a's shape, a's trailing shape, or is a scalar."""
    _check_broadcast(a, b, "add")

    def fn(g: Array) -> Tuple[Array | None, ...]:
        return g, _reduce_to(g, b.shape) if b.requires_grad else None

    return _make(a.data + b.data, (a, b), fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes differ {a.shape} vs {b.shape}")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def scalar_mul(x: Tensor, c: float) -> Tensor:
    return _make(x.data * c, (x,), lambda g: (g * c,), "scalar_mul")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shapes differ {a.shape} vs {b.shape}")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "hadamard")


def gelu(x: Tensor) -> Tensor:
    """tanh approximation of GELU."""
    u = x.data
    t = np.tanh(_GELU_C * (u + _GELU_K * u ** 3))

    def fn(g: Array) -> Tuple[Array | None, ...]:
        dt = (1.0 - t ** 2) * _GELU_C * (1.0 + 3.0 * _GELU_K * u ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * u * dt),)

    return _make(0.5 * u * (1.0 + t), (x,), fn, "gelu")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(f"layer_norm: gain/bias must be ({width},), got {gain.shape}/{bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def fn(g: Array) -> Tuple[Array | None, ...]:
        dxhat = g * gain.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, _reduce_to(g * xhat, gain.shape), _reduce_to(g, bias.shape)

    return _make(xhat * gain.data + bias.data, (x, gain, bias), fn, "layer_norm")


def softmax_rows(x: Tensor, scale: float) -> Tensor:
    """Row-wise softmax of x / scale, stabilised by subtracting the row max."""
    if scale <= 0:
        raise TensorError(f"softmax scale must be positive, got {scale}")
    z = x.data / scale
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    y = e / e.sum(axis=-1, keepdims=True)

    def fn(g: Array) -> Tuple[Array | None, ...]:
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)) / scale,)

    return _make(y, (x,), fn, "softmax_rows")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_cols needs at least one tensor")
    lead = parts[0].shape[:-1]
    for p in parts:
        if p.shape[:-1] != lead:
            raise ShapeError(f"concat_cols: leading shapes differ {lead} vs {p.shape[:-1]}")
    bounds = np.cumsum([0] + [p.shape[-1] for p in parts])

    def fn(g: Array) -> Tuple[Array | None, ...]:
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=-1), tuple(parts), fn, "concat_cols")


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    width = x.shape[-1]
    if not 0 <= start < stop <= width:
        raise ShapeError(f"slice_cols: [{start}, {stop}) outside width {width}")

    def fn(g: Array) -> Tuple[Array | None, ...]:
        full = np.zeros_like(x.data)
        full[..., start:stop] = g
        return (full,)

    return _make(x.data[..., start:stop].copy(), (x,), fn, "slice_cols")


def take_row(x: Tensor, index: int) -> Tensor:
    """Select one row along the second-to-last axis (``b x M x d -> b x d``)."""
    if x.ndim < 2:
        raise ShapeError(f"take_row needs rank >= 2, got {x.shape}")
    rows = x.shape[-2]
    if not -rows <= index < rows:
        raise ShapeError(f"take_row: index {index} outside {rows} rows")

    def fn(g: Array) -> Tuple[Array | None, ...]:
        full = np.zeros_like(x.data)
        full[..., index, :] = g
        return (full,)

    return _make(x.data[..., index, :].copy(), (x,), fn, "take_row")


def tensor_sum(x: Tensor) -> Tensor:
    return _make(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape),), "sum")


def mean(x: Tensor) -> Tensor:
    n = x.size
    return _make(
        np.asarray(x.data.mean()), (x,), lambda g: (np.broadcast_to(g / n, x.shape),), "mean"
    )


def sqnorm(x: Tensor) -> Tensor:
    return _make(np.asarray((x.data ** 2).sum()), (x,), lambda g: (2.0 * g * x.data,), "sqnorm")


def l2norm(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Euclidean norm; the gradient divides by max(norm, eps)."""
    norm = float(np.sqrt((x.data ** 2).sum()))

    def fn(g: Array) -> Tuple[Array | None, ...]:
        return (g * x.data / max(norm, eps),)

    return _make(np.asarray(norm, dtype=x.dtype), (x,), fn, "l2norm")


def absolute(x: Tensor) -> Tensor:
    """|x| with subgradient 0 at 0."""
    return _make(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "absolute")


def row_cosine(a: Tensor, b: Tensor, eps: float = 1e-8) -> Tensor:
    """Cosine similarity of matching rows (``... x w -> ...``).

    Rows whose norm product is at most ``eps`` contribute 0 with zero gradient.
    """
    if a.shape != b.shape or a.ndim < 1:
        raise ShapeError(f"row_cosine: shapes differ {a.shape} vs {b.shape}")
    na = np.sqrt((a.data ** 2).sum(axis=-1))
    nb = np.sqrt((b.data ** 2).sum(axis=-1))
    denom = na * nb
    valid = denom > eps
    safe_denom = np.where(valid, denom, 1.0)
    dot = (a.data * b.data).sum(axis=-1)
    cos = np.where(valid, dot / safe_denom, 0.0)

    def fn(g: Array) -> Tuple[Array | None, ...]:
        gv = np.where(valid, g, 0.0)[..., None]
        safe_na2 = np.where(valid, na ** 2, 1.0)[..., None]
        safe_nb2 = np.where(valid, nb ** 2, 1.0)[..., None]
        c = cos[..., None]
        d = safe_denom[..., None]
        da = gv * (b.data / d - c * a.data / safe_na2)
        db = gv * (a.data / d - c * b.data / safe_nb2)
        return da, db

    return _make(np.asarray(cos, dtype=a.dtype), (a, b), fn, "row_cosine")


def add_all(values: Iterable[Tensor]) -> Tensor:
    """Sum of scalar tensors, accumulated in iteration order."""
    total: Tensor | None = None
    for v in values:
        total = v if total is None else add(total, v)
    if total is None:
        raise ShapeError("add_all needs at least one tensor")
    return total
