"""Minimal reverse-mode differentiation over float64 numpy buffers.

Only the operations the model needs are implemented: affine maps, tanh,
sigmoid, softplus, exp/log, elementwise arithmetic with broadcasting,
axis sums, stable softmax / log-sum-exp, clamp, row gather, and circular
correlation. Every op checks its output for non-finite values and raises
NumericError naming the op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

LOG_2PI = float(np.log(2.0 * np.pi))
FFT_MIN_LEN = 32  # circular correlation below this length runs the naive loops


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return float(self.data.reshape(())[()])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _guard(op: str, data: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by op {op!r}")
    return data


def _make(op: str, data, parents, backward) -> Tensor:
    data = _guard(op, np.asarray(data, dtype=np.float64))
    tracked = tuple(p for p in parents if p.requires_grad)
    if not tracked:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    g = _unbroadcast(np.asarray(g, dtype=np.float64), t.data.shape)
    t.grad = g if t.grad is None else t.grad + g


def backward(loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(node) into .grad over the reachable graph."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise / linear algebra

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        _accum(a, g)
        _accum(b, g)

    return _make("add", a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        _accum(a, g)
        _accum(b, -g)

    return _make("sub", a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make("mul", a.data * b.data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        _accum(a, g / b.data)
        _accum(b, -g * a.data / (b.data * b.data))

    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _make("div", out, (a, b), back)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make("matmul", a.data @ b.data, (a, b), back)


def square(x) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, 2.0 * x.data * g)

    return _make("square", x.data * x.data, (x,), back)


def absolute(x) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, np.sign(x.data) * g)

    return _make("abs", np.abs(x.data), (x,), back)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def back(g):
        _accum(x, (1.0 - out * out) * g)

    return _make("tanh", out, (x,), back)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def back(g):
        _accum(x, out * g)

    return _make("exp", out, (x,), back)


def log(x) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, g / x.data)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _make("log", out, (x,), back)


def _sigmoid_arr(x: np.ndarray) -> np.ndarray:
    # branch on sign so neither exp can overflow
    ex_neg = np.exp(-np.clip(x, 0.0, None))
    ex_pos = np.exp(np.clip(x, None, 0.0))
    return np.where(x >= 0, 1.0 / (1.0 + ex_neg), ex_pos / (1.0 + ex_pos))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid_arr(x.data)

    def back(g):
        _accum(x, out * (1.0 - out) * g)

    return _make("sigmoid", out, (x,), back)


def softplus(x) -> Tensor:
    """log(1 + e^x), overflow-safe; gradient is sigmoid(x)."""
    x = as_tensor(x)
    out = np.log1p(np.exp(-np.abs(x.data))) + np.maximum(x.data, 0.0)

    def back(g):
        _accum(x, _sigmoid_arr(x.data) * g)

    return _make("softplus", out, (x,), back)


def clamp(x, lo=None, hi=None) -> Tensor:
    """Clip values; gradient passes through inside [lo, hi], zero outside."""
    x = as_tensor(x)
    out = np.clip(x.data, lo, hi)
    inside = np.ones_like(x.data)
    if lo is not None:
        inside = inside * (x.data >= lo)
    if hi is not None:
        inside = inside * (x.data <= hi)

    def back(g):
        _accum(x, g * inside)

    return _make("clamp", out, (x,), back)


def relu(x) -> Tensor:
    return clamp(x, lo=0.0)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.data.shape))

    return _make("sum", out, (x,), back)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, g.reshape(x.data.shape))

    return _make("reshape", x.data.reshape(shape), (x,), back)


def transpose(x) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, g.T)

    return _make("transpose", x.data.T.copy(), (x,), back)


def logsumexp(x, axis, keepdims=False) -> Tensor:
    """Shift-stable log-sum-exp along one axis."""
    x = as_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out = m + np.log(total)
    soft = shifted / total

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, soft * g)

    return _make("logsumexp", out if keepdims else np.squeeze(out, axis=axis),
                 (x,), back)


def softmax(x, axis=-1) -> Tensor:
    """Shift-stable softmax along one axis."""
    x = as_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accum(x, out * (g - dot))

    return _make("softmax", out, (x,), back)


def gather_rows(table, idx) -> Tensor:
    """Select rows of a 2-D tensor; the backward pass scatter-adds."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx, g)
            table.grad = gt if table.grad is None else table.grad + gt

    return _make("gather_rows", table.data[idx], (table,), back)


# ---------------------------------------------------------------------------
# circular correlation (the holographic composition operator)

def _corr_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    out = np.zeros_like(a)
    for k in range(d):
        out[..., k] = (a * np.roll(b, -k, axis=-1)).sum(axis=-1)
    return out


def _conv_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    out = np.zeros_like(a)
    for k in range(d):
        out[..., k] = (a * np.roll(b[..., ::-1], k + 1, axis=-1)).sum(axis=-1)
    return out


def _corr_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    return np.fft.irfft(np.conj(np.fft.rfft(a, axis=-1)) * np.fft.rfft(b, axis=-1),
                        n=d, axis=-1)


def _conv_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    return np.fft.irfft(np.fft.rfft(a, axis=-1) * np.fft.rfft(b, axis=-1),
                        n=d, axis=-1)


def corr_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """out_k = sum_i a_i * b_{(i+k) mod d}, rowwise on the last axis."""
    if a.shape != b.shape:
        raise ValueError(f"circular correlation shape mismatch {a.shape} vs {b.shape}")
    if a.shape[-1] >= FFT_MIN_LEN:
        return _corr_fft(a, b)
    return _corr_naive(a, b)


def _conv_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] >= FFT_MIN_LEN:
        return _conv_fft(a, b)
    return _conv_naive(a, b)


def circular_correlation(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = corr_arrays(a.data, b.data)

    def back(g):
        _accum(a, corr_arrays(g, b.data))
        _accum(b, _conv_arrays(a.data, g))

    return _make("circular_correlation", out, (a, b), back)


# ---------------------------------------------------------------------------
# parameters and Adam

@dataclass
class AdamConfig:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in (0, 1)")


@dataclass
class _AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class ParamStore:
    """Named trainable tensors with per-parameter Adam state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._state: dict[str, _AdamState] = {}
        self._trainable: dict[str, bool] = {}

    def register(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        tensor.requires_grad = True
        self._params[name] = tensor
        self._state[name] = _AdamState(np.zeros_like(tensor.data),
                                       np.zeros_like(tensor.data))
        self._trainable[name] = True
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def set_trainable(self, flag: bool, prefixes=("",)) -> None:
        """Toggle training (and gradient accumulation) for matching params."""
        for name, t in self._params.items():
            if any(name.startswith(p) for p in prefixes):
                self._trainable[name] = flag
                t.requires_grad = flag

    def trainable_names(self) -> list[str]:
        return [n for n, f in self._trainable.items() if f]

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def fill_missing_grads(self) -> None:
        """Unreachable parameters get an explicit zero gradient."""
        for name in self.trainable_names():
            t = self._params[name]
            if t.grad is None:
                t.grad = np.zeros_like(t.data)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, arr in state.items():
            tgt = self._params[name]
            if tgt.data.shape != arr.shape:
                raise ValueError(f"shape mismatch loading {name!r}")
            tgt.data = np.array(arr, dtype=np.float64)


def adam_step(store: ParamStore, cfg: AdamConfig) -> None:
    """Bias-corrected Adam update on all trainable params; clears gradients."""
    for name in store.trainable_names():
        p = store[name]
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        st = store._state[name]
        st.step += 1
        st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g
        st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * g * g
        m_hat = st.m / (1.0 - cfg.beta1 ** st.step)
        v_hat = st.v / (1.0 - cfg.beta2 ** st.step)
        p.data = p.data - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    store.zero_grads()
