"""Minimal dense-tensor reverse-mode autodiff on float64 numpy arrays.

Just enough machinery for small MLPs, a gated recurrent cell, layer norm
and masked log-softmax losses. Graphs are built eagerly as a tape of Var
nodes; backward() walks the tape in reverse topological order exactly once.
Everything is float64 for exact reproducibility.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (fast inference path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Var:
    """A node in the computation tape: value, grad and a backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad", "name")

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents if _GRAD_ENABLED else ()
        self._backward = backward if _GRAD_ENABLED else None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Var(shape={self.data.shape}{tag})"

    # convenience operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data, name: str) -> Var:
    v = Var(np.array(data, dtype=np.float64))
    v.requires_grad = True
    v.name = name
    return v


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum grad back down to `shape` after numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward) -> Var:
    if not _GRAD_ENABLED:
        return Var(data)
    return Var(data, parents=parents, backward=backward)


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out_data = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out_data, (a, b), bwd)


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out_data = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out_data, (a, b), bwd)


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out_data = a.data * b.data

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out_data, (a, b), bwd)


def neg(a) -> Var:
    a = as_var(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def square(a) -> Var:
    a = as_var(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out_data, (a, b), bwd)


def relu(a) -> Var:
    # subgradient 0 at the kink
    a = as_var(a)
    keep = a.data > 0.0
    return _make(np.where(keep, a.data, 0.0), (a,), lambda g: (g * keep,))


def tanh(a) -> Var:
    a = as_var(a)
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


def sigmoid(a) -> Var:
    a = as_var(a)
    s = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def exp(a) -> Var:
    a = as_var(a)
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a) -> Var:
    a = as_var(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def vsum(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out_data, (a,), bwd)


def mean(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(vars_, axis=0) -> Var:
    vars_ = [as_var(v) for v in vars_]
    out_data = np.concatenate([v.data for v in vars_], axis=axis)
    sizes = [v.data.shape[axis] for v in vars_]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out_data, tuple(vars_), bwd)


def gather_rows(a, index) -> Var:
    """Select rows of a 2-D Var by integer index (duplicates accumulate)."""
    a = as_var(a)
    index = np.asarray(index, dtype=np.intp)
    out_data = a.data[index]

    def bwd(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, index, g)
        return (ga,)

    return _make(out_data, (a,), bwd)


def take_flat(a, flat_index) -> Var:
    """Pick individual elements of a Var by flattened index, returns 1-D."""
    a = as_var(a)
    flat_index = np.asarray(flat_index, dtype=np.intp)
    out_data = a.data.reshape(-1)[flat_index]

    def bwd(g):
        ga = np.zeros(a.data.size)
        np.add.at(ga, flat_index, g)
        return (ga.reshape(a.shape),)

    return _make(out_data, (a,), bwd)


def narrow(a, start, length, axis=1) -> Var:
    """Contiguous slice along an axis (used to split fused gate matrices)."""
    a = as_var(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out_data = a.data[sl]

    def bwd(g):
        ga = np.zeros_like(a.data)
        ga[sl] = g
        return (ga,)

    return _make(out_data, (a,), bwd)


def transpose(a) -> Var:
    a = as_var(a)
    return _make(a.data.T, (a,), lambda g: (g.T,))


def reshape(a, shape) -> Var:
    a = as_var(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def layer_norm(a, gain, bias, eps=1e-6) -> Var:
    """Normalize over the last axis, then scale and shift."""
    a, gain, bias = as_var(a), as_var(gain), as_var(bias)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data
    n = a.data.shape[-1]

    def bwd(g):
        g_xhat = g * gain.data
        # standard layer-norm backward over the last axis
        ga = inv * (
            g_xhat
            - g_xhat.mean(axis=-1, keepdims=True)
            - xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True)
        )
        g_gain = _unbroadcast(g * xhat, gain.shape)
        g_bias = _unbroadcast(g, bias.shape)
        return ga, g_gain, g_bias

    return _make(out_data, (a, gain, bias), bwd)


def log_softmax(a, axis=-1) -> Var:
    a = as_var(a)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse
    sm = np.exp(out_data)

    def bwd(g):
        return (g - sm * g.sum(axis=axis, keepdims=True),)

    return _make(out_data, (a,), bwd)


def backward(loss: Var) -> None:
    """Accumulate gradients of a scalar loss into every reachable node."""
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        for p, g in zip(node._parents, node._backward(node.grad)):
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad += g


def grads_of(loss: Var, params: dict[str, Var]) -> dict[str, np.ndarray]:
    """d(loss)/d(param) for every named parameter; zeros if unreachable."""
    for p in params.values():
        p.grad = None
    backward(loss)
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Var], lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {k!r}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                g = np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * (g * g)
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def gradient_check(build_loss, params: dict[str, Var], h: float = 1e-5) -> float:
    """Max relative error between analytic grads and central differences.

    build_loss is a zero-argument callable that rebuilds the forward graph
    from the current parameter values and returns the scalar loss Var.
    """
    analytic = grads_of(build_loss(), params)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = build_loss().item()
            flat[i] = orig - h
            lm = build_loss().item()
            flat[i] = orig
            num = (lp - lm) / (2 * h)
            err = abs(ga[i] - num) / (abs(num) + 1e-8)
            worst = max(worst, err)
    return worst


# --- parameter checkpoint format -------------------------------------------
# magic, format version, parameter count; then per parameter: name, shape,
# raw little-endian float64 payload.

_CKPT_MAGIC = b"CFCK"
_CKPT_VERSION = 1


def save_checkpoint(path, params: dict[str, Var]) -> None:
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<II", _CKPT_VERSION, len(params)))
        for name in sorted(params):
            data = np.ascontiguousarray(params[name].data, dtype="<f8")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}q", *data.shape))
            f.write(data.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a chunkflow checkpoint")
        version, count = struct.unpack("<II", f.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}q", f.read(8 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape).copy()
            out[name] = data
        return out


def load_into(params: dict[str, Var], path) -> None:
    loaded = load_checkpoint(path)
    missing = sorted(set(params) ^ set(loaded))
    if missing:
        raise ValueError(f"checkpoint/parameter name mismatch: {missing}")
    for name, p in params.items():
        if loaded[name].shape != p.data.shape:
            raise ValueError(
                f"shape mismatch for {name!r}: {loaded[name].shape} vs {p.data.shape}"
            )
        p.data = loaded[name]
