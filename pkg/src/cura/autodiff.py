"""Dense float64 tensors with tape-based reverse-mode differentiation.

Only the primitives the CURA graph needs are provided. Every op accepts an
optional leading batch axis so a whole mini-batch can be traced at once.

    tape = Tape()
    x = tape.leaf([3.0])
    loss = sum_all(hadamard(x, x))
    grads = backward(tape, loss)
    grads[x.node].data  # array([6.])
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ParameterError, ShapeError, UsageError

ACTIVATIONS = ("sigmoid", "hard_sigmoid", "relu", "gelu", "tanh")

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """Immutable float64 array, optionally linked to a node on a Tape."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape=None, node=None):
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def traced(self):
        return self.tape is not None

    def numpy(self):
        return np.array(self.data)

    def __repr__(self):
        tag = f", node={self.node}" if self.traced else ""
        return f"Tensor(shape={self.shape}{tag})"


class Tape:
    """Ordered record of traced operations.

    Node ids are indices into the record, so parents always precede children.
    """

    def __init__(self):
        self._parents = []
        self._vjps = []
        self._shapes = []
        self._done = False

    def __len__(self):
        return len(self._parents)

    def leaf(self, value):
        """Register ``value`` as a differentiable input and return it traced."""
        value = value.data if isinstance(value, Tensor) else value
        return self._record(np.asarray(value, dtype=np.float64), (), None)

    def _record(self, value, parents, vjp):
        if self._done:
            raise UsageError("tape already consumed by backward(); start a new tape")
        node = len(self._parents)
        self._parents.append(parents)
        self._vjps.append(vjp)
        self._shapes.append(np.shape(value))
        return Tensor(value, tape=self, node=node)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(value, inputs, vjp):
    """Wrap an op result, registering it when any input is traced.

    ``vjp(grad)`` must return one upstream gradient per entry of ``inputs``.
    """
    tapes = {t.tape for t in inputs if t.traced}
    if not tapes:
        return Tensor(value)
    if len(tapes) > 1:
        raise UsageError("operands belong to different tapes")
    tape = tapes.pop()
    parents = tuple(t.node if t.traced else None for t in inputs)
    return tape._record(value, parents, vjp)


def backward(tape, loss):
    """Gradients of scalar ``loss`` w.r.t. every node on ``tape``.

    Returns a dict node-id -> Tensor. Leaves that do not influence the loss
    get an explicit zero gradient.
    """
    if not isinstance(loss, Tensor) or loss.tape is not tape:
        raise UsageError("loss was not produced on this tape")
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")
    grads = {loss.node: np.ones_like(loss.data)}
    for node in range(loss.node, -1, -1):
        g = grads.get(node)
        if g is None or tape._vjps[node] is None:
            continue
        parents = tape._parents[node]
        for parent, pg in zip(parents, tape._vjps[node](g)):
            if parent is None:
                continue
            if parent in grads:
                grads[parent] = grads[parent] + pg
            else:
                grads[parent] = pg
    tape._done = True
    out = {}
    for node in range(loss.node + 1):
        if node in grads:
            out[node] = Tensor(grads[node])
        elif not tape._parents[node]:
            out[node] = Tensor(np.zeros(tape._shapes[node]))
    return out


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b):
    """Matrix product of ``a`` (..., m, k) with a 2-D ``b`` (k, n)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data

    def vjp(g):
        ga = g @ B.T
        gb = A.reshape(-1, A.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _emit(A @ B, (a, b), vjp)


def _same_shape(name, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _emit(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g))


def hadamard(a, b):
    """Elementwise product of equal-shaped tensors."""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("hadamard", a, b)
    A, B = a.data, b.data
    return _emit(A * B, (a, b), lambda g: (g * B, g * A))


def scale(a, c):
    """Multiply by a python scalar constant."""
    a = as_tensor(a)
    c = float(c)
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def add_scalar(a, c):
    a = as_tensor(a)
    return _emit(a.data + float(c), (a,), lambda g: (g,))


def add_bias(x, b):
    """Add a vector ``b`` (n,) along the last axis of ``x`` (..., n)."""
    x, b = as_tensor(x), as_tensor(b)
    if b.data.ndim != 1 or x.data.ndim < 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: cannot add {b.shape} to {x.shape}")
    n = b.shape[0]
    return _emit(x.data + b.data, (x, b), lambda g: (g, g.reshape(-1, n).sum(axis=0)))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from exc
    return _emit(out, (a,), lambda g: (g.reshape(old),))


def sum_all(a):
    a = as_tensor(a)
    shp = a.shape
    return _emit(a.data.sum(), (a,), lambda g: (np.full(shp, g),))


def mean_all(a):
    a = as_tensor(a)
    shp, n = a.shape, a.data.size
    return _emit(a.data.mean(), (a,), lambda g: (np.full(shp, g / n),))


def mean_pool(a):
    """Mean over the sequence axis: (..., L, D) -> (..., D)."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise ShapeError(f"mean_pool needs (..., L, D), got {a.shape}")
    L = a.shape[-2]
    shp = a.shape
    return _emit(
        a.data.mean(axis=-2),
        (a,),
        lambda g: (np.broadcast_to(g[..., None, :] / L, shp).copy(),),
    )


def last_pool(a):
    """Last step of the sequence axis: (..., L, D) -> (..., D)."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise ShapeError(f"last_pool needs (..., L, D), got {a.shape}")
    shp = a.shape

    def vjp(g):
        out = np.zeros(shp)
        out[..., -1, :] = g
        return (out,)

    return _emit(a.data[..., -1, :], (a,), vjp)


# ---------------------------------------------------------------------------
# activations


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activation_value_and_slope(kind, x):
    if kind == "sigmoid":
        s = _sigmoid(x)
        return s, s * (1.0 - s)
    if kind == "hard_sigmoid":
        lin = 0.2 * x + 0.5
        inside = (lin > 0.0) & (lin < 1.0)
        return np.clip(lin, 0.0, 1.0), np.where(inside, 0.2, 0.0)
    if kind == "relu":
        return np.maximum(x, 0.0), (x > 0.0).astype(np.float64)
    if kind == "gelu":
        cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return x * cdf, cdf + x * pdf
    if kind == "tanh":
        t = np.tanh(x)
        return t, 1.0 - t * t
    raise ParameterError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def apply_activation(kind, x):
    """Elementwise activation.

    hard_sigmoid is clamp(0.2x + 0.5, 0, 1); gelu is the exact erf form; the
    relu slope at exactly 0 is 0.
    """
    x = as_tensor(x)
    value, slope = _activation_value_and_slope(kind, x.data)
    return _emit(value, (x,), lambda g: (g * slope,))


# ---------------------------------------------------------------------------
# convolution


def same_padding(k):
    """(left, right) zero padding that keeps the length unchanged.

    Even kernels put the extra sample on the left.
    """
    return k // 2, (k - 1) // 2


def conv1d(x, kernel, bias, mode="depthwise"):
    """Same-padded correlation along the length axis.

    x: (..., L, D). Depthwise kernel: (k, D), output (..., L, D).
    Full kernel: (k, D, D_out), output (..., L, D_out). bias: (D_out,).
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if mode not in ("depthwise", "full"):
        raise ParameterError(f"unknown conv1d mode {mode!r}")
    if x.data.ndim < 2:
        raise ShapeError(f"conv1d input must be (..., L, D), got {x.shape}")
    k = kernel.shape[0] if kernel.data.ndim else 0
    if k < 1:
        raise ParameterError("conv1d kernel size must be >= 1")
    L, D = x.shape[-2:]
    if mode == "depthwise":
        if kernel.shape != (k, D):
            raise ShapeError(f"depthwise kernel must be {(k, D)}, got {kernel.shape}")
        d_out = D
    else:
        if kernel.data.ndim != 3 or kernel.shape[1] != D:
            raise ShapeError(f"full kernel must be (k, {D}, D_out), got {kernel.shape}")
        d_out = kernel.shape[2]
    if bias.shape != (d_out,):
        raise ShapeError(f"conv1d bias must be {(d_out,)}, got {bias.shape}")

    left, right = same_padding(k)
    pad = [(0, 0)] * (x.data.ndim - 2) + [(left, right), (0, 0)]
    xp = np.pad(x.data, pad)
    K = kernel.data
    out = np.zeros(x.shape[:-1] + (d_out,))
    for j in range(k):
        win = xp[..., j : j + L, :]
        out += win * K[j] if mode == "depthwise" else win @ K[j]
    out += bias.data

    def vjp(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(K)
        for j in range(k):
            win = xp[..., j : j + L, :]
            if mode == "depthwise":
                gk[j] = (win * g).reshape(-1, D).sum(axis=0)
                gxp[..., j : j + L, :] += g * K[j]
            else:
                gk[j] = win.reshape(-1, D).T @ g.reshape(-1, d_out)
                gxp[..., j : j + L, :] += g @ K[j].T
        gx = gxp[..., left : left + L, :]
        return gx, gk, g.reshape(-1, d_out).sum(axis=0)

    return _emit(out, (x, kernel, bias), vjp)


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred, target):
    """Mean squared error against a constant target array."""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    diff = sub(pred, Tensor(target))
    return mean_all(hadamard(diff, diff))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of (B, K) logits against integer labels (B,)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.data.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross-entropy: logits {logits.shape} vs labels {labels.shape}")
    B, K = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise UsageError(f"class id out of range [0, {K})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(B)
    value = -logp[rows, labels].mean()

    def vjp(g):
        d = np.exp(logp)
        d[rows, labels] -= 1.0
        return (d * (g / B),)

    return _emit(value, (logits,), vjp)
