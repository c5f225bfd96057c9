"""The CURA core: gate, residual combine, nonlinearity, filter, projection.

All linear maps act per time step (C -> D at each of the L positions); only
the filter (and the convolutional gate / tanh_conv variants) mix along L.
Inputs may be a single window (L, C) or a batch (B, L, C).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ParameterError, ShapeError

GATING_KINDS = ("multiplicative", "linear", "convolutional")
GATE_ACTIVATIONS = ("sigmoid", "hard_sigmoid")
NONLINEARITIES = ("relu", "gelu", "tanh_conv")
FILTER_KINDS = ("conv1d", "linear_1x1", "none")
FILTER_MODES = ("depthwise", "full")
POOLINGS = ("mean", "last")


@dataclass(frozen=True)
class CuraConfig:
    in_channels: int = 1
    seq_len: int = 1
    model_dim: int = 8
    out_dim: int = 1
    gating_kind: str = "multiplicative"
    gate_activation: str = "sigmoid"
    nonlinearity: str = "relu"
    filter_kind: str = "conv1d"
    filter_mode: str = "depthwise"
    kernel_size: int = 3
    pooling: str = "mean"
    seed: int = 0

    def __post_init__(self):
        for name in ("in_channels", "seq_len", "model_dim", "out_dim", "kernel_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        choices = {
            "gating_kind": GATING_KINDS,
            "gate_activation": GATE_ACTIVATIONS,
            "nonlinearity": NONLINEARITIES,
            "filter_kind": FILTER_KINDS,
            "filter_mode": FILTER_MODES,
            "pooling": POOLINGS,
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ParameterError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise ParameterError("seed must fit in 64 bits")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def param_shapes(config):
    """Ordered name -> shape map of every learnable tensor.

    The order is the declared serialization order: gate, residual, nonlinear,
    filter, then the optional conv-gate and tanh_conv kernels, then output.
    """
    C, D, H, k = config.in_channels, config.model_dim, config.out_dim, config.kernel_size
    shapes = {
        "w_g": (C, D),
        "b_g": (D,),
        "w_r": (C, D),
        "b_r": (D,),
        "w_n": (D, D),
        "b_n": (D,),
    }
    if config.filter_kind == "conv1d":
        if config.filter_mode == "depthwise":
            shapes["filter_kernel"] = (k, D)
        else:
            shapes["filter_kernel"] = (k, D, D)
        shapes["filter_bias"] = (D,)
    elif config.filter_kind == "linear_1x1":
        shapes["filter_kernel"] = (D, D)
        shapes["filter_bias"] = (D,)
    if config.gating_kind == "convolutional":
        shapes["gate_kernel"] = (k, D)
        shapes["gate_bias"] = (D,)
    if config.nonlinearity == "tanh_conv":
        shapes["extra_kernel"] = (k, D)
        shapes["extra_bias"] = (D,)
    shapes["w_o"] = (D, H)
    shapes["b_o"] = (H,)
    return shapes


def count_params(config):
    """Exact number of learnable scalars implied by ``config``."""
    return int(sum(int(np.prod(s)) for s in param_shapes(config).values()))


@dataclass
class CuraParams:
    """Learnable tensors keyed by name, in declared order."""

    arrays: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.arrays[name]

    def __contains__(self, name):
        return name in self.arrays

    def names(self):
        return list(self.arrays)

    def size(self):
        return int(sum(a.size for a in self.arrays.values()))

    def copy(self):
        return CuraParams({k: np.array(v, dtype=np.float64) for k, v in self.arrays.items()})

    def trace(self, tape):
        """Register every array as a leaf on ``tape``; returns name -> Tensor."""
        return {k: tape.leaf(v) for k, v in self.arrays.items()}

    def tensors(self):
        return {k: ad.Tensor(v) for k, v in self.arrays.items()}


def weight_bound(config, name):
    """Uniform init half-width sqrt(6 / (fan_in + fan_out)) for weight ``name``.

    Matrices use (rows, cols). Depthwise kernels (k, D) use fan_in = fan_out = k;
    full kernels (k, D_in, D_out) use k*D_in and k*D_out.
    """
    shape = param_shapes(config)[name]
    depthwise = name in ("gate_kernel", "extra_kernel") or (
        name == "filter_kernel" and config.filter_kind == "conv1d" and config.filter_mode == "depthwise"
    )
    if len(shape) == 3:
        k, d_in, d_out = shape
        fan_in, fan_out = k * d_in, k * d_out
    elif depthwise:
        fan_in = fan_out = shape[0]
    else:
        fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def is_bias(name):
    return name.startswith("b_") or name.endswith("_bias")


def init_params(config, seed=None):
    """Uniform Glorot weights and zero biases, deterministic in ``seed``.

    ``seed`` defaults to ``config.seed``.
    """
    rng = np.random.default_rng(int(config.seed if seed is None else seed) % 2**64)
    arrays = {}
    for name, shape in param_shapes(config).items():
        if is_bias(name):
            arrays[name] = np.zeros(shape)
        else:
            bound = weight_bound(config, name)
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return CuraParams(arrays)


# ---------------------------------------------------------------------------
# units


def _view(params):
    if isinstance(params, CuraParams):
        return params.tensors()
    return params


def _check_input(X, config):
    X = ad.as_tensor(X)
    want = (config.seq_len, config.in_channels)
    if X.data.ndim not in (2, 3) or X.shape[-2:] != want:
        raise ShapeError(f"input must be {want} or (B, *{want}), got {X.shape}")
    return X


def _check_hidden(h, config, name):
    h = ad.as_tensor(h)
    want = (config.seq_len, config.model_dim)
    if h.data.ndim not in (2, 3) or h.shape[-2:] != want:
        raise ShapeError(f"{name} must be {want} or (B, *{want}), got {h.shape}")
    return h


def _affine(x, w, b):
    return ad.add_bias(ad.matmul(x, w), b)


def gating_forward(X, params, config):
    """Gate signal g (L, D).

    multiplicative: act(X W_g + b_g); linear: X W_g + b_g unsquashed;
    convolutional: act(depthwise_conv(X W_g + b_g)).
    """
    X = _check_input(X, config)
    p = _view(params)
    pre = _affine(X, p["w_g"], p["b_g"])
    if config.gating_kind == "linear":
        return pre
    if config.gating_kind == "convolutional":
        pre = ad.conv1d(pre, p["gate_kernel"], p["gate_bias"], mode="depthwise")
    return ad.apply_activation(config.gate_activation, pre)


def residual_forward(X, params, config=None):
    """Residual projection r = X W_r + b_r, per time step."""
    X = ad.as_tensor(X) if config is None else _check_input(X, config)
    p = _view(params)
    if X.data.ndim not in (2, 3) or X.shape[-1] != p["w_r"].shape[0]:
        raise ShapeError(f"input {X.shape} does not match W_r {p['w_r'].shape}")
    return _affine(X, p["w_r"], p["b_r"])


def residual_gate_combine(g, r):
    """h1 = g * r + r, i.e. the residual scaled by (g + 1)."""
    g, r = ad.as_tensor(g), ad.as_tensor(r)
    if g.shape != r.shape:
        raise ShapeError(f"gate {g.shape} and residual {r.shape} differ")
    return ad.add(ad.hadamard(g, r), r)


def nonlinear_unit(h1, params, config):
    h1 = _check_hidden(h1, config, "h1")
    p = _view(params)
    pre = _affine(h1, p["w_n"], p["b_n"])
    if config.nonlinearity == "tanh_conv":
        return ad.conv1d(ad.apply_activation("tanh", pre), p["extra_kernel"], p["extra_bias"], mode="depthwise")
    return ad.apply_activation(config.nonlinearity, pre)


def filter_unit(h2, params, config):
    h2 = _check_hidden(h2, config, "h2")
    p = _view(params)
    if config.filter_kind == "none":
        return h2
    if config.filter_kind == "linear_1x1":
        return _affine(h2, p["filter_kernel"], p["filter_bias"])
    return ad.conv1d(h2, p["filter_kernel"], p["filter_bias"], mode=config.filter_mode)


def output_projection(h3, params, config):
    """Pool over L (mean or last step), then y = p W_o + b_o."""
    h3 = _check_hidden(h3, config, "h3")
    p = _view(params)
    pooled = ad.mean_pool(h3) if config.pooling == "mean" else ad.last_pool(h3)
    if pooled.data.ndim == 1:
        y = _affine(ad.reshape(pooled, (1, -1)), p["w_o"], p["b_o"])
        return ad.reshape(y, (config.out_dim,))
    return _affine(pooled, p["w_o"], p["b_o"])


def cura_forward(X, params, config):
    """Full map X (L, C) -> y (H,), or (B, L, C) -> (B, H).

    ``params`` is a CuraParams (constants) or the name -> Tensor dict returned
    by ``CuraParams.trace`` (differentiable).
    """
    X = _check_input(X, config)
    p = _view(params)
    g = gating_forward(X, p, config)
    r = residual_forward(X, p, config)
    h1 = residual_gate_combine(g, r)
    h2 = nonlinear_unit(h1, p, config)
    h3 = filter_unit(h2, p, config)
    return output_projection(h3, p, config)


def predict(X, params, config):
    """Untraced forward returning a plain ndarray."""
    return cura_forward(X, params, config).numpy()
