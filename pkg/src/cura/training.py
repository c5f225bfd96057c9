"""Metrics, the AMSGrad optimizer, parameter efficiency and the training loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DegenerateError, DivergenceError, ShapeError, UsageError
from .model import count_params, cura_forward, init_params


# ---------------------------------------------------------------------------
# metrics


def _pair(y, y_hat, min_len=1):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise UsageError(f"length mismatch: {y.size} vs {y_hat.size}")
    if y.size < min_len:
        raise UsageError(f"need at least {min_len} values, got {y.size}")
    return y, y_hat


def mse(y, y_hat):
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def mae(y, y_hat):
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def r2_score(y, y_hat):
    """Coefficient of determination 1 - SS_res / SS_tot."""
    y, y_hat = _pair(y, y_hat, min_len=2)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("r2_score undefined for a constant target")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def f1_macro(labels, preds, num_classes):
    """Unweighted mean of per-class F1; classes with no support and no
    predictions score 0."""
    labels = np.asarray(labels).ravel()
    preds = np.asarray(preds).ravel()
    if labels.shape != preds.shape:
        raise UsageError(f"length mismatch: {labels.size} vs {preds.size}")
    if num_classes < 1:
        raise UsageError("num_classes must be >= 1")
    for arr in (labels, preds):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise UsageError(f"class id out of range [0, {num_classes})")
    scores = []
    for c in range(num_classes):
        tp = int(np.sum((preds == c) & (labels == c)))
        fp = int(np.sum((preds == c) & (labels != c)))
        fn = int(np.sum((preds != c) & (labels == c)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def cross_entropy(logits, true_class):
    """-log softmax(logits)[true_class] for a single logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size < 2:
        raise ShapeError(f"need a vector of >= 2 logits, got shape {logits.shape}")
    if not 0 <= int(true_class) < logits.size:
        raise UsageError(f"class id {true_class} out of range [0, {logits.size})")
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[int(true_class)])


def parameter_efficiency(metric_percent, n_params):
    """Performance per parameter, M / P."""
    if n_params <= 0:
        raise UsageError(f"parameter count must be positive, got {n_params}")
    return metric_percent / n_params


# ---------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    amsgrad: bool = True
    weight_decay: float = 1e-5
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise UsageError("betas must lie in (0, 1)")
        if self.learning_rate <= 0.0 or self.epsilon <= 0.0:
            raise UsageError("learning_rate and epsilon must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise UsageError("epochs must be >= 0 and batch_size >= 1")
        if self.weight_decay < 0.0:
            raise UsageError("weight_decay must be >= 0")


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    v_max: dict = field(default_factory=dict)


def adam_amsgrad_step(params, grads, state, hyper):
    """One Adam step with decoupled weight decay and optional AMSGrad.

    ``params`` and ``grads`` are name -> ndarray maps; returns new params and
    mutates ``state`` in place (it is also returned).
    """
    if set(params) != set(grads):
        raise UsageError("params and grads name different tensors")
    state.step += 1
    t = state.step
    lr, b1, b2 = hyper.learning_rate, hyper.beta1, hyper.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    out = {}
    for name, theta in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise UsageError(f"gradient for {name} has shape {g.shape}, parameter {theta.shape}")
        m = state.m.get(name, np.zeros_like(theta))
        v = state.v.get(name, np.zeros_like(theta))
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        if hyper.amsgrad:
            v_hat = np.maximum(state.v_max.get(name, np.zeros_like(theta)), v)
            state.v_max[name] = v_hat
        else:
            v_hat = v
        theta = theta * (1.0 - lr * hyper.weight_decay)
        out[name] = theta - lr * (m / bc1) / (np.sqrt(v_hat / bc2) + hyper.epsilon)
    return out, state


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainReport:
    epoch_losses: list
    metrics: dict
    n_params: int
    efficiency: float
    seed: int
    wall_seconds: float = 0.0

    def comparable(self):
        """Everything except wall time, for determinism checks."""
        return (self.epoch_losses, self.metrics, self.n_params, self.efficiency, self.seed)


def batch_loss(params, X, y, config, task):
    """Trace one batch; returns (tape, leaves, loss tensor)."""
    tape = ad.Tape()
    leaves = params.trace(tape)
    out = cura_forward(X, leaves, config)
    if task == "classification":
        loss = ad.softmax_cross_entropy(out, y)
    else:
        loss = ad.mse_loss(out, y)
    return tape, leaves, loss


def loss_and_grads(params, X, y, config, task="regression"):
    tape, leaves, loss = batch_loss(params, X, y, config, task)
    grads = ad.backward(tape, loss)
    return float(loss.data), {k: grads[t.node].data for k, t in leaves.items()}


def evaluate(params, config, dataset, task=None):
    """Metrics of ``params`` on ``dataset`` (original target scale for regression)."""
    task = task or dataset.task
    out = cura_forward(dataset.inputs, params, config).numpy()
    if task == "classification":
        preds = out.argmax(axis=1)
        return {"f1": f1_macro(dataset.targets, preds, config.out_dim)}
    y = dataset.denormalize_targets(dataset.targets)
    y_hat = dataset.denormalize_targets(out)
    return {"r2": r2_score(y, y_hat), "mae": mae(y, y_hat), "mse": mse(y, y_hat)}


def headline_metric(metrics):
    return metrics["f1"] if "f1" in metrics else metrics["r2"]


def fit(config, dataset, hyper, test=None, log=None):
    """Mini-batch training; deterministic in (config, dataset, hyper).

    Batches follow a fresh seeded permutation each epoch. Metrics are computed
    on ``test`` when given, else on the training set.
    """
    if len(dataset) == 0:
        raise UsageError("cannot train on an empty dataset")
    task = dataset.task
    if task == "classification" and config.out_dim < 2:
        raise UsageError("classification needs out_dim >= 2 logits")
    if task == "regression" and dataset.targets.shape[1:] != (config.out_dim,):
        raise UsageError(f"targets of shape {dataset.targets.shape[1:]} do not match out_dim={config.out_dim}")

    started = time.perf_counter()
    params = init_params(config)
    current = dict(params.arrays)
    state = AdamState()
    rng = np.random.default_rng(int(hyper.seed) % 2**64)
    n = len(dataset)
    losses = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            loss, grads = loss_and_grads(
                type(params)(current), dataset.inputs[idx], dataset.targets[idx], config, task
            )
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            total += loss * idx.size
            current, state = adam_amsgrad_step(current, grads, state, hyper)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DivergenceError(epoch)
        losses.append(epoch_loss)
        if log is not None:
            log(epoch, epoch_loss)

    params = type(params)(current)
    metrics = evaluate(params, config, test if test is not None else dataset, task)
    n_params = count_params(config)
    report = TrainReport(
        epoch_losses=losses,
        metrics=metrics,
        n_params=n_params,
        efficiency=parameter_efficiency(100.0 * headline_metric(metrics), n_params),
        seed=hyper.seed,
        wall_seconds=time.perf_counter() - started,
    )
    return params, report
