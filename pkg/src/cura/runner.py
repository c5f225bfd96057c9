"""Turns a parsed run config into data, a model config and hyperparameters."""

from __future__ import annotations

import ast
from dataclasses import dataclass

import numpy as np

from .data import LABEL_COLUMN, Normalizer, chrono_split, gen_synth, load_csv, make_windows
from .errors import UsageError
from .model import CuraConfig
from .training import Hyperparams

_MODEL_KEYS = (
    "gating_kind",
    "gate_activation",
    "nonlinearity",
    "filter_kind",
    "filter_mode",
    "kernel_size",
    "pooling",
    "model_dim",
)
_HYPER_KEYS = ("learning_rate", "beta1", "beta2", "epsilon", "amsgrad", "weight_decay", "epochs", "batch_size")


@dataclass
class Run:
    config: CuraConfig
    hyper: Hyperparams
    train: object
    test: object
    meta: dict


def load_series(settings):
    """CSV series when ``data`` is set, otherwise the configured synthetic one."""
    task = settings.get("task", "regression")
    if settings.get("data"):
        return load_csv(settings["data"], settings.get("target"), settings.get("features"))
    kind = settings.get("synth_kind", "freq_classes" if task == "classification" else "sine_mix")
    opts = {}
    if kind == "freq_classes":
        opts = {"num_classes": settings.get("synth_classes", 6), "segment_len": settings.get("window", 32)}
    return gen_synth(
        kind,
        settings.get("synth_rows", 600),
        settings.get("synth_channels", 1),
        seed=settings.get("seed", 0),
        noise_std=settings.get("synth_noise", 0.0),
        **opts,
    )


def resolve_columns(settings, series):
    task = settings.get("task", "regression")
    target = settings.get("target")
    if target is None:
        target = LABEL_COLUMN if task == "classification" and LABEL_COLUMN in series.columns else series.columns[0]
    features = settings.get("features")
    if features is None:
        features = tuple(c for c in series.columns if not (task == "classification" and c == target))
    return target, tuple(features)


def build_run(settings):
    """Load data, window, split and assemble configs from a settings dict."""
    task = settings.get("task", "regression")
    if task not in ("regression", "classification"):
        raise UsageError(f"task must be regression or classification, got {task!r}")
    series = load_series(settings)
    target, features = resolve_columns(settings, series)
    window = settings.get("window", 20)
    horizon = settings.get("horizon", 1)
    stride = settings.get("stride", window if task == "classification" else 1)
    fraction = settings.get("train_fraction", 0.8)
    ds = make_windows(series, window, horizon, stride, target, features, task, fraction)
    train, test = chrono_split(ds, fraction)

    if task == "classification":
        n_classes = int(series.column(target).max()) + 1
        out_dim = settings.get("out_dim", max(n_classes, 2))
        if out_dim < n_classes:
            raise UsageError(f"out_dim={out_dim} is smaller than the {n_classes} classes in the data")
    else:
        out_dim = settings.get("out_dim", horizon)
        if out_dim != horizon:
            raise UsageError(f"regression out_dim ({out_dim}) must equal horizon ({horizon})")
    if settings.get("in_channels", len(features)) != len(features):
        raise UsageError(f"in_channels={settings['in_channels']} but {len(features)} feature columns")
    if settings.get("seq_len", window) != window:
        raise UsageError(f"seq_len={settings['seq_len']} but window={window}")

    seed = settings.get("seed", 0)
    config = CuraConfig(
        in_channels=len(features),
        seq_len=window,
        out_dim=out_dim,
        seed=seed,
        **{k: settings[k] for k in _MODEL_KEYS if k in settings},
    )
    hyper = Hyperparams(seed=seed, **{k: settings[k] for k in _HYPER_KEYS if k in settings})
    meta = pipeline_meta(settings, ds, task, fraction)
    return Run(config, hyper, train, test, meta)


def pipeline_meta(settings, ds, task, fraction):
    """Everything eval/predict need to rebuild the windows, as strings."""
    norm = ds.normalizer
    meta = {
        "task": task,
        "target": ds.target_column,
        "features": ",".join(ds.feature_columns),
        "window": str(ds.window),
        "horizon": str(ds.horizon),
        "stride": str(ds.stride),
        "train_fraction": repr(fraction),
        "norm_columns": ",".join(norm.columns),
        "norm_mean": ",".join(repr(float(v)) for v in norm.mean),
        "norm_std": ",".join(repr(float(v)) for v in norm.std),
    }
    if not settings.get("data"):
        for key in ("synth_kind", "synth_rows", "synth_channels", "synth_noise", "synth_classes", "seed"):
            if key in settings:
                meta[f"synth.{key}"] = repr(settings[key])
    return meta


def normalizer_from_meta(meta):
    cols = tuple(meta["norm_columns"].split(","))
    mean = np.array([float(v) for v in meta["norm_mean"].split(",")])
    std = np.array([float(v) for v in meta["norm_std"].split(",")])
    return Normalizer(cols, mean, std)


def settings_from_meta(meta):
    """Reconstruct enough settings to regenerate a synthetic training series."""
    out = {"task": meta["task"], "window": int(meta["window"])}
    for key, value in meta.items():
        if key.startswith("synth."):
            out[key[6:]] = ast.literal_eval(value)
    return out


def rebuild_windows(meta, series):
    """Window ``series`` exactly as at training time, with the stored normalizer."""
    features = tuple(meta["features"].split(","))
    fraction = float(meta["train_fraction"])
    return make_windows(
        series,
        int(meta["window"]),
        int(meta["horizon"]),
        int(meta["stride"]),
        meta["target"],
        features,
        meta["task"],
        fraction,
        normalizer=normalizer_from_meta(meta),
    )
