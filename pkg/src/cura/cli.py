"""Command-line entry point: train, eval, predict, params, ablate, gen-synth.

Exit codes: 0 success, 1 runtime or training failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import ablation, efficiency
from .data import SYNTH_KINDS, chrono_split, gen_synth, load_csv, write_csv
from .errors import CuraError, ParameterError, ParseError, SchemaError, UsageError
from .io import read_model, read_run_config, save_model
from .model import CuraConfig, count_params, predict
from .runner import build_run, load_series, normalizer_from_meta, rebuild_windows, settings_from_meta
from .training import evaluate, fit, headline_metric, parameter_efficiency

USAGE_ERRORS = (UsageError, ParseError, SchemaError, ParameterError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(f"{self.prog}: error: {message}")


class _UsageExit(Exception):
    pass


def _common(p, *names):
    flags = {
        "config": dict(help="run config file (key = value lines)"),
        "data": dict(help="input CSV"),
        "target": dict(help="target column"),
        "features": dict(help="comma-separated feature columns"),
        "window": dict(type=int, help="input window length L"),
        "horizon": dict(type=int, help="forecast horizon H"),
        "seed": dict(type=int, help="random seed"),
        "out": dict(help="output path"),
        "model": dict(help="model file path"),
    }
    for name in names:
        p.add_argument(f"--{name}", **flags[name])


def build_parser():
    parser = _Parser(prog="cura", description="CURA lightweight gated-residual models")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="fit a model and write a model file and report")
    _common(p, "config", "data", "target", "features", "window", "horizon", "seed", "out", "model")

    p = sub.add_parser("eval", help="score a saved model on the held-out split")
    _common(p, "data", "model", "out")

    p = sub.add_parser("predict", help="apply a saved model to a CSV")
    _common(p, "data", "model", "out")

    p = sub.add_parser("params", help="print the parameter count of a config")
    _common(p, "config")
    p.add_argument("--audit", action="store_true", help="also audit published efficiency figures")

    p = sub.add_parser("ablate", help="train every architectural variant")
    _common(p, "config", "data", "target", "features", "window", "horizon", "seed", "out")

    p = sub.add_parser("gen-synth", help="write a synthetic series to CSV")
    p.add_argument("--kind", choices=SYNTH_KINDS, default="sine_mix")
    p.add_argument("--rows", type=int, default=600)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--segment", type=int, default=32, help="segment length for freq_classes")
    _common(p, "seed", "out")
    return parser


def _settings(args):
    settings = read_run_config(args.config) if getattr(args, "config", None) else {}
    for key in ("data", "target", "window", "horizon", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if getattr(args, "features", None):
        settings["features"] = tuple(c.strip() for c in args.features.split(",") if c.strip())
    return settings


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def metric_lines(metrics, n_params):
    """key=value lines followed by an aligned table; values use full repr."""
    eff = parameter_efficiency(100.0 * headline_metric(metrics), n_params)
    pairs = [(k, repr(v)) for k, v in metrics.items()]
    pairs += [("params", str(n_params)), ("efficiency", repr(eff))]
    lines = [f"{k}={v}" for k, v in pairs]
    width = max(len(k) for k, _ in pairs)
    lines += ["", f"{'metric'.ljust(width)}  value", f"{'-' * width}  -----"]
    lines += [f"{k.ljust(width)}  {v}" for k, v in pairs]
    return lines


def cmd_train(args):
    settings = _settings(args)
    run = build_run(settings)

    def log(epoch, loss):
        print(f"epoch={epoch} loss={loss!r}", file=sys.stderr)

    params, report = fit(run.config, run.train, run.hyper, test=run.test, log=log)
    save_model(args.model or "model.cura", run.config, params, run.meta)
    lines = [f"task={run.meta['task']}", f"seed={report.seed}", f"epochs={len(report.epoch_losses)}"]
    lines += [f"loss.{i}={v!r}" for i, v in enumerate(report.epoch_losses)]
    lines += [f"wall_seconds={report.wall_seconds:.3f}"]
    lines += metric_lines(report.metrics, report.n_params)
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _model_series(m, data):
    if data:
        return load_csv(data)
    if any(k.startswith("synth.") for k in m.meta):
        return load_series(settings_from_meta(m.meta))
    raise UsageError("--data is required for models trained on CSV data")


def cmd_eval(args):
    if not args.model:
        raise UsageError("--model is required")
    m = read_model(args.model)
    ds = rebuild_windows(m.meta, _model_series(m, args.data))
    _, test = chrono_split(ds, float(m.meta["train_fraction"]))
    metrics = evaluate(m.params, m.config, test, m.meta["task"])
    _emit("\n".join(metric_lines(metrics, count_params(m.config))) + "\n", args.out)
    return 0


def cmd_predict(args):
    if not args.model or not args.data:
        raise UsageError("--model and --data are required")
    m = read_model(args.model)
    meta, config = m.meta, m.config
    features = tuple(meta["features"].split(","))
    if len(features) != config.in_channels:
        raise SchemaError("model metadata does not match its config")
    with open(args.data, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
    missing = [c for c in features if c not in header]
    if missing:
        raise SchemaError(f"input CSV lacks expected channel columns {missing}; model expects {list(features)}")
    series = load_csv(args.data, feature_columns=features)
    norm = normalizer_from_meta(meta)
    idx = [norm.columns.index(c) for c in features]
    scaled = (series.values - norm.mean[idx]) / norm.std[idx]
    L, stride = config.seq_len, int(meta["stride"])
    if len(series) < L:
        raise UsageError(f"need at least {L} rows, got {len(series)}")
    starts = np.arange(0, len(series) - L + 1, stride)
    X = scaled[starts[:, None] + np.arange(L)[None, :]]
    out = predict(X, m.params, config)
    lines = []
    if meta["task"] == "classification":
        lines.append("end_row,predicted_class")
        for s, row in zip(starts, out):
            lines.append(f"{s + L - 1},{int(np.argmax(row))}")
    else:
        j = norm.columns.index(meta["target"])
        values = out * norm.std[j] + norm.mean[j]
        lines.append("first_target_row," + ",".join(f"step{h + 1}" for h in range(values.shape[1])))
        for s, row in zip(starts, values):
            lines.append(f"{s + L}," + ",".join(repr(float(v)) for v in row))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_params(args):
    settings = read_run_config(args.config) if args.config else {}
    model_keys = {f for f in CuraConfig.__dataclass_fields__}
    kwargs = {k: v for k, v in settings.items() if k in model_keys}
    if "window" in settings:
        kwargs.setdefault("seq_len", settings["window"])
    if "features" in settings:
        kwargs.setdefault("in_channels", len(settings["features"]))
    if "horizon" in settings and settings.get("task", "regression") == "regression":
        kwargs.setdefault("out_dim", settings["horizon"])
    print(count_params(CuraConfig(**kwargs)))
    if args.audit:
        lines = efficiency.audit_lines()
        print("\n".join(lines))
        flagged = sum("status=MISMATCH" in line for line in lines)
        print(f"efficiency_mismatches={flagged}")
    return 0


def cmd_ablate(args):
    settings = _settings(args)
    settings.setdefault("task", "classification")
    if settings["task"] == "classification" and not settings.get("data"):
        settings.setdefault("window", 32)
        settings.setdefault("synth_channels", 3)
        settings.setdefault("synth_rows", 32 * 200)
        settings.setdefault("synth_noise", 0.2)
        settings.setdefault("model_dim", 32)
        settings.setdefault("epochs", 20)
        settings.setdefault("learning_rate", 3e-3)
    run = build_run(settings)
    results = ablation.run_ablation(run.config, run.train, run.test, run.hyper)
    _emit(ablation.format_report(results, run.hyper.seed), args.out)
    return 0


def cmd_gen_synth(args):
    opts = {}
    if args.kind == "freq_classes":
        opts = {"num_classes": args.classes, "segment_len": args.segment}
    series = gen_synth(args.kind, args.rows, args.channels, seed=args.seed or 0, noise_std=args.noise, **opts)
    if not args.out:
        raise UsageError("--out is required")
    write_csv(args.out, series)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "params": cmd_params,
    "ablate": cmd_ablate,
    "gen-synth": cmd_gen_synth,
}


def run(argv=None):
    """Execute one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as exc:
        print(f"cura {args.command}: {exc}", file=sys.stderr)
        return 2
    except (CuraError, OSError) as exc:
        print(f"cura {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
