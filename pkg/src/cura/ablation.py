"""One-axis-at-a-time ablation over the architectural variants."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import count_params
from .training import fit, headline_metric

# (axis, variant label, config overrides); the first entry is the baseline
ABLATION_VARIANTS = (
    ("default", "multiplicative+sigmoid+relu+conv1d", {}),
    ("gating", "linear", {"gating_kind": "linear"}),
    ("gating", "convolutional", {"gating_kind": "convolutional"}),
    ("gate_activation", "hard_sigmoid", {"gate_activation": "hard_sigmoid"}),
    ("nonlinearity", "gelu", {"nonlinearity": "gelu"}),
    ("nonlinearity", "tanh_conv", {"nonlinearity": "tanh_conv"}),
    ("filter", "linear_1x1", {"filter_kind": "linear_1x1"}),
    ("filter", "none", {"filter_kind": "none"}),
)

_DEFAULTS = {
    "gating_kind": "multiplicative",
    "gate_activation": "sigmoid",
    "nonlinearity": "relu",
    "filter_kind": "conv1d",
}


@dataclass
class AblationResult:
    axis: str
    variant: str
    metric_name: str
    score: float
    n_params: int
    final_loss: float
    efficiency: float


def run_ablation(base_config, train, test, hyper):
    """Train every variant in fixed order; returns results in that order."""
    base = base_config.replace(**_DEFAULTS)
    results = []
    for axis, label, overrides in ABLATION_VARIANTS:
        config = base.replace(**overrides)
        _, report = fit(config, train, hyper, test=test)
        metric_name = "f1" if "f1" in report.metrics else "r2"
        results.append(
            AblationResult(
                axis=axis,
                variant=label,
                metric_name=metric_name,
                score=headline_metric(report.metrics),
                n_params=count_params(config),
                final_loss=report.epoch_losses[-1] if report.epoch_losses else math.nan,
                efficiency=report.efficiency,
            )
        )
    return results


def ranked(results):
    """Best score first; ties keep the fixed variant order."""
    order = {id(r): i for i, r in enumerate(results)}
    return sorted(results, key=lambda r: (-r.score, order[id(r)]))


def format_report(results, seed):
    lines = [f"seed={seed}", f"variants={len(results)}"]
    for r in results:
        key = f"{r.axis}.{r.variant}"
        lines.append(f"{key}.{r.metric_name}={r.score!r}")
        lines.append(f"{key}.params={r.n_params}")
        lines.append(f"{key}.final_loss={r.final_loss!r}")
        lines.append(f"{key}.efficiency={r.efficiency!r}")
    lines.append("")
    header = ("rank", "axis", "variant", results[0].metric_name if results else "score", "params", "final_loss")
    rows = [
        (str(i + 1), r.axis, r.variant, repr(r.score), str(r.n_params), repr(r.final_loss))
        for i, r in enumerate(ranked(results))
    ]
    widths = [max(len(h), *(len(row[j]) for row in rows)) for j, h in enumerate(header)]
    for row in [header, ["-" * w for w in widths], *rows]:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
