"""Published parameter-efficiency figures and an arithmetic audit of them."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal

from .training import parameter_efficiency


@dataclass(frozen=True)
class EfficiencyRow:
    dataset: str
    model: str
    n_params: int
    metric_percent: float
    printed: str


# (dataset, model, params, metric %, printed efficiency)
PUBLISHED_EFFICIENCY = tuple(
    EfficiencyRow(*row)
    for row in [
        ("S&P 500", "CURA", 746, 99.0, "0.130"),
        ("S&P 500", "gMLP", 1067, 99.0, "0.092"),
        ("S&P 500", "GRU", 4478, 97.0, "0.021"),
        ("S&P 500", "LSTM", 4513, 98.0, "0.021"),
        ("S&P 500", "TSMixer", 3585, 99.5, "0.027"),
        ("House Prices", "CURA", 790, 84.0, "0.10"),
        ("House Prices", "gMLP", 929, 79.0, "0.085"),
        ("House Prices", "GRU", 154561, -0.12, "-7.76"),
        ("House Prices", "LSTM", 1285, 21.0, "0.016"),
        ("House Prices", "TSMixer", 11475, 71.0, "0.0061"),
        ("ETTm1", "CURA", 731, 86.45, "0.12"),
        ("ETTm1", "gMLP", 11423, 80.88, "0.0070"),
        ("ETTm1", "GRU", 14081, 53.70, "0.0038"),
        ("ETTm1", "LSTM", 18753, 44.46, "0.0023"),
        ("ETTm1", "TSMixer", 55090, 91.15, "0.0016"),
        ("UCI HAR", "CURA", 2342, 95.40, "0.041"),
        ("UCI HAR", "gMLP", 2374, 94.96, "0.040"),
        ("UCI HAR", "GRU", 15174, 93.16, "0.0064"),
        ("UCI HAR", "LSTM", 20102, 93.71, "0.0046"),
        ("UCI HAR", "TSMixer", 14490, 95.63, "0.0065"),
        ("FallAllD", "CURA", 345, 80.0, "0.231"),
        ("FallAllD", "gMLP", 440551, 79.3, "0.00018"),
        ("FallAllD", "GRU", 7681, 77.5, "0.01"),
        ("FallAllD", "LSTM", 4769, 77.3, "0.016"),
        ("FallAllD", "TSMixer", 836571, 76.1, "0.000091"),
    ]
)


def at_printed_precision(value, printed):
    """``value`` quantized like ``printed``: (rounded, truncated) strings."""
    quantum = Decimal(1).scaleb(Decimal(printed).as_tuple().exponent)
    d = Decimal(repr(value))
    return (
        str(d.quantize(quantum, rounding=ROUND_HALF_UP)),
        str(d.quantize(quantum, rounding=ROUND_DOWN)),
    )


def audit_row(row):
    """Recompute M / P and compare to the printed figure.

    Returns (exact efficiency, status) where status is ``round`` or
    ``truncate`` when the printed digits agree under that convention, else
    ``MISMATCH``.
    """
    eta = parameter_efficiency(row.metric_percent, row.n_params)
    rounded, truncated = at_printed_precision(eta, row.printed)
    printed = str(Decimal(row.printed))
    if rounded == printed:
        return eta, "round"
    if truncated == printed:
        return eta, "truncate"
    return eta, "MISMATCH"


def audit_lines():
    lines = []
    for row in PUBLISHED_EFFICIENCY:
        eta, status = audit_row(row)
        lines.append(
            f"efficiency dataset={row.dataset!r} model={row.model} params={row.n_params} "
            f"metric={row.metric_percent!r} exact={eta!r} printed={row.printed} status={status}"
        )
    return lines
