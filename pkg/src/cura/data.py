"""CSV ingestion, z-score normalization, sliding windows and synthetic series.

Normalizers are always fit on the rows touched by training windows only, so
test rows never leak into the statistics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateError,
    InsufficientDataError,
    ParameterError,
    ParseError,
    SchemaError,
    UsageError,
)

SYNTH_KINDS = ("sine_mix", "freq_classes", "linear_ar")
LABEL_COLUMN = "label"


@dataclass(frozen=True)
class Series:
    """N x C matrix of readings in temporal order."""

    values: np.ndarray
    columns: tuple
    timestamps: tuple | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise UsageError(f"values {values.shape} do not match {len(self.columns)} columns")
        if not np.all(np.isfinite(values)):
            raise UsageError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self):
        return self.values.shape[0]

    def column_index(self, name):
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}; have {list(self.columns)}") from None

    def column(self, name):
        return self.values[:, self.column_index(name)]

    def select(self, names):
        idx = [self.column_index(n) for n in names]
        return Series(self.values[:, idx], tuple(names), self.timestamps)


def load_csv(path, target_column=None, feature_columns=None, timestamp_column=None):
    """Read selected numeric columns of a headed CSV file.

    Columns come back as ``feature_columns`` followed by ``target_column``
    (unless it is already a feature). With neither given, every column except
    ``timestamp_column`` is loaded. Empty or non-numeric cells are errors.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", line=1) from None
        if feature_columns is None and target_column is None:
            wanted = [h for h in header if h != timestamp_column]
        else:
            wanted = list(feature_columns or [])
            if target_column is not None and target_column not in wanted:
                wanted.append(target_column)
        for name in wanted + ([timestamp_column] if timestamp_column else []):
            if name not in header:
                raise SchemaError(f"column {name!r} not in header {header}")
        idx = [header.index(n) for n in wanted]
        ts_idx = header.index(timestamp_column) if timestamp_column else None
        rows, stamps = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, found {len(row)}", line=line_no)
            parsed = []
            for i in idx:
                cell = row[i].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r} in column {header[i]!r}", line=line_no) from None
                if not math.isfinite(value):
                    raise ParseError(f"non-finite value {cell!r} in column {header[i]!r}", line=line_no)
                parsed.append(value)
            rows.append(parsed)
            if ts_idx is not None:
                stamps.append(row[ts_idx])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(wanted))
    return Series(values, tuple(wanted), tuple(stamps) if ts_idx is not None else None)


def write_csv(path, series):
    """Write ``series`` with a header; floats use repr so reads are bit-exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(series.columns)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class Normalizer:
    """Per-column mean and population standard deviation."""

    columns: tuple
    mean: np.ndarray
    std: np.ndarray

    def index(self, name):
        return self.columns.index(name)


def zscore_fit(series, train_rows):
    """Fit column statistics on ``train_rows`` (a row count, slice or index array)."""
    if isinstance(train_rows, (int, np.integer)):
        train_rows = slice(0, int(train_rows))
    block = series.values[train_rows]
    if block.shape[0] == 0:
        raise UsageError("no training rows to fit the normalizer on")
    mean = block.mean(axis=0)
    std = block.std(axis=0)
    for name, s in zip(series.columns, std):
        if s == 0.0:
            raise DegenerateError(f"column {name!r} has zero variance on the training rows")
    return Normalizer(series.columns, mean, std)


def zscore_apply(normalizer, matrix):
    return (np.asarray(matrix, dtype=np.float64) - normalizer.mean) / normalizer.std


def zscore_invert(normalizer, matrix):
    return np.asarray(matrix, dtype=np.float64) * normalizer.std + normalizer.mean


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class WindowedDataset:
    """Samples cut from a series.

    inputs: (S, L, C) normalized features. targets: (S, H) normalized target
    values for regression, or (S,) integer class ids for classification.
    ``starts[i]`` is the first input row of sample i; ``fit_rows`` is the
    number of leading rows the normalizer saw.
    """

    inputs: np.ndarray
    targets: np.ndarray
    normalizer: Normalizer
    window: int
    horizon: int
    stride: int
    task: str
    feature_columns: tuple
    target_column: str
    starts: np.ndarray
    fit_rows: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.inputs.shape[0]

    @classmethod
    def from_arrays(cls, inputs, targets, task="regression"):
        """Wrap ready-made (S, L, C) inputs and targets with an identity normalizer."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 3:
            raise UsageError(f"inputs must be (S, L, C), got {inputs.shape}")
        S, L, C = inputs.shape
        if task == "classification":
            targets = np.asarray(targets, dtype=np.int64)
        else:
            targets = np.asarray(targets, dtype=np.float64)
            if targets.ndim == 1:
                targets = targets[:, None]
        features = tuple(f"x{c}" for c in range(C))
        norm = Normalizer(features + ("y",), np.zeros(C + 1), np.ones(C + 1))
        H = 1 if task == "classification" else targets.shape[1]
        return cls(inputs, targets, norm, L, H, L, task, features, "y", np.arange(S) * L, 0)

    def sample_end(self, i):
        """One past the last row sample ``i`` reads (inputs and targets)."""
        if self.task == "classification":
            return int(self.starts[i]) + self.window
        return int(self.starts[i]) + self.window + self.horizon

    def subset(self, idx):
        idx = np.asarray(idx)
        return WindowedDataset(
            self.inputs[idx],
            self.targets[idx],
            self.normalizer,
            self.window,
            self.horizon,
            self.stride,
            self.task,
            self.feature_columns,
            self.target_column,
            self.starts[idx],
            self.fit_rows,
            dict(self.meta),
        )

    def denormalize_targets(self, values):
        """Map normalized target-column values back to the original scale."""
        j = self.normalizer.index(self.target_column)
        return np.asarray(values, dtype=np.float64) * self.normalizer.std[j] + self.normalizer.mean[j]


def window_count(n_rows, window, horizon=1, stride=1):
    """floor((N - L - H) / stride) + 1, or 0 when N < L + H."""
    if n_rows < window + horizon:
        return 0
    return (n_rows - window - horizon) // stride + 1


def make_windows(
    series,
    window,
    horizon=1,
    stride=1,
    target_column=None,
    feature_columns=None,
    task="regression",
    train_fraction=0.8,
    normalizer=None,
):
    """Cut ``series`` into (input window, target) samples.

    Regression: sample i reads rows [i*stride, i*stride + L) and predicts the
    target column over the next H rows. Classification: the label is the
    target column at the window's last row and H is ignored.

    The normalizer is fit on the rows used by the first floor(S * train_fraction)
    samples, matching ``chrono_split`` with the same fraction. Pass a fitted
    ``normalizer`` to reuse one instead.
    """
    if task not in ("regression", "classification"):
        raise ParameterError(f"unknown task {task!r}")
    if window < 1 or horizon < 1 or stride < 1:
        raise ParameterError("window, horizon and stride must be >= 1")
    if target_column is None:
        target_column = series.columns[-1]
    series.column_index(target_column)
    if feature_columns is None:
        if task == "classification":
            feature_columns = tuple(c for c in series.columns if c != target_column)
        else:
            feature_columns = tuple(series.columns)
    feature_columns = tuple(feature_columns)
    if task == "classification" and target_column in feature_columns:
        raise UsageError("the label column cannot also be a feature")

    h_eff = horizon if task == "regression" else 0
    n = len(series)
    S = (n - window - h_eff) // stride + 1 if n >= window + h_eff else 0
    if S < 1:
        raise InsufficientDataError(f"{n} rows cannot fill a window of {window} plus horizon {h_eff}")
    starts = np.arange(S) * stride

    n_train = int(math.floor(S * train_fraction))
    fit_rows = int(starts[max(n_train, 1) - 1]) + window + h_eff
    if task == "classification":
        norm_cols = feature_columns
    else:
        norm_cols = tuple(dict.fromkeys(feature_columns + (target_column,)))
    if normalizer is None:
        normalizer = zscore_fit(series.select(norm_cols), fit_rows)
    elif tuple(normalizer.columns) != norm_cols:
        raise SchemaError(f"normalizer columns {normalizer.columns} do not match {norm_cols}")
    scaled = zscore_apply(normalizer, series.select(norm_cols).values)
    feat_idx = [norm_cols.index(c) for c in feature_columns]
    feats = scaled[:, feat_idx]

    rows = starts[:, None] + np.arange(window)[None, :]
    inputs = feats[rows]
    if task == "regression":
        tgt = scaled[:, norm_cols.index(target_column)]
        targets = tgt[starts[:, None] + window + np.arange(horizon)[None, :]]
    else:
        labels = series.column(target_column)
        if np.any(labels != np.round(labels)) or np.any(labels < 0):
            raise UsageError("class labels must be non-negative integers")
        targets = labels[starts + window - 1].astype(np.int64)
    return WindowedDataset(
        inputs=inputs,
        targets=targets,
        normalizer=normalizer,
        window=window,
        horizon=horizon,
        stride=stride,
        task=task,
        feature_columns=feature_columns,
        target_column=target_column,
        starts=starts,
        fit_rows=fit_rows,
    )


def chrono_split(dataset, train_fraction=0.8):
    """First floor(S * fraction) samples train, the rest test; no shuffling."""
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    S = len(dataset)
    if S < 2:
        raise UsageError("need at least 2 samples to split")
    n_train = int(math.floor(S * train_fraction))
    if n_train < 1:
        raise UsageError(f"train_fraction {train_fraction} leaves no training samples out of {S}")
    if dataset.fit_rows > dataset.sample_end(n_train - 1):
        raise UsageError("normalizer was fit on rows beyond the training split")
    return dataset.subset(np.arange(n_train)), dataset.subset(np.arange(n_train, S))


# ---------------------------------------------------------------------------
# synthetic series

# incommensurate pair: the second frequency is the first times the golden ratio
_SINE_BASE_FREQ = 0.02
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def freq_class_frequencies(num_classes):
    """Cycles per sample for each class."""
    return 0.04 + 0.035 * np.arange(num_classes)


def gen_synth(kind, n, channels=1, seed=0, noise_std=0.0, **options):
    """Deterministic synthetic series.

    sine_mix: per channel sin(2 pi f t + p1) + 0.5 sin(2 pi f phi t + p2) with
      f = 0.02 * (1 + 0.1 c) and phi the golden ratio. Phases are zero unless
      ``random_phase=True``.
    freq_classes: segments of ``segment_len`` rows (default 32), each with a
      random class k < ``num_classes`` (default 6). Channel c observes the
      class-k sinusoid delayed by c samples, like a sensor array crossed by a
      wave. A ``label`` column holds k.
    linear_ar: x_t = a1 x_{t-1} + a2 x_{t-2} + noise per channel, with
      ``coefficients`` (default (0.5, 0.3)).
    """
    if kind not in SYNTH_KINDS:
        raise ParameterError(f"unknown synthetic kind {kind!r}; expected one of {SYNTH_KINDS}")
    if n < 1 or channels < 1:
        raise ParameterError("n and channels must be >= 1")
    if noise_std < 0:
        raise ParameterError("noise_std must be >= 0")
    rng = np.random.default_rng(int(seed) % 2**64)
    cols = tuple(f"x{c}" for c in range(channels))
    t = np.arange(n, dtype=np.float64)

    if kind == "sine_mix":
        values = np.empty((n, channels))
        for c in range(channels):
            f = _SINE_BASE_FREQ * (1.0 + 0.1 * c)
            p1, p2 = rng.uniform(0, 2 * np.pi, 2) if options.get("random_phase") else (0.0, 0.0)
            values[:, c] = np.sin(2 * np.pi * f * t + p1) + 0.5 * np.sin(2 * np.pi * f * _GOLDEN * t + p2)
        values += noise_std * rng.standard_normal((n, channels))
        return Series(values, cols)

    if kind == "linear_ar":
        a1, a2 = options.get("coefficients", (0.5, 0.3))
        eps = noise_std * rng.standard_normal((n, channels))
        values = np.zeros((n, channels))
        values[:2] = eps[:2]
        for i in range(2, n):
            values[i] = a1 * values[i - 1] + a2 * values[i - 2] + eps[i]
        return Series(values, cols)

    num_classes = int(options.get("num_classes", 6))
    seg = int(options.get("segment_len", 32))
    if num_classes < 1 or seg < 1:
        raise ParameterError("num_classes and segment_len must be >= 1")
    freqs = freq_class_frequencies(num_classes)
    n_seg = -(-n // seg)
    classes = rng.integers(0, num_classes, size=n_seg)
    phases = rng.uniform(0, 2 * np.pi, size=n_seg)
    local = np.arange(seg, dtype=np.float64)
    values = np.empty((n_seg * seg, channels))
    for s in range(n_seg):
        w = 2 * np.pi * freqs[classes[s]]
        for c in range(channels):
            values[s * seg : (s + 1) * seg, c] = np.sin(w * (local - c) + phases[s])
    values = values[:n] + noise_std * rng.standard_normal((n, channels))
    labels = np.repeat(classes, seg)[:n].astype(np.float64)
    return Series(np.column_stack([values, labels]), cols + (LABEL_COLUMN,))
