"""Ultra-lightweight gated residual models with a self-contained autodiff engine."""

from .autodiff import Tape, Tensor, apply_activation, backward, conv1d, hadamard, matmul
from .data import (
    Normalizer,
    Series,
    WindowedDataset,
    chrono_split,
    gen_synth,
    load_csv,
    make_windows,
    zscore_apply,
    zscore_fit,
    zscore_invert,
)
from .io import load_model, save_model
from .model import (
    CuraConfig,
    CuraParams,
    count_params,
    cura_forward,
    filter_unit,
    gating_forward,
    init_params,
    nonlinear_unit,
    output_projection,
    residual_forward,
    residual_gate_combine,
)
from .training import (
    Hyperparams,
    TrainReport,
    adam_amsgrad_step,
    cross_entropy,
    f1_macro,
    fit,
    mae,
    mse,
    parameter_efficiency,
    r2_score,
)

__version__ = "0.1.0"
