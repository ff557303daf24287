"""Sparse variational Bayesian neural networks with input-skip connections.

Covariates are concatenated into every layer's input, so each one can act
at any depth or drop out of the model entirely. Every weight carries a
Bernoulli inclusion variable under a spike-and-slab prior; training by
variational inference with the local reparameterization trick yields
posterior inclusion probabilities, and thresholding them at 0.5 gives the
median probability model. Active-path analysis prunes that structure down
to the weights that actually connect covariates to outputs, and the same
machinery powers global and local explanations with credible intervals.
"""

from .data import Dataset, gen_linear, gen_nonlinear, load_csv, minmax_scale, split
from .explain import (
    ExplanationReport,
    explain_with_uncertainty,
    global_explain,
    local_explain_empirical,
    local_explain_gradient,
)
from .layers import LayerPrior, VariationalLayer, layer_kl, lrt_forward, mpm_forward
from .metrics import accuracy, ece, nll, pearson_corr, pinball, rmse
from .network import (
    Network,
    NetworkSpec,
    Prediction,
    forward_sample,
    load,
    predict,
    save,
    total_kl,
)
from .rng import Rng
from .structure import (
    ActivePathGraph,
    StructureMask,
    active_paths,
    covariate_inclusion,
    depth_metrics,
    extract_mpm,
    sample_structure,
)
from .training import TrainConfig, TrainLog, train

__version__ = "0.1.0"

__all__ = [
    "ActivePathGraph",
    "Dataset",
    "ExplanationReport",
    "LayerPrior",
    "Network",
    "NetworkSpec",
    "Prediction",
    "Rng",
    "StructureMask",
    "TrainConfig",
    "TrainLog",
    "VariationalLayer",
    "accuracy",
    "active_paths",
    "covariate_inclusion",
    "depth_metrics",
    "ece",
    "explain_with_uncertainty",
    "extract_mpm",
    "forward_sample",
    "gen_linear",
    "gen_nonlinear",
    "global_explain",
    "layer_kl",
    "load",
    "load_csv",
    "local_explain_empirical",
    "local_explain_gradient",
    "lrt_forward",
    "minmax_scale",
    "mpm_forward",
    "nll",
    "pearson_corr",
    "pinball",
    "predict",
    "rmse",
    "sample_structure",
    "save",
    "split",
    "total_kl",
    "train",
]
