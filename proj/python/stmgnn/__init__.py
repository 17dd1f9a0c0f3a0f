"""Probabilistic forecasting for sparse spatial-temporal count data.

Thin python surface over the C++ core: distribution heads (ZINB, NB,
Gaussian, truncated normal), diffusion graph convolution, merged
time-category convolution, the fused forecasting model, training, the
evaluation metric suite, and a synthetic-data generator with known
ground-truth parameter fields.
"""

from stmgnn._core import (
    ModelConfig,
    ModelWeights,
    build_grid_adjacency,
    dgcn_layer_forward,
    discrete_scores,
    forward,
    head_mean,
    head_nll,
    head_param_names,
    head_quantile,
    historical_value,
    init_weights,
    kl_divergence_point,
    mae,
    merge_time_category,
    mpiw,
    picp,
    synthesize,
    train,
    transition_matrix,
    zinb_mean,
    zinb_nll,
    zinb_nll_grad,
    zinb_pmf,
    zinb_quantile,
    zinb_sample,
)

__all__ = [
    "ModelConfig",
    "ModelWeights",
    "build_grid_adjacency",
    "dgcn_layer_forward",
    "discrete_scores",
    "forward",
    "head_mean",
    "head_nll",
    "head_param_names",
    "head_quantile",
    "historical_value",
    "init_weights",
    "kl_divergence_point",
    "mae",
    "merge_time_category",
    "mpiw",
    "picp",
    "synthesize",
    "train",
    "transition_matrix",
    "zinb_mean",
    "zinb_nll",
    "zinb_nll_grad",
    "zinb_pmf",
    "zinb_quantile",
    "zinb_sample",
]

__version__ = "0.1.0"
