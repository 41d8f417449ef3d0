"""Histogram-loss regression toolkit.

Thin Python surface over the C++ core: histogram projections, the loss
family, the gradient-check oracle, full training runs and the least-squares
baseline. See the project README for the configuration schema.
"""

from ._core import (
    BinGrid,
    erf,
    expected_value,
    gradient_check,
    hl_grad_logits,
    hl_grad_norm_bound,
    hl_loss,
    interquartile_range,
    l1_loss,
    l2_loss,
    l2_softmax_loss,
    locate_bin,
    make_bin_grid,
    median_normalize,
    ols_baseline,
    project_gaussian,
    project_onebin,
    project_uniform_mix,
    softmax,
    train_run,
)

__all__ = [
    "BinGrid",
    "erf",
    "expected_value",
    "gradient_check",
    "hl_grad_logits",
    "hl_grad_norm_bound",
    "hl_loss",
    "interquartile_range",
    "l1_loss",
    "l2_loss",
    "l2_softmax_loss",
    "locate_bin",
    "make_bin_grid",
    "median_normalize",
    "ols_baseline",
    "project_gaussian",
    "project_onebin",
    "project_uniform_mix",
    "softmax",
    "train_run",
]
