"""NNGP kernel recursions for graph networks."""

from .params import MODELS, HyperParams, KernelMatrix, check_kernel
from .maps import layernorm_kernel_map, relu_kernel_map
from .steps import (
    gat_step_linear,
    gat_step_relu_attention,
    gcn_step,
    graphormer_augment,
    graphormer_step_linear,
    gtn_step,
    specformer_lambda_kernel,
    specformer_node_step,
    specformer_token_kernel_init,
    specformer_token_step_linear,
)
from .attention_mc import MonteCarloKernel, gat_step_mc
from .positional import PositionalCovariance, build_positional_covariance
from .sweep import SweepOptions, run_depth_sweep
