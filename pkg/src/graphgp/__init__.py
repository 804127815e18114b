"""Infinite-width Gaussian-process kernels for graph neural networks and graph transformers."""

from .exceptions import (
    ConfigError,
    DatasetParseError,
    DegenerateDegreeError,
    DegenerateNodeError,
    GraphGPError,
    InvalidKernelError,
    InvalidParameterError,
    NumericalError,
)
from .graph import (
    Graph,
    SbmParams,
    SpectralDecomposition,
    StructuralRelation,
    normalized_adjacency,
    normalized_laplacian_spectrum,
    population_sbm,
    sample_csbm,
    shortest_path_buckets,
)
from .kernels import HyperParams, KernelMatrix, SweepOptions, run_depth_sweep

__version__ = "0.1.0"
