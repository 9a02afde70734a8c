"""Structured beamforming networks on fast delay-Vandermonde transforms."""

__version__ = "0.1.0"

from .complexity import (
    flops_counted_dense,
    flops_counted_structured,
    flops_full,
    flops_truncated,
    percentage_reduction,
    reduction_report,
    write_reduction_csv,
    write_reduction_json,
)
from .dvm import (
    DvmSpec,
    FactorChain,
    OpCounter,
    RecursiveDftChain,
    build_bluestein_chain,
    build_recursive_dft_chain,
    circulant_first_column,
    cis,
    even_odd_permute,
    fast_dvm_apply,
    fft,
    scaled_dvm_apply,
    scaled_dvm_dense,
    unscaled_dvm_dense,
)
from .network import (
    KIND_DENSE,
    KIND_STRUCTURED,
    MODE_COMPLEX,
    MODE_REAL,
    Network,
    NetworkConfig,
    build_network,
    count_parameters,
    forward,
    init_from_dvm,
    load_network,
    save_network,
)
from .signals import (
    Dataset,
    load_dataset,
    make_dataset,
    save_dataset,
    split_dataset,
    transform_alpha,
)
from .training import (
    OptimizerConfig,
    TrainReport,
    TrainingDiverged,
    backward,
    evaluate_mse,
    grad_check,
    loss_and_grads,
    mse_loss,
    optimizer_step,
    train,
)

__all__ = [
    "__version__",
    # fast transform
    "DvmSpec",
    "FactorChain",
    "OpCounter",
    "RecursiveDftChain",
    "build_bluestein_chain",
    "build_recursive_dft_chain",
    "circulant_first_column",
    "cis",
    "even_odd_permute",
    "fast_dvm_apply",
    "fft",
    "scaled_dvm_apply",
    "scaled_dvm_dense",
    "unscaled_dvm_dense",
    # networks
    "KIND_DENSE",
    "KIND_STRUCTURED",
    "MODE_COMPLEX",
    "MODE_REAL",
    "Network",
    "NetworkConfig",
    "build_network",
    "count_parameters",
    "forward",
    "init_from_dvm",
    "load_network",
    "save_network",
    # signal simulation
    "Dataset",
    "load_dataset",
    "make_dataset",
    "save_dataset",
    "split_dataset",
    "transform_alpha",
    # training
    "OptimizerConfig",
    "TrainReport",
    "TrainingDiverged",
    "backward",
    "evaluate_mse",
    "grad_check",
    "loss_and_grads",
    "mse_loss",
    "optimizer_step",
    "train",
    # complexity accounting
    "flops_counted_dense",
    "flops_counted_structured",
    "flops_full",
    "flops_truncated",
    "percentage_reduction",
    "reduction_report",
    "write_reduction_csv",
    "write_reduction_json",
]
