"""Reduced-basis surrogates for parameterized, time-dependent fields.

Compresses snapshot ensembles onto a truncated orthogonal basis, learns
each basis coefficient as a function of (t, lambda) with tuned Gaussian
epsilon-SVRs, ships per-cell error-bound constants with every model, and
serves millisecond reconstructions over HTTP.
"""

from .dataset import (
    InputMatrix,
    SimulationRun,
    SnapshotMatrix,
    SyntheticConfig,
    build_snapshot_matrix,
    generate_synthetic,
    grid_coordinates,
    load_dataset,
    load_dataset_metadata,
    save_dataset,
    split_by_run,
)
from .errors import (
    CannotSplitError,
    ChecksumError,
    ConvergenceError,
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    GeneratorConfigError,
    NumericError,
    RbsError,
    RuntimeBindError,
    TuningFailedError,
    UndefinedEnergyError,
    UndefinedMetricError,
    UnsupportedVersionError,
)
from .evaluate import (
    BoundReport,
    EvalReport,
    compute_Kp,
    make_report,
    rel_ame,
    rel_rmse,
    verify_bound,
)
from .pipeline import (
    FitConfig,
    Standardizer,
    SurrogateModel,
    bench_latency,
    fit,
    fit_standardizer,
    infer,
    infer_batch,
    is_extrapolated,
    load_model,
    save_model,
)
from .pod import (
    PodBasis,
    accumulated_energy,
    compute_svd,
    pod_basis,
    project,
    reconstruct,
    select_rank,
)
from .svr import (
    KernelCache,
    SvrHyperparams,
    SvrModel,
    gaussian_kernel,
    kernel,
    train_svr,
    validation_rmse,
)
from .tuner import (
    Dimension,
    SearchSpace,
    Trial,
    default_space,
    history_to_jsonl,
    objective_worst_error,
    optimize,
    tpe_suggest,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CannotSplitError", "ChecksumError", "ConvergenceError",
    "Dimension", "DimensionMismatchError", "EmptyInputError", "EvalReport",
    "FitConfig", "FormatError", "GeneratorConfigError", "InputMatrix",
    "KernelCache", "NumericError", "PodBasis", "RbsError", "RuntimeBindError",
    "SearchSpace", "SimulationRun", "SnapshotMatrix", "Standardizer",
    "SurrogateModel", "SvrHyperparams", "SvrModel", "SyntheticConfig",
    "Trial", "TuningFailedError", "UndefinedEnergyError",
    "UndefinedMetricError", "UnsupportedVersionError", "accumulated_energy",
    "bench_latency", "build_snapshot_matrix", "compute_Kp", "compute_svd",
    "default_space", "fit", "fit_standardizer", "gaussian_kernel",
    "generate_synthetic", "grid_coordinates", "history_to_jsonl", "infer",
    "infer_batch", "is_extrapolated", "kernel", "load_dataset",
    "load_dataset_metadata", "load_model", "make_report",
    "objective_worst_error", "optimize", "pod_basis", "project",
    "reconstruct", "rel_ame", "rel_rmse", "save_dataset", "save_model",
    "select_rank", "split_by_run", "tpe_suggest", "train_svr", "tune",
    "validation_rmse", "verify_bound",
]
