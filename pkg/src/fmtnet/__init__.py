"""Factorized multimodal transformer on a self-contained float64 autodiff core."""

__version__ = "0.1.0"

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_run_config
from .data import (
    MultimodalBatch,
    SyntheticTaskSpec,
    generate_dataset,
    restrict_modalities,
    split,
)
from .dataio import DataFormatError, load_dataset, read_array, save_dataset, write_array
from .experiments import (
    ResultTable,
    default_grid,
    greedy_factor_search,
    grid_search,
    run_ablation_suite,
    sweep,
)
from .factors import Factor, FactorSet, enumerate_factors, fan_in
from .gradcheck import grad_check, output_probe
from .metrics import compute_metrics
from .model import (
    BaselineConfig,
    BaselineTransformer,
    DegenerateSequenceError,
    FmtConfig,
    FmtModel,
    ModalitySpec,
    ModelConfigError,
    SummarizerConfig,
    apply_factor_ablation,
    build_model,
    config_from_dict,
)
from .optim import Adam
from .tensor import GraphReleasedError, Parameter, ShapeError, Tensor
from .train import (
    DivergenceError,
    TrainConfig,
    TrainConfigError,
    evaluate,
    predict,
    train,
)

__all__ = [
    "Adam",
    "BaselineConfig",
    "BaselineTransformer",
    "CheckpointError",
    "ConfigError",
    "DataFormatError",
    "DegenerateSequenceError",
    "DivergenceError",
    "Factor",
    "FactorSet",
    "FmtConfig",
    "FmtModel",
    "GraphReleasedError",
    "ModalitySpec",
    "ModelConfigError",
    "MultimodalBatch",
    "Parameter",
    "ResultTable",
    "RunConfig",
    "ShapeError",
    "SummarizerConfig",
    "SyntheticTaskSpec",
    "Tensor",
    "TrainConfig",
    "TrainConfigError",
    "apply_factor_ablation",
    "build_model",
    "compute_metrics",
    "config_from_dict",
    "default_grid",
    "enumerate_factors",
    "evaluate",
    "fan_in",
    "generate_dataset",
    "grad_check",
    "greedy_factor_search",
    "grid_search",
    "load_checkpoint",
    "load_dataset",
    "load_run_config",
    "output_probe",
    "predict",
    "read_array",
    "restrict_modalities",
    "run_ablation_suite",
    "save_checkpoint",
    "save_dataset",
    "split",
    "sweep",
    "train",
    "write_array",
]
