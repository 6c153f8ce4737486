"""Experiment pipeline: datasets, learners, interchange, shift synthesis."""

from .data import (
    Dataset,
    DatasetSchema,
    Preprocessor,
    kfold_split,
    load_dataset,
    make_separable_ordinal,
    make_synthetic_ordinal,
)
from .experiment import ExperimentResult, ExperimentRun, RunConfig, run_experiment
from .interchange import export_predictions, import_predictions
from .learner import BootstrapEnsemble, ProbabilityTree, train_bootstrap_ensemble
from .ood import ood_detection_aucs, shift_numeric_columns, synthesize_ood
from .soft_labels import SOFT_LABEL_ALPHA_GRID, soft_label_geometric

__all__ = [
    "BootstrapEnsemble",
    "Dataset",
    "DatasetSchema",
    "ExperimentResult",
    "ExperimentRun",
    "Preprocessor",
    "ProbabilityTree",
    "RunConfig",
    "SOFT_LABEL_ALPHA_GRID",
    "export_predictions",
    "import_predictions",
    "kfold_split",
    "load_dataset",
    "make_separable_ordinal",
    "make_synthetic_ordinal",
    "ood_detection_aucs",
    "run_experiment",
    "shift_numeric_columns",
    "soft_label_geometric",
    "synthesize_ood",
    "train_bootstrap_ensemble",
]
