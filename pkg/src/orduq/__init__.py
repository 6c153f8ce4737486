"""Uncertainty quantification for probabilistic ordinal classifiers.

The package computes total/aleatoric/epistemic uncertainty for ensemble
predictions over ordered class scales, evaluates those scores through
rejection curves, prediction rejection ratios and distribution-shift AUC,
compares measures with rank statistics, and ships a small experiment
pipeline plus a command line around all of it.
"""

from .errors import DegenerateComputationError, SchemaError
from .evaluation import (
    PointMetrics,
    PredictionRecord,
    PrrResult,
    ProbMetrics,
    RejectionCurve,
    attach_uncertainty,
    auc_roc,
    decide,
    emd_loss,
    error_contributions,
    point_metrics,
    prob_metrics,
    prr,
    prr_from_arrays,
    rejection_curve,
    rejection_curve_from_arrays,
)
from .measures import (
    ALL_MEASURES,
    BinaryDistribution,
    ClassScale,
    EnsemblePrediction,
    Measure,
    ProbabilityVector,
    SimplexSweep,
    UncertaintyTriple,
    aggregate_labelwise,
    aggregate_ordinal,
    batch_decompose,
    compute_uncertainty,
    decompose_entropy,
    decompose_variance,
    ocs_reduce,
    one_vs_rest_reduce,
    ordinal_variance,
    posterior_mean,
    shannon_entropy,
    simplex_grid,
    simplex_heatmap,
)
from .stats import (
    FriedmanResult,
    ScoreMatrix,
    TestReport,
    WilcoxonResult,
    compare_treatments,
    friedman_test,
    holm_adjust,
    wilcoxon_signed_rank,
)
from .pipeline import (
    Dataset,
    DatasetSchema,
    ExperimentResult,
    ExperimentRun,
    Preprocessor,
    RunConfig,
    SOFT_LABEL_ALPHA_GRID,
    export_predictions,
    import_predictions,
    kfold_split,
    load_dataset,
    make_separable_ordinal,
    make_synthetic_ordinal,
    ood_detection_aucs,
    run_experiment,
    shift_numeric_columns,
    soft_label_geometric,
    synthesize_ood,
    train_bootstrap_ensemble,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_MEASURES",
    "BinaryDistribution",
    "ClassScale",
    "Dataset",
    "DatasetSchema",
    "DegenerateComputationError",
    "EnsemblePrediction",
    "ExperimentResult",
    "ExperimentRun",
    "FriedmanResult",
    "Measure",
    "PointMetrics",
    "PredictionRecord",
    "Preprocessor",
    "ProbMetrics",
    "ProbabilityVector",
    "PrrResult",
    "RejectionCurve",
    "RunConfig",
    "SOFT_LABEL_ALPHA_GRID",
    "SchemaError",
    "ScoreMatrix",
    "SimplexSweep",
    "TestReport",
    "UncertaintyTriple",
    "WilcoxonResult",
    "aggregate_labelwise",
    "aggregate_ordinal",
    "attach_uncertainty",
    "auc_roc",
    "batch_decompose",
    "compare_treatments",
    "compute_uncertainty",
    "decide",
    "decompose_entropy",
    "decompose_variance",
    "emd_loss",
    "error_contributions",
    "export_predictions",
    "friedman_test",
    "holm_adjust",
    "import_predictions",
    "kfold_split",
    "load_dataset",
    "make_separable_ordinal",
    "make_synthetic_ordinal",
    "ocs_reduce",
    "one_vs_rest_reduce",
    "ood_detection_aucs",
    "ordinal_variance",
    "point_metrics",
    "posterior_mean",
    "prob_metrics",
    "prr",
    "prr_from_arrays",
    "rejection_curve",
    "rejection_curve_from_arrays",
    "run_experiment",
    "shannon_entropy",
    "shift_numeric_columns",
    "simplex_grid",
    "simplex_heatmap",
    "soft_label_geometric",
    "synthesize_ood",
    "train_bootstrap_ensemble",
    "wilcoxon_signed_rank",
    "__version__",
]
