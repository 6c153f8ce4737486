"""Synthesis of out-of-distribution feature tables from a donor dataset.

The protocol keeps the in-distribution table's column layout: numeric
columns are filled from the donor's numeric columns (matched by
position), categorical columns are sampled uniformly from the category
sets observed in the in-distribution data.  Standardization is *not*
applied here; the caller runs the resulting table through the fold's
fitted :class:`~orduq.pipeline.data.Preprocessor` so that every feature
is scaled by in-distribution training statistics.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from ..errors import SchemaError
from ..measures import Measure, batch_decompose
from ..evaluation import auc_roc
from .data import Dataset, Preprocessor
from .learner import train_bootstrap_ensemble

__all__ = ["synthesize_ood", "shift_numeric_columns", "ood_detection_aucs"]


def _synthesize_table(
    test_features: pd.DataFrame,
    test_kinds: dict[str, str],
    donor_features: pd.DataFrame,
    donor_kinds: dict[str, str],
    donor_name: str,
    rng: np.random.Generator,
) -> pd.DataFrame:
    id_numeric = [c for c in test_features.columns if test_kinds[c] == "numeric"]
    donor_numeric = [c for c in donor_features.columns if donor_kinds[c] == "numeric"]
    if len(donor_numeric) < len(id_numeric):
        raise SchemaError(
            f"donor dataset {donor_name!r} has {len(donor_numeric)} numeric "
            f"columns but {len(id_numeric)} are required"
        )
    n = len(test_features)
    rows = rng.choice(len(donor_features), size=n, replace=len(donor_features) < n)
    out = {}
    for j, column in enumerate(id_numeric):
        source = donor_features[donor_numeric[j]].to_numpy()
        out[column] = source[rows].astype(np.float64)
    for column in test_features.columns:
        if test_kinds[column] == "categorical":
            categories = sorted(test_features[column].astype(str).unique())
            out[column] = np.asarray(categories, dtype=object)[
                rng.integers(0, len(categories), size=n)
            ]
    return pd.DataFrame(out, columns=list(test_features.columns))


def synthesize_ood(
    id_test: Dataset,
    donor: Dataset,
    seed: int | np.random.SeedSequence = 0,
) -> pd.DataFrame:
    """Build an OOD feature table shaped like ``id_test`` from ``donor`` rows.

    Returns a table with the same column names, order, and row count as
    ``id_test.features``.  Numeric columns take values from randomly
    drawn donor rows (donor numeric columns matched in order, so the
    donor's joint structure is preserved); categorical columns are drawn
    uniformly from the categories present in ``id_test``.  Deterministic
    for a fixed seed.
    """
    return _synthesize_table(
        id_test.features,
        id_test.column_kinds,
        donor.features,
        donor.column_kinds,
        donor.name,
        np.random.default_rng(seed),
    )


def ood_detection_aucs(
    dataset: Dataset,
    donor: Dataset,
    measures: tuple[Measure | str, ...] = tuple(Measure),
    seed: int | np.random.SeedSequence = 0,
    test_fraction: float = 0.2,
    m_members: int = 10,
    max_depth: int = 6,
    subsample: float = 0.5,
    min_leaf: int = 1,
    log_base: float = 2.0,
) -> dict[tuple[str, str], float]:
    """Score OOD detection for every measure and uncertainty kind.

    Splits ``dataset`` into train/test, fits the built-in bootstrap
    ensemble on the training part, synthesizes an OOD table from
    ``donor`` rows matched to the test part, and returns the detection
    AUC for each (measure, kind): in-distribution instances are labeled
    0, synthesized ones 1, and the uncertainty value is the score.
    Deterministic for a fixed seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    split_seed, learner_seed, ood_seed = base.spawn(3)
    rng = np.random.default_rng(split_seed)
    n = len(dataset.features)
    n_test = max(1, round(test_fraction * n))
    order = rng.permutation(n)
    test_rows, train_rows = order[:n_test], order[n_test:]
    train_frame = dataset.features.iloc[train_rows].reset_index(drop=True)
    test_frame = dataset.features.iloc[test_rows].reset_index(drop=True)

    pre = Preprocessor(dataset.column_kinds).fit(train_frame)
    ensemble = train_bootstrap_ensemble(
        pre.transform(train_frame),
        dataset.labels[train_rows],
        dataset.k_count,
        m_members=m_members,
        seed=learner_seed,
        max_depth=max_depth,
        subsample=subsample,
        min_leaf=min_leaf,
    )
    ood_frame = _synthesize_table(
        test_frame,
        dataset.column_kinds,
        donor.features,
        donor.column_kinds,
        donor.name,
        np.random.default_rng(ood_seed),
    )
    id_members = ensemble.predict_members(pre.transform(test_frame))
    ood_members = ensemble.predict_members(pre.transform(ood_frame))
    flags = np.concatenate([np.zeros(n_test, dtype=int), np.ones(n_test, dtype=int)])
    aucs: dict[tuple[str, str], float] = {}
    for measure in measures:
        measure = Measure.from_string(measure)
        id_triple = batch_decompose(id_members, measure, log_base)
        ood_triple = batch_decompose(ood_members, measure, log_base)
        for kind, id_vals, ood_vals in zip(("tu", "au", "eu"), id_triple, ood_triple):
            aucs[(measure.value, kind)] = auc_roc(
                np.concatenate([id_vals, ood_vals]), flags
            )
    return aucs


def shift_numeric_columns(dataset: Dataset, n_sigmas: float) -> Dataset:
    """Return a copy of ``dataset`` with numeric columns shifted by ``n_sigmas`` stds.

    Per-column population standard deviations are used, so a shift of 10
    moves every numeric column ten of its own standard deviations away
    from the original mass.  Categorical columns and labels are kept.
    """
    frame = dataset.features.copy()
    for column in frame.columns:
        if dataset.column_kinds[column] == "numeric":
            values = frame[column].to_numpy(dtype=np.float64)
            frame[column] = values + n_sigmas * values.std()
    return Dataset(
        name=dataset.name,
        features=frame,
        labels=dataset.labels.copy(),
        k_count=dataset.k_count,
        column_kinds=dict(dataset.column_kinds),
        label_values=dataset.label_values,
    )
