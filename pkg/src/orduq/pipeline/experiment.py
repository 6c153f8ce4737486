"""Cross-validated experiment orchestration and result persistence.

One run covers a set of datasets.  Each (dataset, fold) pair is an
independent work unit with its own RNG stream derived from the master
seed, the dataset name, and the fold index, so units can be computed in
any order (or in parallel) without changing results.  Persistence is one
JSON document per unit under ``runs/<dataset>/<fold>.json`` plus a flat
``summary.csv`` whose rejection ratios and detection AUCs are pooled
over all folds of a dataset.
"""

from __future__ import annotations

import csv
import hashlib
import json
import zlib
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DegenerateComputationError, SchemaError
from ..evaluation import (
    CURVE_METRICS,
    PredictionRecord,
    attach_uncertainty,
    error_contributions,
    prr_from_arrays,
    auc_roc,
)
from ..measures import Measure, batch_decompose
from .data import Dataset, Preprocessor, kfold_split
from .learner import train_bootstrap_ensemble
from .ood import _synthesize_table, shift_numeric_columns

__all__ = ["RunConfig", "ExperimentRun", "ExperimentResult", "run_experiment"]

KINDS = ("tu", "au", "eu")
ALL_MEASURE_TAGS = tuple(m.value for m in Measure)


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one experiment run."""

    measures: tuple[str, ...] = ALL_MEASURE_TAGS
    metrics: tuple[str, ...] = ("mcr", "mae")
    n_folds: int = 10
    m_members: int = 10
    max_depth: int = 6
    subsample: float = 0.5
    min_leaf: int = 1
    seed: int = 0
    log_base: float = 2.0
    stratified: bool = False
    ood_shift: float | None = None

    def __post_init__(self) -> None:
        if not self.measures:
            raise SchemaError("config needs at least one measure")
        for tag in self.measures:
            try:
                Measure.from_string(tag)
            except ValueError as exc:
                raise SchemaError(str(exc)) from exc
        if not self.metrics:
            raise SchemaError("config needs at least one metric")
        for metric in self.metrics:
            if metric not in CURVE_METRICS:
                raise SchemaError(f"unknown metric {metric!r}; choose from {CURVE_METRICS}")
        if self.n_folds < 2:
            raise SchemaError("n_folds must be at least 2")
        if self.m_members < 1:
            raise SchemaError("m_members must be at least 1")

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["measures"] = list(self.measures)
        raw["metrics"] = list(self.metrics)
        return raw

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


@dataclass
class ExperimentRun:
    """Results for one (dataset, fold) unit."""

    dataset: str
    fold: int
    records: list[PredictionRecord]
    prr: dict[tuple[str, str, str], float]
    ood_auc: dict[tuple[str, str], float] | None
    config_hash: str
    seed: int
    # Raw EU/AU/TU scores for ID and OOD instances, kept for pooling.
    ood_scores: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] | None = field(
        default=None, repr=False
    )


@dataclass
class ExperimentResult:
    runs: list[ExperimentRun]
    summary: list[dict]
    config: RunConfig
    out_dir: Path | None = None

    def persist(self, out_dir: str | Path) -> Path:
        """Write fold documents and the pooled summary under ``out_dir``."""
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        _write_results(self.config, self)
        return self.out_dir


def _unit_seed(master: int, dataset_name: str, stream: int) -> np.random.SeedSequence:
    # stream 0 is the fold assignment; fold units use fold index + 1.
    return np.random.SeedSequence([master, zlib.crc32(dataset_name.encode()), stream])


def _fold_unit(
    config: RunConfig,
    dataset: Dataset,
    fold_ids: np.ndarray,
    fold: int,
) -> ExperimentRun:
    base = _unit_seed(config.seed, dataset.name, fold + 1)
    learner_seed, ood_seed = base.spawn(2)
    train_mask = fold_ids != fold
    test_mask = ~train_mask
    train_frame = dataset.features[train_mask].reset_index(drop=True)
    test_frame = dataset.features[test_mask].reset_index(drop=True)
    test_rows = np.flatnonzero(test_mask)

    pre = Preprocessor(dataset.column_kinds).fit(train_frame)
    ensemble = train_bootstrap_ensemble(
        pre.transform(train_frame),
        dataset.labels[train_mask],
        dataset.k_count,
        m_members=config.m_members,
        seed=learner_seed,
        max_depth=config.max_depth,
        subsample=config.subsample,
        min_leaf=config.min_leaf,
    )
    members = ensemble.predict_members(pre.transform(test_frame))
    records = [
        PredictionRecord.from_members(
            instance_id=int(row),
            true_label=int(label),
            members=members[i],
        )
        for i, (row, label) in enumerate(zip(test_rows, dataset.labels[test_mask]))
    ]
    measures = tuple(Measure.from_string(tag) for tag in config.measures)
    attach_uncertainty(records, measures=measures, log_base=config.log_base)

    prr_table: dict[tuple[str, str, str], float] = {}
    for metric in config.metrics:
        errors = error_contributions(records, metric)
        for measure in measures:
            for kind in KINDS:
                scores = np.array([r.uncertainty[measure][kind] for r in records])
                try:
                    result = prr_from_arrays(errors, scores, metric)
                except DegenerateComputationError as exc:
                    raise DegenerateComputationError(
                        f"dataset {dataset.name!r} fold {fold}: {exc}"
                    ) from exc
                prr_table[(measure.value, kind, metric)] = result.prr

    ood_auc = None
    ood_scores = None
    if config.ood_shift is not None:
        donor = shift_numeric_columns(dataset, config.ood_shift)
        ood_frame = _synthesize_table(
            test_frame,
            dataset.column_kinds,
            donor.features[train_mask].reset_index(drop=True),
            donor.column_kinds,
            donor.name,
            np.random.default_rng(ood_seed),
        )
        ood_members = ensemble.predict_members(pre.transform(ood_frame))
        ood_auc = {}
        ood_scores = {}
        flags = np.concatenate([np.zeros(len(records), dtype=int), np.ones(len(ood_frame), dtype=int)])
        for measure in measures:
            id_triples = {
                kind: np.array([r.uncertainty[measure][kind] for r in records])
                for kind in KINDS
            }
            shifted = dict(zip(("tu", "au", "eu"), batch_decompose(ood_members, measure, config.log_base)))
            for kind in KINDS:
                pooled = np.concatenate([id_triples[kind], shifted[kind]])
                ood_auc[(measure.value, kind)] = auc_roc(pooled, flags)
                ood_scores[(measure.value, kind)] = (id_triples[kind], shifted[kind])

    return ExperimentRun(
        dataset=dataset.name,
        fold=fold,
        records=records,
        prr=prr_table,
        ood_auc=ood_auc,
        config_hash=config.config_hash,
        seed=config.seed,
        ood_scores=ood_scores,
    )


def _pooled_summary(config: RunConfig, runs_by_dataset: dict[str, list[ExperimentRun]]) -> list[dict]:
    rows = []
    for name, runs in runs_by_dataset.items():
        records = [r for run in runs for r in run.records]
        measures = tuple(Measure.from_string(tag) for tag in config.measures)
        for metric in config.metrics:
            errors = error_contributions(records, metric)
            for measure in measures:
                for kind in KINDS:
                    scores = np.array([r.uncertainty[measure][kind] for r in records])
                    try:
                        value = prr_from_arrays(errors, scores, metric).prr
                    except DegenerateComputationError as exc:
                        raise DegenerateComputationError(
                            f"dataset {name!r} pooled over folds: {exc}"
                        ) from exc
                    rows.append(
                        {
                            "dataset": name,
                            "measure": measure.value,
                            "kind": kind,
                            "metric": metric,
                            "value": value,
                        }
                    )
        scored_runs = [run for run in runs if run.ood_scores is not None]
        if config.ood_shift is not None and scored_runs:
            for measure in measures:
                for kind in KINDS:
                    id_parts = [run.ood_scores[(measure.value, kind)][0] for run in scored_runs]
                    ood_parts = [run.ood_scores[(measure.value, kind)][1] for run in scored_runs]
                    id_all = np.concatenate(id_parts)
                    ood_all = np.concatenate(ood_parts)
                    pooled = np.concatenate([id_all, ood_all])
                    flags = np.concatenate(
                        [np.zeros(id_all.size, dtype=int), np.ones(ood_all.size, dtype=int)]
                    )
                    rows.append(
                        {
                            "dataset": name,
                            "measure": measure.value,
                            "kind": kind,
                            "metric": "ood_auc",
                            "value": auc_roc(pooled, flags),
                        }
                    )
    return rows


def _fold_document(config: RunConfig, run: ExperimentRun) -> dict:
    records = [
        {
            "instance_id": r.instance_id,
            "true_label": r.true_label,
            "members": [[float(v) for v in member] for member in r.members.matrix],
            "uncertainty": {
                measure.value: {
                    "tu": triple.tu,
                    "au": triple.au,
                    "eu": triple.eu,
                }
                for measure, triple in r.uncertainty.items()
            },
        }
        for r in run.records
    ]
    doc = {
        "dataset": run.dataset,
        "fold": run.fold,
        "seed": run.seed,
        "config": config.to_dict(),
        "config_hash": run.config_hash,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "n_test": len(run.records),
        "records": records,
        "prr": [
            {"measure": m, "kind": k, "metric": t, "value": v}
            for (m, k, t), v in sorted(run.prr.items())
        ],
    }
    if run.ood_auc is not None:
        doc["ood_auc"] = [
            {"measure": m, "kind": k, "value": v}
            for (m, k), v in sorted(run.ood_auc.items())
        ]
    return doc


def _write_results(config: RunConfig, result: ExperimentResult) -> None:
    out_dir = result.out_dir
    assert out_dir is not None
    for run in result.runs:
        fold_dir = out_dir / "runs" / run.dataset
        fold_dir.mkdir(parents=True, exist_ok=True)
        doc = _fold_document(config, run)
        (fold_dir / f"{run.fold}.json").write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n"
        )
    with (out_dir / "summary.csv").open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["dataset", "measure", "kind", "metric", "value"])
        writer.writeheader()
        for row in result.summary:
            out = dict(row)
            out["value"] = repr(float(out["value"]))
            writer.writerow(out)


def run_experiment(
    config: RunConfig,
    datasets: Sequence[Dataset] = (),
    predictions: Sequence[PredictionRecord] | None = None,
    out_dir: str | Path | None = None,
    dataset_name: str = "imported",
) -> ExperimentResult:
    """Run the full protocol and optionally persist results.

    Sources are either ``datasets`` (trained with the built-in bootstrap
    ensemble under k-fold cross-validation) or ``predictions`` (already
    computed member probabilities, treated as a single fold).  Rejection
    ratios for every measure, kind, and configured metric are computed
    per fold and pooled per dataset; with ``ood_shift`` set, detection
    AUCs against a shifted-donor OOD set are added.
    """
    if not datasets and predictions is None:
        raise SchemaError("run_experiment needs datasets or predictions")
    runs_by_dataset: dict[str, list[ExperimentRun]] = {}
    measures = tuple(Measure.from_string(tag) for tag in config.measures)

    if predictions is not None:
        records = list(predictions)
        attach_uncertainty(records, measures=measures, log_base=config.log_base)
        prr_table: dict[tuple[str, str, str], float] = {}
        for metric in config.metrics:
            errors = error_contributions(records, metric)
            for measure in measures:
                for kind in KINDS:
                    scores = np.array([r.uncertainty[measure][kind] for r in records])
                    prr_table[(measure.value, kind, metric)] = prr_from_arrays(
                        errors, scores, metric
                    ).prr
        runs_by_dataset[dataset_name] = [
            ExperimentRun(
                dataset=dataset_name,
                fold=0,
                records=records,
                prr=prr_table,
                ood_auc=None,
                config_hash=config.config_hash,
                seed=config.seed,
            )
        ]

    for dataset in datasets:
        fold_ids = kfold_split(
            len(dataset.features),
            config.n_folds,
            seed=_unit_seed(config.seed, dataset.name, 0),
            labels=dataset.labels if config.stratified else None,
            stratified=config.stratified,
        )
        runs_by_dataset[dataset.name] = [
            _fold_unit(config, dataset, fold_ids, fold) for fold in range(config.n_folds)
        ]

    runs = [run for unit in runs_by_dataset.values() for run in unit]
    summary = _pooled_summary(config, runs_by_dataset)
    result = ExperimentResult(runs=runs, summary=summary, config=config)
    if out_dir is not None:
        result.persist(out_dir)
    return result
