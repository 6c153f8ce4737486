"""Command-line surface: compute uncertainty, run demos, and emit artifacts.

Every subcommand validates its inputs before computing, computes fully
before writing any file, prints a one-line JSON summary to stdout, and
uses exit codes 0 (ok), 1 (computation degeneracy), 2 (input or schema
problem).  The default output root comes from ``ORDUQ_OUT`` or falls
back to ``./orduq-out``.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import DegenerateComputationError, SchemaError
from .evaluation import (
    attach_uncertainty,
    error_contributions,
    rejection_curve_from_arrays,
)
from .measures import Measure, simplex_heatmap
from .pipeline import (
    DatasetSchema,
    RunConfig,
    import_predictions,
    load_dataset,
    make_separable_ordinal,
    make_synthetic_ordinal,
    ood_detection_aucs,
    run_experiment,
    shift_numeric_columns,
)
from .plotting import save_rank_figure, save_rejection_figure, save_simplex_figure
from .stats import ScoreMatrix, compare_treatments

KINDS = ("tu", "au", "eu")
ALL_TAGS = tuple(m.value for m in Measure)


def _out_root(value: str | None) -> Path:
    if value:
        return Path(value)
    import os

    return Path(os.environ.get("ORDUQ_OUT", "orduq-out"))


def _parse_measures(text: str) -> tuple[str, ...]:
    if text.strip().lower() == "all":
        return ALL_TAGS
    tags = tuple(part.strip() for part in text.split(",") if part.strip())
    if not tags:
        raise SchemaError("no measures given")
    for tag in tags:
        Measure.from_string(tag)
    return tags


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True))


def _guarded(func):
    """Map exceptions to the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SchemaError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DegenerateComputationError as exc:
            click.echo(f"degenerate: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue())


@click.group()
@click.version_option(version=__version__, prog_name="orduq")
def main() -> None:
    """Uncertainty decomposition and evaluation for ordinal classifiers."""


@main.command()
@click.argument("predictions", type=click.Path(path_type=Path))
@click.option("--measures", default="all", show_default=True, help="Comma-separated measure tags or 'all'.")
@click.option("--log-base", default=2.0, show_default=True, type=float)
@click.option("--out", default=None, help="Output directory (default $ORDUQ_OUT or ./orduq-out).")
@_guarded
def measure(predictions: Path, measures: str, log_base: float, out: str | None) -> None:
    """Compute per-instance uncertainty triples for a prediction file."""
    tags = _parse_measures(measures)
    records = import_predictions(predictions)
    attach_uncertainty(records, measures=tags, log_base=log_base)
    rows = []
    for record in records:
        for tag in tags:
            triple = record.uncertainty[Measure.from_string(tag)]
            rows.append(
                [record.instance_id, tag, repr(triple.tu), repr(triple.au), repr(triple.eu)]
            )
    out_dir = _out_root(out)
    target = out_dir / "uncertainty.csv"
    _write_csv(target, ["instance_id", "measure", "tu", "au", "eu"], rows)
    _emit(
        {
            "command": "measure",
            "instances": len(records),
            "measures": list(tags),
            "rows": len(rows),
            "out": str(target),
        }
    )


def _curve_rows_and_figures(records, tags, metrics, oracle_only, out_dir):
    """Build the long-format curve table plus one figure per metric."""
    curve_rows: list[list] = []
    figures: list[tuple[Path, dict]] = []
    for metric in metrics:
        errors = error_contributions(records, metric)
        traces: dict[str, object] = {}
        if not oracle_only:
            for tag in tags:
                for kind in KINDS:
                    scores = np.array(
                        [r.uncertainty[Measure.from_string(tag)][kind] for r in records]
                    )
                    traces[f"{tag}/{kind}"] = rejection_curve_from_arrays(
                        errors, scores, ordering="uncertainty", metric=metric
                    )
        traces["oracle"] = rejection_curve_from_arrays(errors, ordering="oracle", metric=metric)
        if not oracle_only:
            traces["random"] = rejection_curve_from_arrays(
                errors, ordering="random-analytic", metric=metric
            )
        for name, curve in traces.items():
            for fraction, value in zip(curve.fractions, curve.values):
                curve_rows.append([metric, name, repr(float(fraction)), repr(float(value))])
        figures.append((out_dir / f"rejection_{metric}.svg", dict(traces)))
    return curve_rows, figures


@main.command()
@click.option("--demo", is_flag=True, help="Use the built-in synthetic ordinal dataset.")
@click.option("--predictions", type=click.Path(path_type=Path), default=None, help="Prediction interchange file.")
@click.option("--measures", default="all", show_default=True)
@click.option("--metrics", default="mcr,mae", show_default=True)
@click.option("--folds", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--log-base", default=2.0, show_default=True, type=float)
@click.option("--oracle-only", is_flag=True, help="Emit only the oracle trace per metric.")
@click.option("--out", default=None)
@_guarded
def evaluate(
    demo: bool,
    predictions: Path | None,
    measures: str,
    metrics: str,
    folds: int,
    seed: int,
    log_base: float,
    oracle_only: bool,
    out: str | None,
) -> None:
    """Run the evaluation protocol and emit curves, ratios, and summaries."""
    if demo == (predictions is not None):
        raise SchemaError("choose exactly one source: --demo or --predictions")
    tags = _parse_measures(measures)
    metric_list = tuple(part.strip() for part in metrics.split(",") if part.strip())
    config = RunConfig(
        measures=tags,
        metrics=metric_list,
        n_folds=folds,
        seed=seed,
        log_base=log_base,
    )
    out_dir = _out_root(out)
    if demo:
        datasets = [make_synthetic_ordinal(seed=seed)]
        result = run_experiment(config, datasets=datasets)
    else:
        records_in = import_predictions(predictions)
        result = run_experiment(config, predictions=records_in)
    pooled = [record for run in result.runs for record in run.records]
    curve_rows, figures = _curve_rows_and_figures(
        pooled, tags, metric_list, oracle_only, out_dir
    )
    # All computation is done; only now touch the filesystem.
    result.persist(out_dir)
    curves_path = out_dir / "curves.csv"
    _write_csv(curves_path, ["metric", "trace", "fraction", "value"], curve_rows)
    written = [str(curves_path), str(out_dir / "summary.csv")]
    for path, traces in figures:
        save_rejection_figure(traces, path, title=f"rejection ({path.stem.split('_', 1)[1]})")
        written.append(str(path))
    _emit(
        {
            "command": "evaluate",
            "datasets": sorted({run.dataset for run in result.runs}),
            "instances": len(pooled),
            "measures": list(tags),
            "metrics": list(metric_list),
            "out": str(out_dir),
            "files": written,
        }
    )


@main.command()
@click.option("--demo", is_flag=True, help="Use the built-in separable demo dataset.")
@click.option("--data", type=click.Path(path_type=Path), default=None, help="ID dataset CSV.")
@click.option("--schema", type=click.Path(path_type=Path), default=None, help="ID dataset schema JSON.")
@click.option("--donor", type=click.Path(path_type=Path), default=None, help="Donor dataset CSV.")
@click.option("--donor-schema", type=click.Path(path_type=Path), default=None, help="Donor schema JSON.")
@click.option("--shift", type=float, default=None, help="Shift ID numeric columns by this many stds to build the donor.")
@click.option("--measures", default="all", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--min-leaf", default=4, show_default=True, type=int, help="Leaf size for the detection ensemble.")
@click.option("--log-base", default=2.0, show_default=True, type=float)
@click.option("--out", default=None)
@_guarded
def ood(
    demo: bool,
    data: Path | None,
    schema: Path | None,
    donor: Path | None,
    donor_schema: Path | None,
    shift: float | None,
    measures: str,
    seed: int,
    min_leaf: int,
    log_base: float,
    out: str | None,
) -> None:
    """Score out-of-distribution detection AUCs against a donor table."""
    tags = _parse_measures(measures)
    if demo == (data is not None):
        raise SchemaError("choose exactly one source: --demo or --data with --schema")
    if demo:
        dataset = make_separable_ordinal(seed=seed)
    else:
        if schema is None:
            raise SchemaError("--data needs --schema")
        dataset = load_dataset(data, DatasetSchema.from_json(schema))
    if (donor is None) == (shift is None):
        raise SchemaError("choose exactly one donor: --donor or --shift")
    if donor is not None:
        if donor_schema is None:
            raise SchemaError("--donor needs --donor-schema")
        donor_dataset = load_dataset(donor, DatasetSchema.from_json(donor_schema))
    else:
        donor_dataset = shift_numeric_columns(dataset, shift)
    aucs = ood_detection_aucs(
        dataset,
        donor_dataset,
        measures=tags,
        seed=seed,
        min_leaf=min_leaf,
        log_base=log_base,
    )
    rows = [
        [tag, kind, repr(aucs[(tag, kind)])]
        for tag in tags
        for kind in KINDS
    ]
    out_dir = _out_root(out)
    target = out_dir / "ood_auc.csv"
    _write_csv(target, ["measure", "kind", "auc"], rows)
    _emit(
        {
            "command": "ood",
            "dataset": dataset.name,
            "donor": donor_dataset.name if donor is not None else f"shift+{shift:g}",
            "eu_auc": {tag: aucs[(tag, "eu")] for tag in tags},
            "out": str(target),
        }
    )


@main.command()
@click.argument("summary", type=click.Path(path_type=Path))
@click.option("--pooling", type=click.Choice(["mcr", "mae", "both"]), default="both", show_default=True)
@click.option("--kind", type=click.Choice(list(KINDS)), default="tu", show_default=True)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--out", default=None)
@_guarded
def stats(summary: Path, pooling: str, kind: str, alpha: float, out: str | None) -> None:
    """Compare measures across datasets from a summary table."""
    if not summary.exists():
        raise SchemaError(f"summary file not found: {summary}")
    wanted_metrics = ("mcr", "mae") if pooling == "both" else (pooling,)
    cells: dict[tuple[str, str], float] = {}
    measures_seen: list[str] = []
    with summary.open(newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"dataset", "measure", "kind", "metric", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(
                f"{summary}: expected columns {sorted(required)}, got {reader.fieldnames}"
            )
        for row in reader:
            if row["kind"] != kind or row["metric"] not in wanted_metrics:
                continue
            unit = f"{row['dataset']}:{row['metric']}"
            cells[(unit, row["measure"])] = float(row["value"])
            if row["measure"] not in measures_seen:
                measures_seen.append(row["measure"])
    units = sorted({unit for unit, _ in cells})
    if len(units) < 2 or len(measures_seen) < 2:
        raise SchemaError(
            f"{summary}: need at least 2 rows and 2 measures for kind={kind}, "
            f"metrics={wanted_metrics}; found {len(units)} x {len(measures_seen)}"
        )
    values = np.empty((len(units), len(measures_seen)))
    for i, unit in enumerate(units):
        for j, tag in enumerate(measures_seen):
            if (unit, tag) not in cells:
                raise SchemaError(f"{summary}: missing value for {unit} / {tag}")
            values[i, j] = cells[(unit, tag)]
    matrix = ScoreMatrix(values, row_labels=tuple(units), col_labels=tuple(measures_seen))
    report = compare_treatments(matrix, alpha=alpha)
    out_dir = _out_root(out)
    report_path = out_dir / "report.json"
    ranks_path = out_dir / "ranks.csv"
    figure_path = out_dir / "cd.svg"
    rank_rows = [
        [tag, repr(report.avg_ranks[tag])]
        for tag in sorted(report.avg_ranks, key=lambda t: report.avg_ranks[t])
    ]
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json() + "\n")
    _write_csv(ranks_path, ["measure", "avg_rank"], rank_rows)
    save_rank_figure(report, figure_path, title=f"average ranks (kind={kind})")
    _emit(
        {
            "command": "stats",
            "friedman_p": report.friedman_p,
            "pairwise_run": report.pairwise_run,
            "units": len(units),
            "measures": measures_seen,
            "out": [str(report_path), str(ranks_path), str(figure_path)],
        }
    )


@main.command()
@click.option("--measure", "measure_tag", default="ent", show_default=True)
@click.option("--grid-step", default=0.01, show_default=True, type=float)
@click.option("--log-base", default=2.0, show_default=True, type=float)
@click.option("--out", default=None)
@_guarded
def heatmap(measure_tag: str, grid_step: float, log_base: float, out: str | None) -> None:
    """Sweep total uncertainty over the 3-class simplex and render it."""
    sweep = simplex_heatmap(measure_tag, grid_step=grid_step, log_base=log_base)
    out_dir = _out_root(out)
    csv_path = out_dir / "simplex.csv"
    svg_path = out_dir / "simplex.svg"
    rows = [
        [repr(float(p1)), repr(float(p2)), repr(float(p3)), repr(float(v))]
        for (p1, p2, p3), v in zip(sweep.points, sweep.values)
    ]
    _write_csv(csv_path, ["p_1", "p_2", "p_3", "tu"], rows)
    save_simplex_figure(sweep, svg_path, title=f"TU over the simplex ({sweep.measure.value})")
    top = int(np.argmax(sweep.values))
    _emit(
        {
            "command": "heatmap",
            "measure": sweep.measure.value,
            "cells": int(sweep.values.size),
            "max_value": float(sweep.values[top]),
            "max_point": [float(v) for v in sweep.points[top]],
            "out": [str(csv_path), str(svg_path)],
        }
    )


if __name__ == "__main__":
    main()
