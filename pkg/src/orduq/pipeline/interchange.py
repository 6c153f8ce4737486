"""Import/export of ensemble predictions for external model bridges.

File layout (CSV or JSON): one row per (instance, member) with columns
``instance_id, member_id, true_label, p_1..p_K``.  K and M are fixed per
file.  Probabilities are written with ``repr`` so a round trip through
text is lossless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import SchemaError
from ..evaluation import PredictionRecord

__all__ = ["export_predictions", "import_predictions"]

_FIXED_FIELDS = ("instance_id", "member_id", "true_label")
# Row sums may drift from 1 by this much before the row is rejected.
ROW_SUM_TOL = 1e-6


def _prob_fields(k_count: int) -> list[str]:
    return [f"p_{k}" for k in range(1, k_count + 1)]


def export_predictions(records: Sequence[PredictionRecord], path: str | Path) -> Path:
    """Write records to ``path`` as CSV or JSON depending on the suffix."""
    path = Path(path)
    if not records:
        raise SchemaError("cannot export an empty record sequence")
    k_count = records[0].k_count
    rows = []
    for record in records:
        for member_id, member in enumerate(record.members.matrix):
            row = {
                "instance_id": record.instance_id,
                "member_id": member_id,
                "true_label": record.true_label,
            }
            row.update(zip(_prob_fields(k_count), (float(v) for v in member)))
            rows.append(row)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        path.write_text(json.dumps(rows, indent=0) + "\n")
    elif path.suffix == ".csv":
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            header = list(_FIXED_FIELDS) + _prob_fields(k_count)
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [row["instance_id"], row["member_id"], row["true_label"]]
                    + [repr(row[f]) for f in _prob_fields(k_count)]
                )
    else:
        raise SchemaError(f"unsupported export format {path.suffix!r} (use .csv or .json)")
    return path


def _parse_id(value: object) -> int | str:
    text = str(value)
    try:
        return int(text)
    except ValueError:
        return text


def _rows_from_csv(path: Path) -> tuple[list[str], list[dict]]:
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [dict(zip(header, row)) for row in reader]
    return header, rows


def _rows_from_json(path: Path) -> tuple[list[str], list[dict]]:
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw or not all(isinstance(r, dict) for r in raw):
        raise SchemaError(f"{path}: expected a non-empty JSON array of row objects")
    return list(raw[0].keys()), raw


def import_predictions(path: str | Path) -> list[PredictionRecord]:
    """Read prediction records from a CSV or JSON interchange file.

    Rows whose probabilities sum to 1 within ``ROW_SUM_TOL`` are
    renormalized; anything further off is rejected with its row number.
    Every instance must carry the same member count.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"prediction file not found: {path}")
    if path.suffix == ".json":
        header, rows = _rows_from_json(path)
    else:
        header, rows = _rows_from_csv(path)
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    prob_fields = [c for c in header if c.startswith("p_")]
    expected = list(_FIXED_FIELDS) + _prob_fields(len(prob_fields))
    if sorted(header) != sorted(expected) or len(prob_fields) < 2:
        raise SchemaError(
            f"{path}: header must be instance_id, member_id, true_label, "
            f"p_1..p_K with K >= 2; got {header}"
        )
    k_count = len(prob_fields)

    by_instance: dict[int | str, dict] = {}
    for index, row in enumerate(rows, start=2 if path.suffix != ".json" else 1):
        try:
            probs = np.array([float(row[f]) for f in _prob_fields(k_count)])
            label = int(row["true_label"])
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"{path} row {index}: unparseable cell ({exc})") from exc
        if np.any(probs < 0):
            raise SchemaError(f"{path} row {index}: negative probability")
        total = probs.sum()
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise SchemaError(
                f"{path} row {index}: probabilities sum to {total:.8f}, "
                f"outside 1 +/- {ROW_SUM_TOL}"
            )
        if not 1 <= label <= k_count:
            raise SchemaError(f"{path} row {index}: label {label} outside 1..{k_count}")
        instance_id = _parse_id(row["instance_id"])
        entry = by_instance.setdefault(instance_id, {"label": label, "members": []})
        if entry["label"] != label:
            raise SchemaError(
                f"{path} row {index}: instance {instance_id!r} has conflicting labels"
            )
        entry["members"].append(probs / total)

    counts = {len(e["members"]) for e in by_instance.values()}
    if len(counts) != 1:
        raise SchemaError(
            f"{path}: member count varies across instances ({sorted(counts)}); "
            "the file format requires a fixed M"
        )
    return [
        PredictionRecord.from_members(
            instance_id=instance_id,
            true_label=entry["label"],
            members=np.stack(entry["members"]),
        )
        for instance_id, entry in by_instance.items()
    ]
