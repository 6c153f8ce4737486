#!/usr/bin/env python3
"""Fetch public ordinal benchmark datasets and pin their provenance.

Downloads a small registry of ordinal classification datasets from
OpenML (by dataset name), converts each dense ARFF to the CSV + schema
pair that ``orduq.pipeline.load_dataset`` consumes, and records the
resolved dataset id, download URL and sha256 of the raw payload in
``checksums.json`` next to the output files.

Checksums are trust-on-first-use: the first fetch records them, later
fetches verify against the recorded value and refuse mismatches.  The
script needs network access and is not exercised by the test suite.

Usage:
    python scripts/fetch_datasets.py --list
    python scripts/fetch_datasets.py [NAME ...] [--out datasets]
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import urllib.request
from datetime import datetime, timezone
from pathlib import Path

API = "https://api.openml.org/api/v1/json"

# Ordinal benchmarks that recur across the ordinal-classification
# literature.  label=None means the last ARFF attribute is the target;
# label_order must be declared whenever the labels are words.
REGISTRY: dict[str, dict] = {
    "car": {
        "openml_name": "car",
        "label": None,
        "label_order": ["unacc", "acc", "good", "vgood"],
    },
    "era": {"openml_name": "ERA", "label": None, "label_order": None},
    "esl": {"openml_name": "ESL", "label": None, "label_order": None},
    "lev": {"openml_name": "LEV", "label": None, "label_order": None},
    "swd": {"openml_name": "SWD", "label": None, "label_order": None},
    "eucalyptus": {
        "openml_name": "eucalyptus",
        "label": None,
        "label_order": ["none", "low", "average", "good", "best"],
    },
    "tae": {"openml_name": "tae", "label": None, "label_order": None},
}


def _get_json(url: str) -> dict:
    with urllib.request.urlopen(url, timeout=60) as response:
        return json.loads(response.read().decode("utf-8"))


def _resolve(openml_name: str) -> tuple[int, str]:
    """Resolve a dataset name to (dataset id, download url) via OpenML."""
    listing = _get_json(f"{API}/data/list/data_name/{openml_name}/status/active/limit/1")
    entries = listing.get("data", {}).get("dataset", [])
    if not entries:
        raise RuntimeError(f"OpenML has no active dataset named {openml_name!r}")
    did = int(entries[0]["did"])
    description = _get_json(f"{API}/data/{did}")["data_set_description"]
    return did, description["url"]


def _parse_arff(text: str) -> tuple[list[str], list[str], list[list[str]]]:
    """Dense-ARFF parser: returns attribute names, kinds and data rows."""
    names: list[str] = []
    kinds: list[str] = []
    rows: list[list[str]] = []
    in_data = False
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            if line.startswith("{"):
                raise RuntimeError("sparse ARFF is not supported")
            rows.append(next(csv.reader(io.StringIO(line))))
            continue
        lowered = line.lower()
        if lowered.startswith("@attribute"):
            rest = line.split(None, 1)[1].strip()
            if rest.startswith(("'", '"')):
                quote = rest[0]
                end = rest.index(quote, 1)
                name, type_part = rest[1:end], rest[end + 1 :].strip()
            else:
                name, type_part = rest.split(None, 1)
            names.append(name)
            kind = "categorical" if type_part.lstrip().startswith("{") else "numeric"
            kinds.append(kind)
        elif lowered.startswith("@data"):
            in_data = True
    if not names or not rows:
        raise RuntimeError("ARFF payload has no attributes or no data")
    for i, row in enumerate(rows):
        if len(row) != len(names):
            raise RuntimeError(f"ARFF data row {i + 1} has {len(row)} fields, expected {len(names)}")
    return names, kinds, rows


def _load_checksums(path: Path) -> dict:
    if path.exists():
        return json.loads(path.read_text())
    return {}


def fetch(name: str, out_dir: Path, checksums: dict) -> None:
    entry = REGISTRY[name]
    did, url = _resolve(entry["openml_name"])
    print(f"{name}: OpenML id {did}, {url}")
    with urllib.request.urlopen(url, timeout=300) as response:
        payload = response.read()
    digest = hashlib.sha256(payload).hexdigest()

    known = checksums.get(name)
    if known is not None and known["sha256"] != digest:
        raise RuntimeError(
            f"{name}: sha256 mismatch; recorded {known['sha256']} but fetched {digest}. "
            "The upstream file changed - delete the checksum entry only after verifying why."
        )
    checksums[name] = {
        "openml_name": entry["openml_name"],
        "openml_id": did,
        "url": url,
        "sha256": digest,
        "fetched_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }

    columns, kinds, rows = _parse_arff(payload.decode("utf-8", errors="replace"))
    label = entry["label"] or columns[-1]
    if label not in columns:
        raise RuntimeError(f"{name}: declared label column {label!r} not in ARFF attributes")

    csv_path = out_dir / f"{name}.csv"
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if cell == "?" else cell for cell in row])

    schema = {
        "label": label,
        "columns": {c: k for c, k in zip(columns, kinds) if c != label},
    }
    if entry["label_order"] is not None:
        schema["label_order"] = entry["label_order"]
    (out_dir / f"{name}.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    print(f"{name}: wrote {csv_path} ({len(rows)} rows) and schema")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", help="registry names (default: all)")
    parser.add_argument("--out", default="datasets", help="output directory")
    parser.add_argument("--list", action="store_true", help="print the registry and exit")
    args = parser.parse_args(argv)

    if args.list:
        for name, entry in REGISTRY.items():
            order = entry["label_order"]
            print(f"{name}: OpenML {entry['openml_name']!r}"
                  + (f", label order {' < '.join(order)}" if order else ""))
        return 0

    names = args.names or list(REGISTRY)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        parser.error(f"unknown dataset name(s): {', '.join(unknown)}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    checksum_path = out_dir / "checksums.json"
    checksums = _load_checksums(checksum_path)
    failures = []
    for name in names:
        try:
            fetch(name, out_dir, checksums)
        except Exception as exc:  # keep going; report at the end
            failures.append((name, exc))
            print(f"{name}: FAILED ({exc})", file=sys.stderr)
        checksum_path.write_text(json.dumps(checksums, indent=2, sort_keys=True) + "\n")
    if failures:
        print(f"{len(failures)} of {len(names)} datasets failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
