"""Readers for the experiment harness's CSV logs and run manifests.

Metric CSVs carry a ``# schema=N`` comment line followed by a fixed header;
only schema version 1 is accepted.  Manifests are JSON-lines records with at
least ``id``, ``csv``, and ``status`` fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXPECTED_SCHEMA = 1
COLUMNS = ("k", "f_gap", "grad_norm", "consensus", "ds",
           "samples_cum", "comm_rounds_cum", "wall_ms")
METRICS = ("f_gap", "grad_norm", "consensus", "ds")
X_AXES = {"iteration": "k", "samples_cum": "samples_cum",
          "comm_rounds_cum": "comm_rounds_cum"}


class SchemaError(ValueError):
    """A CSV file does not carry the expected schema version."""


@dataclass(frozen=True)
class RunData:
    """One run: its manifest id, display label, and column arrays."""

    run_id: str
    label: str
    columns: dict

    def x(self, axis: str) -> np.ndarray:
        return self.columns[X_AXES[axis]]

    def metric(self, name: str) -> np.ndarray:
        return self.columns[name]


def read_metrics(path) -> dict:
    """Parse one metrics CSV into named float arrays.

    Raises:
        SchemaError: when the schema comment is missing or has the wrong
            version, naming the file and the expected schema.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaError(f"{path}: missing schema comment; expected schema={EXPECTED_SCHEMA}")
    try:
        version = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise SchemaError(f"{path}: unreadable schema comment; expected schema={EXPECTED_SCHEMA}")
    if version != EXPECTED_SCHEMA:
        raise SchemaError(f"{path}: schema={version}, expected schema={EXPECTED_SCHEMA}")
    if len(lines) < 2 or lines[1].split(",") != list(COLUMNS):
        raise SchemaError(f"{path}: header does not match schema={EXPECTED_SCHEMA}")
    rows = [line.split(",") for line in lines[2:] if line.strip()]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    table = np.array([[float(v) for v in row] for row in rows])
    return {name: table[:, i] for i, name in enumerate(COLUMNS)}


def read_manifest(path) -> list[dict]:
    """Parse a JSON-lines manifest; returns the records in file order."""
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from None
    return records


def load_runs(manifest_path, run_ids: list[str] | None = None) -> list[RunData]:
    """Load the successful runs named by a manifest (all of them by default).

    CSV paths are resolved relative to the manifest's directory.  Failed
    runs are skipped unless explicitly requested, in which case they raise.
    """
    manifest_path = Path(manifest_path)
    records = read_manifest(manifest_path)
    by_id = {r["id"]: r for r in records}
    if run_ids is None:
        selected = [r for r in records if r.get("status") == "ok"]
    else:
        missing = [rid for rid in run_ids if rid not in by_id]
        if missing:
            known = ", ".join(sorted(by_id))
            raise ValueError(f"unknown run ids {missing}; manifest has: {known}")
        selected = [by_id[rid] for rid in run_ids]
        for r in selected:
            if r.get("status") != "ok":
                raise ValueError(f"run {r['id']!r} did not succeed: {r.get('error')}")
    if not selected:
        raise ValueError(f"{manifest_path}: no successful runs to plot")
    runs = []
    for record in selected:
        csv_path = Path(record["csv"])
        if not csv_path.is_absolute():
            csv_path = manifest_path.parent / csv_path
        if not csv_path.exists():
            raise FileNotFoundError(f"{manifest_path}: series file {csv_path} does not exist")
        label = record.get("label", record["id"])
        runs.append(RunData(run_id=record["id"], label=label, columns=read_metrics(csv_path)))
    return runs
