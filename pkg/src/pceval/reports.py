"""Deterministic report serialization.

Report JSON contains only the evaluation inputs' consequences: rerunning the
same evaluation must produce byte-identical files. Anything run-dependent
(wall-clock timestamps) goes into a sidecar `<report>.meta.json` instead.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

from .set_metrics import MetricsReport

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version",
    "label",
    "jsd",
    "mmd_cd",
    "mmd_emd",
    "cov_cd",
    "cov_emd",
    "sample_size",
    "reference_size",
    "repetitions",
]


def report_to_dict(report: MetricsReport, label: str = "") -> dict:
    """Plain-dict form of a report, stable across runs."""
    return {
        "schema_version": SCHEMA_VERSION,
        "label": label,
        "metrics": {
            "jsd": report.jsd,
            "mmd_cd": report.mmd_cd,
            "mmd_emd": report.mmd_emd,
            "cov_cd": report.cov_cd,
            "cov_emd": report.cov_emd,
        },
        "per_repetition": [
            {
                "jsd": r.jsd,
                "mmd_cd": r.mmd_cd,
                "mmd_emd": r.mmd_emd,
                "cov_cd": r.cov_cd,
                "cov_emd": r.cov_emd,
            }
            for r in report.per_repetition
        ],
        "repetitions": report.repetitions,
        "sample_size": report.sample_size,
        "reference_size": report.reference_size,
        "config": report.config,
    }


def render_report_json(report: MetricsReport, label: str = "") -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report_to_dict(report, label), sort_keys=True, indent=2) + "\n"


def write_report_json(path, report: MetricsReport, label: str = "") -> None:
    """Write canonical report JSON plus a `<path>.meta.json` sidecar holding
    the wall-clock timestamp, keeping the report itself reproducible."""
    path = Path(path)
    path.write_text(render_report_json(report, label))
    meta = {"written_at_unix": time.time(), "report_file": path.name}
    path.with_name(path.name + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n"
    )


def append_report_csv(path, report: MetricsReport, label: str = "") -> None:
    """Append one flat metrics row, writing the header on first use."""
    path = Path(path)
    new_file = not path.exists()
    row = {
        "schema_version": SCHEMA_VERSION,
        "label": label,
        "jsd": repr(report.jsd),
        "mmd_cd": repr(report.mmd_cd),
        "mmd_emd": repr(report.mmd_emd),
        "cov_cd": repr(report.cov_cd),
        "cov_emd": repr(report.cov_emd),
        "sample_size": report.sample_size,
        "reference_size": report.reference_size,
        "repetitions": report.repetitions,
    }
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new_file:
            writer.writeheader()
        writer.writerow(row)
