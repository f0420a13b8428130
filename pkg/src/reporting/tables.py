"""
CSV tables for external plotting.

Every file starts with a schema comment line, then a header row:

    # schema: contact-rows/1
    t,node,part,...

Comma separated, '.' decimal, LF line endings. Floats use a fixed '.12e'
format so identical runs give byte-identical files.

contact-rows carries one row per time node and free contact node: every
gamma3 and gamma4 node except the clamped corner, whose displacement is
fixed at zero. A node on both parts appears once with part "gamma3+gamma4".
"""

import csv
import logging
from dataclasses import fields
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..contact.report import ComplementarityReport, ContactRow

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_PREFIX = "# schema: "

CONTACT_COLUMNS = [f.name for f in fields(ContactRow)]
AUDIT_COLUMNS = ["name", "claimed", "estimate", "passed", "samples", "seed", "statement"]
NODE_COLUMNS = ["node", "t", "iterations", "inner_iterations", "residual", "step"]
REFINEMENT_COLUMNS = ["N", "difference_to_finer", "error_vs_finest", "ratio"]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    return str(value)


def schema_tag(name: str) -> str:
    return f"{name}/{SCHEMA_VERSION}"


def write_table(
    path: Union[str, Path],
    schema: str,
    columns: Sequence[str],
    rows: Iterable[Dict],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        f.write(f"{SCHEMA_PREFIX}{schema_tag(schema)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def read_table(path: Union[str, Path]) -> Tuple[str, List[Dict[str, str]]]:
    """Schema tag and rows as strings."""
    with open(path, newline="") as f:
        first = f.readline().rstrip("\n")
        if not first.startswith(SCHEMA_PREFIX):
            raise ValueError(f"{path} has no schema line")
        rows = list(csv.DictReader(f))
    return first[len(SCHEMA_PREFIX):], rows


def write_contact_rows(path, report: ComplementarityReport) -> Path:
    """One row per (time node, free gamma3 or gamma4 node), time-major."""
    return write_table(path, "contact-rows", CONTACT_COLUMNS, (r.to_dict() for r in report.rows))


def write_audit_rows(path, audit_report) -> Path:
    return write_table(path, "audit-entries", AUDIT_COLUMNS, audit_report.rows())


def write_node_stats(path, evolution_report) -> Path:
    rows = ({**vars(s)} for s in evolution_report.node_stats)
    return write_table(path, "node-stats", NODE_COLUMNS, rows)


def write_refinement(path, steps: Sequence[int], differences: Sequence[float], errors: Sequence[float], ratios: Sequence[float]) -> Path:
    rows = []
    for k, n in enumerate(steps):
        rows.append(
            {
                "N": n,
                "difference_to_finer": differences[k] if k < len(differences) else None,
                "error_vs_finest": errors[k] if k < len(errors) else None,
                "ratio": ratios[k] if k < len(ratios) else None,
            }
        )
    return write_table(path, "refinement", REFINEMENT_COLUMNS, rows)
