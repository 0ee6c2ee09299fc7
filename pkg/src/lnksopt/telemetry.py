"""Per-cycle optimizer telemetry shared by the reduced- and full-space drivers."""

from __future__ import annotations

import csv
import io
import math

from .cost_model import CostLedger

SCHEMA_VERSION = 1

COLUMNS = ("cycle", "grad_norm", "objective", "subiterations", "work",
           "work_residual", "work_assembly", "work_matvec", "work_solve", "work_precond",
           "alpha", "constraint_norm", "mu", "lz_norm", "merit_start", "merit", "ptc_norm", "note")


def make_row(ledger: CostLedger, **values):
    """Row with every column present; missing numeric entries are NaN."""
    row = {c: math.nan for c in COLUMNS}
    row["note"] = ""
    row["work"] = ledger.total_work
    for k, v in ledger.work_by_category().items():
        row[f"work_{k}"] = v
    for k, v in values.items():
        if k not in row:
            raise KeyError(f"unknown telemetry column {k!r}")
        row[k] = v
    return row


def format_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows, handle=None):
    """Write rows (header first) to ``handle``; returns the text if no handle."""
    out = handle or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([format_value(r[c]) for c in COLUMNS])
    if handle is None:
        return out.getvalue()
    return None
