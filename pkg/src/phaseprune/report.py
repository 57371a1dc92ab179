"""CSV/JSON emission for experiment outputs."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

REPORT_COLUMNS = (
    "stage",
    "alpha",
    "ps_sparsity_pct",
    "mean_phase_rad",
    "accuracy",
    "epochs_finetuned",
    "wall_time_s",
)
MC_COLUMNS = ("sigma_ps", "mode", "mean_acc", "std_acc", "n")
BMA_COLUMNS = ("dim", "s_w_pct", "weight_sparsity_pct", "ps_sparsity_pct")
HISTORY_COLUMNS = ("epoch", "loss", "accuracy")


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows) -> None:
    atomic_write_text(path, csv_text(columns, rows))


def write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def report_rows(reports, timing: bool = False) -> list[dict]:
    """Report dicts; ``wall_time_s`` is blanked unless ``timing`` so reruns stay byte-identical."""
    rows = []
    for r in reports:
        row = r.as_dict()
        if not timing:
            row["wall_time_s"] = None
        rows.append(row)
    return rows


def phase_histogram(phase_sets: dict, bins: int = 64) -> list[dict]:
    """Counts of |phase| over [0, pi] for each named phase vector."""
    edges = np.linspace(0.0, np.pi, bins + 1)
    counts = {name: np.histogram(np.abs(p), bins=edges)[0] for name, p in phase_sets.items()}
    rows = []
    for i in range(bins):
        row = {"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1])}
        row.update({name: int(c[i]) for name, c in counts.items()})
        rows.append(row)
    return rows
