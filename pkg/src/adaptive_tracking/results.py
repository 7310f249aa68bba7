"""CSV emission: run logs, metric summaries and plot data.

Floats are written with ``repr`` so a rerun with the same configuration and
seed produces byte-identical files.  Undefined values are written as "none".
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .harness import COLUMNS, SCHEMA_VERSION, RunRecord
from .metrics import MetricReport, relative_error

SUMMARY_COLUMNS = ("schema_version", "scenario", "mode", "t_r", "d_m", "d_mr", "d_fp",
                   "e_rmsv", "e_rmsq", "t_re", "e_rmser", "rows", "diverged")


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def parse_value(s: str):
    if s == "none":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence],
                comments: Sequence[str] = ()) -> Path:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def run_log_name(scenario: str, mode: str) -> str:
    return f"runlog_{scenario}_{mode}.csv"


def write_run_log(rec: RunRecord, path) -> Path:
    rows = zip(*(rec.columns[c] for c in COLUMNS))
    return _write_rows(Path(path), COLUMNS, rows)


def read_csv(path) -> Tuple[List[str], List[List]]:
    """Header and parsed rows of a CSV written by this module ('#' lines skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [[parse_value(v) for v in row] for row in reader]


def read_run_log(path) -> dict:
    header, rows = read_csv(path)
    if tuple(header) != COLUMNS:
        raise ValueError(f"{path}: unexpected run-log columns")
    return {c: [r[i] for r in rows] for i, c in enumerate(header)}


def summary_row(rec: RunRecord, report: MetricReport) -> list:
    d = report.to_dict()
    return [SCHEMA_VERSION, rec.scenario, rec.mode, d["t_r"], d["d_m"], d["d_mr"], d["d_fp"],
            d["e_rmsv"], d["e_rmsq"], d["t_re"], d["e_rmser"], len(rec), rec.diverged]


def write_summary(rows: Iterable[Sequence], path, header_lines: Sequence[str] = ()) -> Path:
    return _write_rows(Path(path), SUMMARY_COLUMNS, rows, header_lines)


def write_plot_data(scenario: str, records: Mapping[str, RunRecord], out_dir) -> List[Path]:
    """Distance, path and relative-error series for one scenario, long format."""
    out_dir = Path(out_dir)
    dist, path_xy, rel = [], [], []
    for mode, rec in records.items():
        t = rec.columns["time"]
        for k in range(len(rec)):
            dist.append((SCHEMA_VERSION, mode, t[k], rec.columns["distance"][k]))
            path_xy.append((SCHEMA_VERSION, mode, t[k], rec.columns["x"][k], rec.columns["y"][k],
                            rec.columns["x_ref"][k], rec.columns["y_ref"][k]))
        if rec.has_estimator and rec.true_profile_known:
            r_v = relative_error(rec.array("dv_hat"), rec.array("dv_true"))
            r_q = relative_error(rec.array("dq_hat"), rec.array("dq_true"))
            for k in range(len(rec)):
                rel.append((SCHEMA_VERSION, mode, t[k], float(r_v[k]), float(r_q[k])))
    return [
        _write_rows(out_dir / f"plot_distance_{scenario}.csv",
                    ("schema_version", "mode", "time", "distance"), dist),
        _write_rows(out_dir / f"plot_path_{scenario}.csv",
                    ("schema_version", "mode", "time", "x", "y", "x_ref", "y_ref"), path_xy),
        _write_rows(out_dir / f"plot_relerr_{scenario}.csv",
                    ("schema_version", "mode", "time", "rel_err_v", "rel_err_q"), rel),
    ]
