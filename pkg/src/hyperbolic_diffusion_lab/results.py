# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Result files: CSV series and tables, JSON summaries, the run manifest, and
the comparison used for golden files and FD-vs-MC checks.

Floats are written with repr precision so every file reparses to the same
values. Nothing time-dependent goes into result files; wall time lives in
the manifest only.
"""

import csv
import json
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass

from .errors import ContractViolation, SchemaMismatchError

SERIES_COLUMNS = ["tau", "x", "u"]
DIAGNOSTIC_COLUMNS = ["tau", "mass", "mean", "variance", "median", "negative_mass_fraction"]


def _cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)) or hasattr(value, "dtype"):
        return str(float(value))
    return str(value)


def _ensure_parent(path):
    dirpath = os.path.dirname(str(path))
    if dirpath:
        os.makedirs(dirpath, exist_ok=True)


def _write_rows(path, columns, rows):
    _ensure_parent(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def companion_path(path, suffix):
    """results/run.csv + "diagnostics" -> results/run.diagnostics.csv"""
    stem, ext = os.path.splitext(str(path))
    return f"{stem}.{suffix}{ext or '.csv'}"


def manifest_path(path):
    return f"{path}.manifest.json"


def write_series_csv(path, series):
    x = series.grid.coordinates()
    rows = ((tau, xi, ui) for tau, density in zip(series.times, series.densities)
            for xi, ui in zip(x, density.values))
    _write_rows(path, SERIES_COLUMNS, rows)


def write_diagnostics_csv(path, series):
    rows = ([d.as_dict()[c] for c in DIAGNOSTIC_COLUMNS] for d in series.diagnostics)
    _write_rows(path, DIAGNOSTIC_COLUMNS, rows)


def write_table_csv(path, columns, rows):
    _write_rows(path, list(columns), rows)


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if hasattr(value, "item"):
        return to_jsonable(value.item())
    return float(value)


def write_summary(path, summary):
    _ensure_parent(path)
    with open(path, "w") as f:
        json.dump(to_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")


def write_manifest(path, config, version, wall_time, outputs, passed, failures):
    manifest = {
        "tool": "hyperbolic-diffusion-lab",
        "version": version,
        "config_file": config.source,
        "config": config.as_dict(),
        "outputs": list(outputs),
        "passed": passed,
        "failures": list(failures),
        "wall_time_seconds": wall_time,
    }
    write_summary(manifest_path(path), manifest)


def write_result(result, config, path):
    """Write the result files for one run; returns the paths written."""
    written = []
    if config.output.format.value == "summary":
        write_summary(path, result.summary)
        written.append(str(path))
    elif result.series is not None:
        write_series_csv(path, result.series)
        diagnostics = companion_path(path, "diagnostics")
        write_diagnostics_csv(diagnostics, result.series)
        written += [str(path), diagnostics]
        for name, series in sorted(result.companions.items()):
            companion = companion_path(path, name)
            write_series_csv(companion, series)
            written.append(companion)
    elif result.table is not None:
        columns, rows = result.table
        write_table_csv(path, columns, rows)
        written.append(str(path))
    else:
        write_summary(path, result.summary)
        written.append(str(path))
    for name in written:
        logging.info(f"[Results] wrote {name}")
    return written


def read_csv(path):
    """(columns, rows) with every numeric cell parsed back to float."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            columns = next(reader)
        except StopIteration:
            raise ContractViolation(f"{path} is empty") from None
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return columns, rows


def read_summary(path):
    with open(path) as f:
        return json.load(f)


@dataclass(frozen=True)
class CompareResult:
    passed: bool
    metric: str
    distance: float
    tolerance: float
    detail: str = ""

    def as_dict(self):
        return {"passed": self.passed, "metric": self.metric, "distance": self.distance,
                "tolerance": self.tolerance, "detail": self.detail}


def _series_l1(columns, rows_a, rows_b):
    t, x, u = (columns.index(c) for c in SERIES_COLUMNS)

    def by_tau(rows):
        groups = defaultdict(list)
        for row in rows:
            groups[row[t]].append((row[x], row[u]))
        return {tau: sorted(points) for tau, points in groups.items()}

    a, b = by_tau(rows_a), by_tau(rows_b)
    common = sorted(set(a) & set(b))
    if not common:
        return math.inf, "no common tau values"
    worst, worst_tau = 0.0, common[0]
    for tau in common:
        pa, pb = a[tau], b[tau]
        if [p[0] for p in pa] != [p[0] for p in pb]:
            return math.inf, f"x coordinates differ at tau={tau}"
        xs = [p[0] for p in pa]
        dx = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
        distance = dx * sum(abs(ua - ub) for (_, ua), (_, ub) in zip(pa, pb))
        if distance > worst:
            worst, worst_tau = distance, tau
    return worst, f"largest L1 distance at tau={worst_tau}"


def _max_abs_rows(rows_a, rows_b):
    if len(rows_a) != len(rows_b):
        return math.inf, f"row counts differ ({len(rows_a)} vs {len(rows_b)})"
    worst = 0.0
    for ra, rb in zip(rows_a, rows_b):
        for va, vb in zip(ra, rb):
            if isinstance(va, float) and isinstance(vb, float):
                if math.isnan(va) and math.isnan(vb):
                    continue
                worst = max(worst, abs(va - vb))
            elif va != vb:
                return math.inf, f"non-numeric cells differ: {va!r} vs {vb!r}"
    return worst, ""


def _flatten(value, prefix=""):
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            out.update(_flatten(v, f"{prefix}{k}."))
        return out
    if isinstance(value, list):
        out = {}
        for i, v in enumerate(value):
            out.update(_flatten(v, f"{prefix}{i}."))
        return out
    return {prefix.rstrip("."): value}


def _compare_summaries(a, b):
    fa, fb = _flatten(a), _flatten(b)
    if set(fa) != set(fb):
        raise SchemaMismatchError(set(fa) - set(fb), set(fb) - set(fa))
    worst = 0.0
    for key in sorted(fa):
        va, vb = fa[key], fb[key]
        numeric = (isinstance(va, (int, float)) and isinstance(vb, (int, float))
                   and not isinstance(va, bool) and not isinstance(vb, bool))
        if numeric:
            if math.isnan(va) and math.isnan(vb):
                continue
            worst = max(worst, abs(va - vb))
        elif va != vb:
            return math.inf, f"'{key}' differs: {va!r} vs {vb!r}"
    return worst, ""


def compare(file_a, file_b, tolerance):
    """
    Fieldwise comparison of two result files of the same kind.

    Series CSVs (tau, x, u) compare by L1 distance per common tau; other
    CSVs and JSON summaries by the largest absolute difference.
    """
    if str(file_a).endswith(".json") or str(file_b).endswith(".json"):
        distance, detail = _compare_summaries(read_summary(file_a), read_summary(file_b))
        metric = "max_abs"
    else:
        cols_a, rows_a = read_csv(file_a)
        cols_b, rows_b = read_csv(file_b)
        if set(cols_a) != set(cols_b):
            raise SchemaMismatchError(set(cols_a) - set(cols_b), set(cols_b) - set(cols_a))
        if cols_a != cols_b:
            order = [cols_b.index(c) for c in cols_a]
            rows_b = [[row[i] for i in order] for row in rows_b]
        if set(SERIES_COLUMNS) <= set(cols_a):
            distance, detail = _series_l1(cols_a, rows_a, rows_b)
            metric = "l1"
        else:
            distance, detail = _max_abs_rows(rows_a, rows_b)
            metric = "max_abs"
    passed = distance <= tolerance
    logging.info(f"[Results] compare {file_a} vs {file_b}: {metric}={distance:.6g} "
                 f"tolerance={tolerance:g} -> {'pass' if passed else 'FAIL'}")
    return CompareResult(passed, metric, distance, tolerance, detail)
