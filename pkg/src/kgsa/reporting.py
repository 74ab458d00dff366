"""Serialization of sensitivity reports to JSON, CSV tables and plot data.

The JSON file is the complete record and round-trips losslessly;
`csv-tables` writes one file per result table; `plot-data` writes each ISF
grid as (x, gamma_norm, gamma_dist) columns for external plotting.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .analysis import SensitivityReport
from .errors import ConfigError, DataError

__all__ = ["REPORT_FORMATS", "report_to_json", "emit_report", "load_report"]

REPORT_FORMATS = ("json", "csv-tables", "plot-data")


def report_to_json(report: SensitivityReport) -> str:
    """Deterministic JSON rendering (sorted keys, stable float repr)."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)


def load_report(path) -> SensitivityReport:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    with path.open() as fh:
        return SensitivityReport.from_dict(json.load(fh))


def _write_indices_csv(report: SensitivityReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "estimator", "replicates", "mean", "median", "min", "max"])
        for entry in report.indices:
            writer.writerow(
                [
                    " ".join(str(i) for i in entry["subset"]),
                    entry["estimator"],
                    entry["replicates"],
                    repr(entry["mean"]),
                    repr(entry["median"]),
                    repr(entry["min"]),
                    repr(entry["max"]),
                ]
            )


def _write_ols_csv(report: SensitivityReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "conditional_value", "cumulative"])
        for label, step, cum in zip(report.ols["order"], report.ols["step_values"], report.ols["cumulative"]):
            writer.writerow([label, repr(step), repr(cum)])


def _write_shapley_csv(report: SensitivityReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "shapley"])
        for label in report.shapley["universe"]:
            writer.writerow([label, repr(report.shapley["values"][str(label)])])
        writer.writerow(["total", repr(report.shapley["total"])])


def _write_anova_csv(report: SensitivityReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "effect"])
        for key, value in report.anova["effects"].items():
            writer.writerow([key.replace(",", " "), repr(value)])
        writer.writerow(["total", repr(report.anova["total"])])


def _write_isf_csv(section: dict, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "gamma_norm", "gamma_dist", "inside_hull"])
        for x, gn, gd, ins in zip(
            section["grid"], section["gamma_norm_mean"], section["gamma_dist_mean"], section["inside_hull"]
        ):
            writer.writerow([repr(x), repr(gn), repr(gd), int(ins)])


def emit_report(report: SensitivityReport, out_dir, formats=("json",)) -> list:
    """Write the requested formats under `out_dir`; returns written paths."""
    if isinstance(formats, str):
        formats = (formats,)
    for fmt in formats:
        if fmt not in REPORT_FORMATS:
            raise ConfigError(f"unknown report format {fmt!r}; choose from {', '.join(REPORT_FORMATS)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(report_to_json(report) + "\n")
        written.append(path)
    if "csv-tables" in formats:
        path = out_dir / "indices.csv"
        _write_indices_csv(report, path)
        written.append(path)
        if report.ols is not None:
            path = out_dir / "ols.csv"
            _write_ols_csv(report, path)
            written.append(path)
        if report.shapley is not None:
            path = out_dir / "shapley.csv"
            _write_shapley_csv(report, path)
            written.append(path)
        if report.anova is not None:
            path = out_dir / "anova.csv"
            _write_anova_csv(report, path)
            written.append(path)
    if "plot-data" in formats:
        for section in report.isf:
            name = "isf_x" + "_".join(str(i) for i in section["subset"]) + ".csv"
            path = out_dir / name
            _write_isf_csv(section, path)
            written.append(path)
    return written
