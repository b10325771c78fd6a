"""
Report tables and files.

format_table() lays fold results out as one row per held-out dataset plus a
"Mean" row, one column per method, cells "ADE/FDE". write_report() stores

    table.txt     the table with its units line
    scenes.csv    every per-scene record (fold, method, ...)
    report.json   full MetricReports plus run metadata
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from evaluation.evaluate import MetricReport

logger = logging.getLogger("Report")

Reports = Dict[str, Dict[str, MetricReport]]


def format_table(reports: Reports, digits: int = 2) -> pd.DataFrame:
    """reports: fold -> method -> MetricReport."""
    methods = sorted({m for by_method in reports.values() for m in by_method})
    rows = {}
    for fold, by_method in reports.items():
        rows[fold] = {
            m: f"{by_method[m].ade:.{digits}f}/{by_method[m].fde:.{digits}f}" if m in by_method else "-"
            for m in methods
        }
    mean_row = {}
    for m in methods:
        scored = [by_method[m] for by_method in reports.values() if m in by_method]
        mean_ade = float(np.mean([r.ade for r in scored]))
        mean_fde = float(np.mean([r.fde for r in scored]))
        mean_row[m] = f"{mean_ade:.{digits}f}/{mean_fde:.{digits}f}"
    rows["Mean"] = mean_row
    table = pd.DataFrame.from_dict(rows, orient="index", columns=methods)
    table.index.name = "fold"
    return table


def table_units(reports: Reports) -> str:
    units = sorted({r.units for by_method in reports.values() for r in by_method.values()})
    return units[0] if len(units) == 1 else "mixed"


def scene_frame(reports: Reports) -> pd.DataFrame:
    rows = []
    for fold, by_method in reports.items():
        for method, report in by_method.items():
            for rec in report.records:
                rows.append({"fold": fold, "method": method, **rec.__dict__})
    return pd.DataFrame(rows)


def write_report(reports: Reports, out_dir, metadata: Optional[Dict[str, Any]] = None) -> Tuple[Path, Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = format_table(reports)
    units = table_units(reports)

    table_path = out_dir / "table.txt"
    table_path.write_text(f"ADE/FDE ({units})\n{table.to_string()}\n", encoding="utf-8")

    scenes_path = out_dir / "scenes.csv"
    scene_frame(reports).to_csv(scenes_path, index=False, float_format="%.10g")

    json_path = out_dir / "report.json"
    payload = {
        "units": units,
        "metadata": metadata or {},
        "folds": {
            fold: {method: r.to_dict() for method, r in by_method.items()}
            for fold, by_method in reports.items()
        },
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    logger.info("Report written to %s\n%s", out_dir, table.to_string())
    return table_path, scenes_path, json_path
