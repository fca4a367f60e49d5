"""Report files: JSON lines with provenance plus a flat CSV."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from pydantic import BaseModel, Field

from config.environments.base import BaseSettings
from config.settings import config_hash, resolved_config
from evaluation.runner import EvalResult
from evaluation.sweep import SweepReport, snr_label
from evaluation.turns import FTOHistogram

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("model", "condition", "snr", "wer", "response_ratio", "fto_mae", "median_fto", "n")


class ReportRow(BaseModel):
    """One (model, condition, SNR) result."""

    model: str
    condition: str
    snr: str = "inf"
    task: str = ""
    modality: str = "av"
    wer: Optional[float] = None
    response_ratio: Optional[float] = None
    fto_mae: Optional[float] = None
    median_fto: Optional[float] = None
    pickup_ratio: Optional[float] = None
    perplexity: Optional[float] = None
    n: int = 0
    config_hash: str = ""
    seed: int = 0
    extra: Dict[str, Any] = Field(default_factory=dict)


class ReportHeader(BaseModel):
    """First line of every report: what produced it."""

    kind: str
    config_hash: str
    seed: int
    config: Dict[str, Any]


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def row_from_result(name: str, result: EvalResult, settings: BaseSettings, seed: int) -> ReportRow:
    turns = result.turns
    return ReportRow(
        model=name,
        condition=result.condition,
        snr=snr_label(result.snr_db),
        task=result.task.value,
        modality=result.modality.value,
        wer=_finite(result.wer),
        response_ratio=_finite(turns.response_ratio) if turns else None,
        fto_mae=_finite(turns.fto_mae) if turns else None,
        median_fto=_finite(turns.median_fto) if turns else None,
        pickup_ratio=_finite(result.pickup),
        perplexity=_finite(result.perplexity),
        n=result.n,
        config_hash=config_hash(settings),
        seed=seed,
        extra={"n_no_response": turns.n_no_response} if turns else {},
    )


def rows_from_sweep(report: SweepReport, settings: BaseSettings) -> List[ReportRow]:
    return [row_from_result(cell.model, cell.result, settings, report.seed) for cell in report.cells]


def write_report(out_dir: Path, name: str, rows: Iterable[ReportRow], settings: BaseSettings, seed: int, kind: str = "eval") -> Dict[str, Path]:
    """Write ``<name>.jsonl`` (header line, then rows) and ``<name>.csv``.

    Returns:
        Paths of the two files
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    header = ReportHeader(kind=kind, config_hash=config_hash(settings), seed=seed, config=resolved_config(settings))

    jsonl_path = out_dir / f"{name}.jsonl"
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header.model_dump(mode="json"), sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row.model_dump(mode="json"), sort_keys=True) + "\n")

    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            data = row.model_dump()
            writer.writerow(["" if data[c] is None else data[c] for c in CSV_COLUMNS])

    logger.info(f"Wrote {len(rows)} report rows to {jsonl_path} and {csv_path}")
    return {"jsonl": jsonl_path, "csv": csv_path}


def read_report(path: Path) -> tuple:
    """(header, rows) of a JSON-lines report."""
    lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    header = ReportHeader.model_validate_json(lines[0])
    return header, [ReportRow.model_validate_json(line) for line in lines[1:]]


def write_histogram(path: Path, histogram: FTOHistogram) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("bin", "lo", "hi", "count"))
        for row in histogram.rows():
            writer.writerow((row["bin"], row["lo"], "inf" if math.isinf(row["hi"]) else row["hi"], row["count"]))
    return path


def write_cases(path: Path, result: EvalResult) -> Path:
    """Per-case details (edit counts, FTO records, preferences) as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for case in result.cases:
            fh.write(json.dumps(case.to_dict(), sort_keys=True) + "\n")
    return path
