"""
JSON, CSV and PPM outputs of the evaluation harness.

JSON files keep full per-episode detail; CSV files hold the aggregate
tables. Every row and document carries the config hash and master seed.
"""
import csv
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from model import AblationTable, BenchmarkDocument, EncoderAnalysisReport, RolloutReport, RunStamp, TimingTable
from policy import Observation
from utils import save_ppm

logger = logging.getLogger(__name__)

BENCHMARK_COLUMNS = ["condition", "n", "success_rate", "mean_score", "mean_attack_ms", "config_hash", "seed"]
ABLATION_COLUMNS = ["condition", "sigma", "steps", "alpha", "success_rate", "mean_score", "sign_test_p",
                    "config_hash", "seed"]
TIMING_COLUMNS = ["method", "mode", "repetitions", "median_s", "p95_s", "cpu", "threads", "config_hash", "seed"]
ENCODER_COLUMNS = ["image_index", "condition", "distance", "config_hash", "seed"]


def _stamp_fields(stamp: Optional[RunStamp]) -> dict:
    return {"config_hash": stamp.config_hash if stamp else "", "seed": stamp.seed if stamp else ""}


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\r\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def _write_json(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def benchmark_rows(reports: Sequence[RolloutReport]) -> list[dict]:
    return [
        {
            "condition": r.condition,
            "n": len(r.episodes),
            "success_rate": repr(r.success_rate),
            "mean_score": repr(r.mean_score),
            "mean_attack_ms": repr(r.mean_attack_ms),
            **_stamp_fields(r.stamp),
        }
        for r in reports
    ]


def emit_reports(reports: Sequence[RolloutReport], report_dir: Union[str, Path], name: str = "benchmark",
                 formats: Sequence[str] = ("json", "csv"), stamp: Optional[RunStamp] = None) -> list[Path]:
    """
    Write `<name>.json` and/or `<name>.csv` under `report_dir`.

    An empty report list still produces valid files. Floats are written at
    full precision, so re-aggregating the JSON reproduces the CSV exactly.
    """
    report_dir = Path(report_dir)
    unknown = set(formats) - {"json", "csv"}
    if unknown:
        raise ValueError(f"Unknown report formats: {sorted(unknown)}")
    if stamp is None and reports:
        stamp = reports[0].stamp
    written = []
    if "json" in formats:
        document = BenchmarkDocument(stamp=stamp, reports=list(reports))
        written.append(_write_json(report_dir / f"{name}.json", document.model_dump_json(indent=2)))
    if "csv" in formats:
        written.append(_write_csv(report_dir / f"{name}.csv", BENCHMARK_COLUMNS, benchmark_rows(reports)))
    for path in written:
        logger.info(f"Wrote {path}")
    return written


def load_reports(path: Union[str, Path]) -> list[RolloutReport]:
    return BenchmarkDocument.model_validate_json(Path(path).read_text(encoding="utf-8")).reports


def emit_ablation(table: AblationTable, report_dir: Union[str, Path]) -> list[Path]:
    report_dir = Path(report_dir)
    name = f"ablation_{table.axis}"
    rows = [
        {
            "condition": table.condition,
            "sigma": repr(row.sigma),
            "steps": row.steps,
            "alpha": repr(row.alpha),
            "success_rate": repr(row.success_rate),
            "mean_score": repr(row.mean_score),
            "sign_test_p": "" if row.sign_test_p is None else repr(row.sign_test_p),
            **_stamp_fields(table.stamp),
        }
        for row in table.rows
    ]
    written = [
        _write_json(report_dir / f"{name}.json", table.model_dump_json(indent=2)),
        _write_csv(report_dir / f"{name}.csv", ABLATION_COLUMNS, rows),
    ]
    logger.info(f"Wrote {written[1]}")
    return written


def emit_timing(table: TimingTable, report_dir: Union[str, Path]) -> list[Path]:
    report_dir = Path(report_dir)
    rows = [
        {
            "method": row.method,
            "mode": row.mode.value,
            "repetitions": row.repetitions,
            "median_s": repr(row.median_s),
            "p95_s": repr(row.p95_s),
            "cpu": table.cpu,
            "threads": table.threads,
            **_stamp_fields(table.stamp),
        }
        for row in table.rows
    ]
    written = [
        _write_json(report_dir / "timing.json", table.model_dump_json(indent=2)),
        _write_csv(report_dir / "timing.csv", TIMING_COLUMNS, rows),
    ]
    logger.info(f"Wrote {written[1]}")
    return written


def emit_encoder_analysis(report: EncoderAnalysisReport, report_dir: Union[str, Path]) -> list[Path]:
    """Long-format distances, one row per (image, condition), ready for violin plots."""
    report_dir = Path(report_dir)
    stamp = _stamp_fields(report.stamp)
    rows = []
    for condition, distances in (("random", report.random_distances), ("adversarial", report.adversarial_distances)):
        rows.extend({"image_index": i, "condition": condition, "distance": repr(d), **stamp}
                    for i, d in enumerate(distances))
    written = [
        _write_json(report_dir / "encoder_analysis.json", report.model_dump_json(indent=2)),
        _write_csv(report_dir / "encoder_distances.csv", ENCODER_COLUMNS, rows),
    ]
    logger.info(f"Wrote {written[1]}")
    return written


def dump_frames(clean: Observation, attacked: Observation, frame_dir: Union[str, Path], prefix: str) -> list[Path]:
    """Side-by-side PPM files of clean and attacked observation frames."""
    frame_dir = Path(frame_dir)
    written = []
    for slot, (before, after) in enumerate(zip(clean.frames, attacked.frames)):
        written.append(save_ppm(frame_dir / f"{prefix}_t{slot}_clean.ppm", before))
        written.append(save_ppm(frame_dir / f"{prefix}_t{slot}_attacked.ppm", after))
    return written
