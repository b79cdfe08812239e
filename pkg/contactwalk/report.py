import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from .decorators import CheckResult
from .enums import CheckStatus

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
REPLICA_FILE = "replicas.csv"


def _cell(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        if all(isinstance(v, (bool, int, float)) or v is None for v in value):
            return ";".join("" if v is None else repr(v) for v in value)
        return json.dumps(value, sort_keys=True)
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return value


def records_to_dataframe(records: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per replica record; list-valued fields are joined with ';'."""
    if not records:
        return pd.DataFrame()
    df = pd.DataFrame([{k: _cell(v) for k, v in r.items()} for r in records])
    if "replica" in df.columns:
        df = df[["replica"] + [c for c in df.columns if c != "replica"]]
    return df


def export_records_csv(records: List[Dict[str, Any]], filepath: Union[str, Path]) -> bool:
    df = records_to_dataframe(records)
    if df.empty:
        logger.info("No replica records to export")
        return False
    df.to_csv(filepath, index=False)
    logger.info("Wrote %d replica rows to %s", len(df), filepath)
    return True


def json_safe(value: Any) -> Any:
    """Replace nan by null and infinities by the strings 'inf' / '-inf', recursively."""
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def summary_json(summary: Dict[str, Any], config: Dict[str, Any]) -> str:
    payload = dict(summary)
    payload["config"] = config
    return json.dumps(json_safe(payload), sort_keys=True, indent=2) + "\n"


def write_summary(summary: Dict[str, Any], config: Dict[str, Any], filepath: Union[str, Path]):
    path_obj = Path(filepath)
    path_obj.write_text(summary_json(summary, config), encoding="utf-8")
    logger.info("Wrote summary to %s", path_obj)


def write_artifacts(
    directory: Union[str, Path], summary: Dict[str, Any], config: Dict[str, Any],
    records: List[Dict[str, Any]], write_csv: bool = True,
) -> List[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / SUMMARY_FILE]
    write_summary(summary, config, written[0])
    if write_csv and export_records_csv(records, out / REPLICA_FILE):
        written.append(out / REPLICA_FILE)
    return written


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)) and all(isinstance(v, float) for v in value):
        return "[" + ", ".join(f"{v:.6g}" for v in value) + "]"
    return str(value)


def generate_summary_report(experiment: str, summary: Dict[str, Any]) -> str:
    report_lines = [f"\n--- {experiment} summary ---"]
    for key in sorted(summary):
        value = summary[key]
        if key in ("config", "checks", "points", "rows"):
            continue
        if isinstance(value, dict):
            report_lines.append(f"{key}:")
            for sub in sorted(value):
                report_lines.append(f"  {sub}: {_format(value[sub])}")
        else:
            report_lines.append(f"{key}: {_format(value)}")
    for point in summary.get("points", []):
        report_lines.append(
            f"  lambda={point['lambda']:g}: v_hat={_format(point['v_hat'])} +- {_format(point['se'])}"
            f" iota_hat={_format(point['iota_hat'])}"
        )
    for row in summary.get("rows", []):
        marker = " (upper bound)" if row.get("upper_bound") else ""
        report_lines.append(f"  t={row['t']:g}: rate={_format(row['rate'])}{marker}")
    return "\n".join(report_lines)


def generate_invariant_report(results: List[CheckResult]) -> str:
    total_checks = len(results)
    passed_checks = sum(1 for r in results if r["status"] == CheckStatus.PASSED.value)
    failed_checks = total_checks - passed_checks
    total_trials = sum(r["trials"] for r in results)

    report_lines = ["\n--- Invariant Suite Report ---"]
    for result in results:
        report_lines.append(
            f"  {result['check']}: {result['status']} "
            f"({result['trials'] - result['violations']}/{result['trials']} trials passed)"
        )
        if result["status"] != CheckStatus.PASSED.value:
            report_lines.append(f"    {result['details']}")
    report_lines.append("\n--- Overall Summary ---")
    report_lines.append(f"Total Checks Performed: {total_checks}")
    report_lines.append(f"Checks Passed: {passed_checks}")
    report_lines.append(f"Checks Failed (or Errored): {failed_checks}")
    report_lines.append(f"Total Trials: {total_trials}")
    return "\n".join(report_lines)
