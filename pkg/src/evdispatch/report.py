"""Experiment report assembly, serialization, and comparison.

Outputs per run directory:
  mr.csv, rawt.csv, acwt.csv, acwt_low_soc.csv, acwt_mid_soc.csv
      columns: policy,day_type,window_index,value  (undefined windows skipped)
  counts.csv
      per-window request/matched/carried/expired bookkeeping
  summary.json
      daily-level statistics (mean/max/min/sd over days) per policy and day
      type, plus run provenance (seed, timings, resolved config)
  config.resolved.txt

Daily metric values aggregate a day's windows by totals (e.g. daily MR =
day's matched / day's requests; daily RAWT = total wait / total matched) so
empty night windows cannot skew the statistics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .sim import WindowRecord

METRIC_FIELDS = ("mr", "rawt", "acwt", "acwt_low_soc", "acwt_mid_soc")


@dataclass(frozen=True)
class ExperimentReport:
    records: list[WindowRecord]
    summary: dict
    resolved_config: str
    seed: int


def _daily_value(metric: str, recs: list[WindowRecord]) -> float | None:
    """One day-level number from a day's window records."""
    if metric == "mr":
        requests = sum(r.requests for r in recs)
        matched = sum(r.matched for r in recs)
        return 1.0 if requests == 0 else matched / requests
    if metric == "rawt":
        matched = sum(r.matched for r in recs if r.rawt is not None)
        total = sum(r.rawt * r.matched for r in recs if r.rawt is not None)
        return None if matched == 0 else total / matched
    if metric == "acwt":
        matched = sum(r.matched for r in recs if r.acwt is not None)
        total = sum(r.acwt * r.matched for r in recs if r.acwt is not None)
        return None if matched == 0 else total / matched
    # SoC buckets: bucket_acwt reports a bucket mean; recover the day mean
    # by averaging window means weighted by nothing finer than presence.
    vals = [getattr(r, metric) for r in recs if getattr(r, metric) is not None]
    return None if not vals else float(np.mean(vals))


def daily_values(records: Sequence[WindowRecord],
                 metric: str) -> dict[tuple[str, int], float | None]:
    """(policy, sim_day) -> day-level metric value."""
    by_day: dict[tuple[str, int], list[WindowRecord]] = {}
    for r in records:
        by_day.setdefault((r.policy, r.sim_day), []).append(r)
    return {key: _daily_value(metric, recs) for key, recs in sorted(by_day.items())}


def summarize(records: Sequence[WindowRecord], seed: int,
              timings: dict | None = None) -> dict:
    policies = sorted({r.policy for r in records})
    day_types = sorted({r.day_type for r in records})
    day_type_of = {(r.policy, r.sim_day): r.day_type for r in records}
    summary: dict = {"policies": policies, "day_types": day_types,
                     "seed": seed, "metrics": {}}
    if timings:
        summary["timings"] = timings
    for metric in METRIC_FIELDS:
        per_day = daily_values(records, metric)
        block: dict = {}
        for policy in policies:
            block[policy] = {}
            for day_type in day_types:
                vals = [v for (p, d), v in per_day.items()
                        if p == policy and day_type_of[(p, d)] == day_type
                        and v is not None]
                if not vals:
                    block[policy][day_type] = None
                    continue
                arr = np.array(vals)
                block[policy][day_type] = {
                    "mean": float(arr.mean()),
                    "max": float(arr.max()),
                    "min": float(arr.min()),
                    "sd": float(arr.std(ddof=0)),
                    "daily": [float(v) for v in vals],
                }
        summary["metrics"][metric] = block
    return summary


def write_report(report: ExperimentReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for metric in METRIC_FIELDS:
        with (out / f"{metric}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy", "day_type", "window_index", "value"])
            for r in report.records:
                value = getattr(r, metric)
                if value is None:
                    continue
                writer.writerow([r.policy, r.day_type, r.window_index,
                                 f"{value:.10g}"])
    with (out / "counts.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "day_type", "window_index",
                         "requests", "new_requests", "matched",
                         "carried_over", "expired"])
        for r in report.records:
            writer.writerow([r.policy, r.day_type, r.window_index, r.requests,
                             r.new_requests, r.matched, r.carried_over,
                             r.expired])
    (out / "summary.json").write_text(json.dumps(report.summary, indent=2,
                                                 sort_keys=True) + "\n")
    (out / "config.resolved.txt").write_text(report.resolved_config)


def load_summary(report_dir: str | Path) -> dict:
    path = Path(report_dir) / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"no summary.json under {report_dir}")
    summary = json.loads(path.read_text())
    if "metrics" not in summary or "policies" not in summary:
        raise ValueError(f"{path} does not look like an experiment summary")
    return summary


def compare_summaries(a: dict, b: dict) -> tuple[str, dict]:
    """Per-metric mean deltas (b relative to a) for shared policies.

    Returns (formatted table, structured dict). Raises ValueError when the
    two summaries do not share the metric schema.
    """
    if set(a["metrics"]) != set(b["metrics"]):
        raise ValueError("summaries have mismatched metric schemas")
    shared_policies = sorted(set(a["policies"]) & set(b["policies"]))
    shared_types = sorted(set(a["day_types"]) & set(b["day_types"]))
    rows = []
    deltas: dict = {}
    for metric in sorted(a["metrics"]):
        deltas[metric] = {}
        for policy in shared_policies:
            for day_type in shared_types:
                va = a["metrics"][metric].get(policy, {}).get(day_type)
                vb = b["metrics"][metric].get(policy, {}).get(day_type)
                if va is None or vb is None:
                    continue
                diff = vb["mean"] - va["mean"]
                pct = 100.0 * diff / va["mean"] if va["mean"] != 0 else float("nan")
                deltas[metric].setdefault(policy, {})[day_type] = {
                    "a_mean": va["mean"], "b_mean": vb["mean"],
                    "delta": diff, "pct": pct}
                rows.append(f"{metric:13s} {policy:10s} {day_type:8s} "
                            f"a={va['mean']:10.4f} b={vb['mean']:10.4f} "
                            f"delta={diff:+10.4f} ({pct:+.1f}%)")
    return "\n".join(rows), deltas
