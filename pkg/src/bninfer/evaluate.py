"""Benchmark metrics: average KL divergence between target and predicted
posterior sets, multi-threshold accuracy curves, and per-inference timing.

KL sums over every variable and value of each example and averages over
examples. Predicted probabilities are clamped below at 1e-6 before the log,
since sampling baselines can emit exact zeros for values they never drew;
target-side zeros contribute nothing. The accuracy curve reports, per
threshold t, the fraction of (example, variable, value) cells whose absolute
probability error is strictly below t, weighted 1/J_i within each variable.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .network import Evidence, PosteriorSet

KL_CLAMP = 1e-6

# includes the conventional 0.1 reporting point
DEFAULT_THRESHOLDS = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3)


@dataclass
class EvalReport:
    method: str
    dataset: str
    n_examples: int
    avg_kl: float
    mta_curve: dict[float, float]
    time_per_inference_seconds: float
    config_fingerprint: str = ""
    n_failures: int = 0
    extras: dict = field(default_factory=dict)


def _check_aligned(targets, predictions) -> None:
    if len(targets) != len(predictions):
        raise ValueError(
            f"targets ({len(targets)}) and predictions ({len(predictions)}) differ in length"
        )
    for n, (t, p) in enumerate(zip(targets, predictions)):
        if len(t) != len(p):
            raise ValueError(f"example {n}: variable counts differ")
        for i, (tv, pv) in enumerate(zip(t, p)):
            if np.asarray(tv).shape != np.asarray(pv).shape:
                raise ValueError(f"example {n}, variable {i}: block shapes differ")


def avg_kl(
    targets: Sequence[PosteriorSet], predictions: Sequence[PosteriorSet]
) -> float:
    """Mean over examples of the summed per-variable KL(target || prediction)."""
    _check_aligned(targets, predictions)
    if not targets:
        raise ValueError("need at least one example")
    total = 0.0
    for target, prediction in zip(targets, predictions):
        for tv, pv in zip(target, prediction):
            tv = np.asarray(tv)
            pv = np.maximum(np.asarray(pv), KL_CLAMP)
            mask = tv > 0
            total += float((tv[mask] * np.log(tv[mask] / pv[mask])).sum())
    return total / len(targets)


def mta(
    targets: Sequence[PosteriorSet],
    predictions: Sequence[PosteriorSet],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> dict[float, float]:
    """Accuracy per threshold with a strict |error| < t indicator; each
    variable contributes the fraction of its values under the threshold."""
    _check_aligned(targets, predictions)
    if not targets:
        raise ValueError("need at least one example")
    for t in thresholds:
        if not 0.0 < t <= 1.0:
            raise ValueError(f"thresholds must lie in (0, 1], got {t}")
    thresholds = list(thresholds)
    sums = np.zeros(len(thresholds))
    for target, prediction in zip(targets, predictions):
        n_vars = len(target)
        for tv, pv in zip(target, prediction):
            err = np.abs(np.asarray(tv) - np.asarray(pv))
            for k, t in enumerate(thresholds):
                sums[k] += float((err < t).mean()) / n_vars
    return {t: float(sums[k] / len(targets)) for k, t in enumerate(thresholds)}


def time_inference(
    infer: Callable[[Evidence], PosteriorSet], workload: Sequence[Evidence]
) -> float:
    """Wall-clock seconds per call over the workload, after one untimed
    warm-up call on the first item."""
    if len(workload) == 0:
        raise ValueError("workload must contain at least one evidence set")
    infer(workload[0])
    start = time.perf_counter()
    for evidence in workload:
        infer(evidence)
    return (time.perf_counter() - start) / len(workload)


# ------------------------------------------------------------- reporting

def csv_header(thresholds: Sequence[float]) -> list[str]:
    return (
        ["method", "dataset", "n", "avg_kl", "time_per_inference"]
        + [f"mta@{t:g}" for t in thresholds]
        + ["n_failures"]
    )


def csv_row(report: EvalReport) -> list[str]:
    return (
        [
            report.method,
            report.dataset,
            str(report.n_examples),
            f"{report.avg_kl:.6g}",
            f"{report.time_per_inference_seconds:.6g}",
        ]
        + [f"{acc:.6g}" for acc in report.mta_curve.values()]
        + [str(report.n_failures)]
    )


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    if not reports:
        return ""
    thresholds = list(reports[0].mta_curve)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(csv_header(thresholds))
    for report in reports:
        if list(report.mta_curve) != thresholds:
            raise ValueError("reports carry different threshold grids")
        writer.writerow(csv_row(report))
    return buffer.getvalue()


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Human-readable fixed-width comparison table."""
    if not reports:
        return "(no reports)\n"
    thresholds = list(reports[0].mta_curve)
    headers = ["method", "n", "avg KL", "s/inference"] + [
        f"acc@{t:g}" for t in thresholds
    ] + ["failures"]
    rows = []
    for r in reports:
        rows.append(
            [r.method, str(r.n_examples), f"{r.avg_kl:.4f}",
             f"{r.time_per_inference_seconds:.6f}"]
            + [f"{100 * acc:.2f}%" for acc in r.mta_curve.values()]
            + [str(r.n_failures)]
        )
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
