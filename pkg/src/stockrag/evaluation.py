"""Imbalance-aware scoring of prediction records.

UP is the positive class. Alongside accuracy, the suite reports both
per-class precision/recall pairs, a weighted F1 whose class weights are
the class supports inside the scored set, and Matthews correlation,
which stays honest under the strong class imbalance typical of rising
markets. Any zero-denominator rate is defined as 0 and flagged.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import UndefinedMetricError
from .inference import DOWN, UP, PredictionRecord


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary counts with UP as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def positive_support(self) -> int:
        return self.tp + self.fn

    @property
    def negative_support(self) -> int:
        return self.tn + self.fp


def confusion(records: Sequence[PredictionRecord]) -> ConfusionMatrix:
    """Count verdicts against labels; verdicts must be UP or DOWN."""
    tp = fp = fn = tn = 0
    for record in records:
        if record.label not in (0, 1):
            raise ValueError(f"record {record.bundle_id} has non-binary label")
        if record.verdict == UP:
            if record.label == 1:
                tp += 1
            else:
                fp += 1
        elif record.verdict == DOWN:
            if record.label == 1:
                fn += 1
            else:
                tn += 1
        else:
            raise ValueError(
                f"record {record.bundle_id} has unscorable verdict {record.verdict!r}"
            )
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class ClassRates:
    """Per-class precision and recall, with degenerate rates flagged.

    pp/pr are positive precision and recall; np/nr the negative pair.
    A rate whose denominator is zero is reported as 0.0 and its name
    recorded in `degenerate`.
    """

    pp: float
    pr: float
    np: float
    nr: float
    degenerate: frozenset[str]


def class_rates(cm: ConfusionMatrix) -> ClassRates:
    degenerate: set[str] = set()

    def rate(numerator: int, denominator: int, name: str) -> float:
        if denominator == 0:
            degenerate.add(name)
            return 0.0
        return numerator / denominator

    return ClassRates(
        pp=rate(cm.tp, cm.tp + cm.fp, "pp"),
        pr=rate(cm.tp, cm.tp + cm.fn, "pr"),
        np=rate(cm.tn, cm.tn + cm.fn, "np"),
        nr=rate(cm.tn, cm.tn + cm.fp, "nr"),
        degenerate=frozenset(degenerate),
    )


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def weighted_f1_from_rates(
    pp: float, pr: float, np: float, nr: float, weight_pos: float, weight_neg: float
) -> float:
    """Support-weighted mean of the per-class F1 scores.

    Shared by normal scoring and by consistency checks that reconstruct
    the score from published per-class rates and class proportions.
    """
    if weight_pos < 0 or weight_neg < 0 or weight_pos + weight_neg <= 0:
        raise UndefinedMetricError("class weights must be non-negative and not all zero")
    f1_pos = _f1(pp, pr)
    f1_neg = _f1(np, nr)
    return (weight_pos * f1_pos + weight_neg * f1_neg) / (weight_pos + weight_neg)


def weighted_f1(cm: ConfusionMatrix) -> float:
    """Weighted F1 with weights equal to the class supports in cm."""
    if cm.total == 0:
        raise UndefinedMetricError("weighted F1 of an empty record set")
    rates = class_rates(cm)
    return weighted_f1_from_rates(
        rates.pp,
        rates.pr,
        rates.np,
        rates.nr,
        weight_pos=cm.positive_support,
        weight_neg=cm.negative_support,
    )


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation; 0 when any marginal count is zero."""
    factors = (
        cm.tp + cm.fp,
        cm.tp + cm.fn,
        cm.tn + cm.fp,
        cm.tn + cm.fn,
    )
    if 0 in factors:
        return 0.0
    numerator = cm.tp * cm.tn - cm.fp * cm.fn
    value = numerator / math.sqrt(math.prod(float(f) for f in factors))
    return max(-1.0, min(1.0, value))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise UndefinedMetricError("accuracy of an empty record set")
    return (cm.tp + cm.tn) / cm.total


@dataclass(frozen=True)
class RunMetrics:
    """The full metric row for one run of one experiment cell."""

    np: float
    pp: float
    nr: float
    pr: float
    acc: float
    mcc: float
    wf1: float
    invalid_rate: float
    support: int


def run_metrics(records: Sequence[PredictionRecord]) -> RunMetrics:
    if not records:
        raise UndefinedMetricError("no records to score")
    cm = confusion(records)
    rates = class_rates(cm)
    return RunMetrics(
        np=rates.np,
        pp=rates.pp,
        nr=rates.nr,
        pr=rates.pr,
        acc=accuracy(cm),
        mcc=mcc(cm),
        wf1=weighted_f1(cm),
        invalid_rate=sum(1 for r in records if r.invalid) / len(records),
        support=cm.total,
    )


@dataclass(frozen=True)
class AggregateMetrics:
    """Across-run means, plus the population deviation of weighted F1."""

    np: float
    pp: float
    nr: float
    pr: float
    acc: float
    mcc: float
    wf1: float
    wf1_std: float
    invalid_rate: float
    runs: int


def aggregate(per_run: Sequence[RunMetrics]) -> AggregateMetrics:
    if not per_run:
        raise UndefinedMetricError("no runs to aggregate")

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    wf1_values = [m.wf1 for m in per_run]
    return AggregateMetrics(
        np=mean([m.np for m in per_run]),
        pp=mean([m.pp for m in per_run]),
        nr=mean([m.nr for m in per_run]),
        pr=mean([m.pr for m in per_run]),
        acc=mean([m.acc for m in per_run]),
        mcc=mean([m.mcc for m in per_run]),
        wf1=mean(wf1_values),
        wf1_std=statistics.pstdev(wf1_values),
        invalid_rate=mean([m.invalid_rate for m in per_run]),
        runs=len(per_run),
    )


_METRIC_COLUMNS = ("np", "pp", "nr", "pr", "acc", "mcc", "wf1")

GroupKey = tuple[str, int, int]  # (model_name, shots, horizon_months)


def _row_cells(agg: AggregateMetrics) -> dict[str, float]:
    cells = {name: round(getattr(agg, name), 3) for name in _METRIC_COLUMNS}
    cells["wf1_std"] = round(agg.wf1_std, 3)
    cells["invalid_rate"] = round(agg.invalid_rate, 3)
    return cells


def emit_report(
    aggregates: Mapping[GroupKey, AggregateMetrics],
    fmt: str,
    path: str | Path,
) -> Path:
    """Write one report file; fmt is 'markdown', 'csv', or 'json'.

    Rows are (shots, model) sorted; each horizon contributes a column
    block NP PP NR PR ACC MCC WF1 plus the invalid rate, with the
    weighted-F1 deviation subscripted in markdown and kept as its own
    column elsewhere. All values are printed to three decimals.
    """
    horizons = sorted({key[2] for key in aggregates})
    rows = sorted({(key[1], key[0]) for key in aggregates})
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "markdown":
        header = ["Shots", "Model"]
        for horizon in horizons:
            header.extend(
                [
                    f"{horizon}m NP",
                    f"{horizon}m PP",
                    f"{horizon}m NR",
                    f"{horizon}m PR",
                    f"{horizon}m ACC",
                    f"{horizon}m MCC",
                    f"{horizon}m WF1",
                    f"{horizon}m Invalid",
                ]
            )
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        for shots, model in rows:
            cells = [str(shots), model]
            for horizon in horizons:
                agg = aggregates.get((model, shots, horizon))
                if agg is None:
                    cells.extend([""] * 8)
                    continue
                values = _row_cells(agg)
                cells.extend(
                    [f"{values[name]:.3f}" for name in ("np", "pp", "nr", "pr", "acc", "mcc")]
                )
                cells.append(f"{values['wf1']:.3f}<sub>{values['wf1_std']:.3f}</sub>")
                cells.append(f"{values['invalid_rate']:.3f}")
            lines.append("| " + " | ".join(cells) + " |")
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return target

    if fmt == "csv":
        fieldnames = ["shots", "model"]
        for horizon in horizons:
            for name in (*_METRIC_COLUMNS, "wf1_std", "invalid_rate"):
                fieldnames.append(f"h{horizon}_{name}")
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fieldnames)
        writer.writeheader()
        for shots, model in rows:
            row: dict[str, object] = {"shots": shots, "model": model}
            for horizon in horizons:
                agg = aggregates.get((model, shots, horizon))
                if agg is None:
                    continue
                for name, value in _row_cells(agg).items():
                    row[f"h{horizon}_{name}"] = f"{value:.3f}"
            writer.writerow(row)
        target.write_text(buffer.getvalue(), encoding="utf-8")
        return target

    if fmt == "json":
        payload = {"rows": []}
        for shots, model in rows:
            entry: dict[str, object] = {"model": model, "shots": shots, "horizons": {}}
            for horizon in horizons:
                agg = aggregates.get((model, shots, horizon))
                if agg is not None:
                    entry["horizons"][str(horizon)] = _row_cells(agg)
            payload["rows"].append(entry)
        target.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return target

    raise ValueError(f"unknown report format {fmt!r}")
