"""Batch monitoring of prediction logs between audit iterations.

Two aggregate families ship: a conditional-independence fairness ratio over
positive decision rates, and a plain error rate against ground-truth labels.
Logs are evaluated in consecutive, non-overlapping batches of exactly ``n``
records so every record is counted once and batch results are reproducible
from the raw log.

The fairness ratio is computed per stratum of a legitimate attribute: within
each stratum, groups below ``min_group_size`` are dropped, the positive rate
of each remaining group is taken, and the stratum score is the worst-case
rate ratio min/max (1.0 when every remaining rate is zero). The overall value
is the minimum over evaluated strata, so the worst stratum governs. Degenerate
windows (no comparable groups anywhere) yield Indeterminate, never an error,
and Indeterminate is a first-class verdict distinct from Pass and Fail.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import ValidationError

DEFAULT_FAIRNESS_THRESHOLD = 0.95
DEFAULT_MIN_GROUP_SIZE = 10


class MetricKind(str, Enum):
    CONDITIONAL_INDEPENDENCE_RATIO = "ConditionalIndependenceRatio"
    ERROR_RATE = "ErrorRate"


class Direction(str, Enum):
    FAIL_BELOW = "FailBelow"
    FAIL_ABOVE = "FailAbove"


class BatchVerdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INDETERMINATE = "Indeterminate"


#: Each metric has exactly one sensible failure direction.
METRIC_DIRECTIONS: Mapping[MetricKind, Direction] = {
    MetricKind.CONDITIONAL_INDEPENDENCE_RATIO: Direction.FAIL_BELOW,
    MetricKind.ERROR_RATE: Direction.FAIL_ABOVE,
}


@dataclass(frozen=True)
class PredictionRecord:
    """One logged decision: outcome is the binary decision (1 = positive)."""

    record_id: str
    outcome: int
    protected: str | None = None
    stratum: str | None = None
    label: int | None = None
    timestamp: str | None = None
    extras: Mapping[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.outcome not in (0, 1):
            raise ValidationError(
                f"record {self.record_id!r}: outcome must be 0 or 1, got {self.outcome!r}"
            )
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(
                f"record {self.record_id!r}: label must be 0 or 1 when present, got {self.label!r}"
            )

    def get(self, selector: str) -> Any:
        if selector == "protected":
            return self.protected
        if selector == "stratum":
            return self.stratum
        if selector == "label":
            return self.label
        if selector == "outcome":
            return self.outcome
        return self.extras.get(selector)

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "record_id": self.record_id,
            "outcome": self.outcome,
            "protected": self.protected,
            "stratum": self.stratum,
            "label": self.label,
            "timestamp": self.timestamp,
        }
        doc.update(self.extras)
        return doc

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "PredictionRecord":
        known = {"record_id", "outcome", "protected", "stratum", "label", "timestamp"}
        record = PredictionRecord(
            record_id=str(doc["record_id"]),
            outcome=doc["outcome"],
            protected=doc.get("protected"),
            stratum=doc.get("stratum"),
            label=doc.get("label"),
            timestamp=doc.get("timestamp"),
            extras={k: v for k, v in doc.items() if k not in known},
        )
        record.validate()
        return record


def parse_prediction_log(text: str) -> list[PredictionRecord]:
    """Parse newline-delimited JSON prediction records."""
    records: list[PredictionRecord] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {line_no}: not valid JSON: {exc.msg}") from exc
        try:
            records.append(PredictionRecord.from_doc(doc))
        except (KeyError, ValidationError) as exc:
            raise ValidationError(f"line {line_no}: {exc}") from exc
    return records


@dataclass(frozen=True)
class MonitorSpec:
    id: str
    metric: MetricKind
    batch_size: int
    threshold: float = DEFAULT_FAIRNESS_THRESHOLD
    direction: Direction | None = None
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE
    protected_attr: str = "protected"
    stratum_attr: str | None = None
    document_failures_only: bool = False

    def resolved_direction(self) -> Direction:
        return self.direction if self.direction is not None else METRIC_DIRECTIONS[self.metric]

    def validate(self) -> None:
        problems: list[str] = []
        if self.batch_size <= 0:
            problems.append(f"batch_size must be positive, got {self.batch_size}")
        if not (0.0 < self.threshold <= 1.0):
            problems.append(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.min_group_size <= 0:
            problems.append(f"min_group_size must be positive, got {self.min_group_size}")
        if self.direction is not None and self.direction != METRIC_DIRECTIONS[self.metric]:
            problems.append(
                f"metric {self.metric.value} requires direction "
                f"{METRIC_DIRECTIONS[self.metric].value}, got {self.direction.value}"
            )
        if problems:
            raise ValidationError(f"invalid monitor spec {self.id!r}", problems)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "metric": self.metric.value,
            "batch_size": self.batch_size,
            "threshold": self.threshold,
            "direction": self.resolved_direction().value,
            "min_group_size": self.min_group_size,
            "protected_attr": self.protected_attr,
            "stratum_attr": self.stratum_attr,
            "document_failures_only": self.document_failures_only,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "MonitorSpec":
        spec = MonitorSpec(
            id=doc["id"],
            metric=MetricKind(doc["metric"]),
            batch_size=doc["batch_size"],
            threshold=doc.get("threshold", DEFAULT_FAIRNESS_THRESHOLD),
            direction=Direction(doc["direction"]) if doc.get("direction") else None,
            min_group_size=doc.get("min_group_size", DEFAULT_MIN_GROUP_SIZE),
            protected_attr=doc.get("protected_attr", "protected"),
            stratum_attr=doc.get("stratum_attr"),
            document_failures_only=bool(doc.get("document_failures_only", False)),
        )
        spec.validate()
        return spec


@dataclass(frozen=True)
class StratumDetail:
    """Per-stratum group counts and the resulting rate ratio."""

    stratum: str | None
    counts: Mapping[str, tuple[int, int]]  # group -> (positives, records), all groups
    rates: Mapping[str, float]  # eligible groups only
    ratio: float | None
    eligible: bool

    def to_doc(self) -> dict[str, Any]:
        return {
            "stratum": self.stratum,
            "counts": {g: [p, n] for g, (p, n) in sorted(self.counts.items())},
            "rates": {g: r for g, r in sorted(self.rates.items())},
            "ratio": self.ratio,
            "eligible": self.eligible,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "StratumDetail":
        return StratumDetail(
            stratum=doc.get("stratum"),
            counts={g: (p, n) for g, (p, n) in doc["counts"].items()},
            rates=dict(doc["rates"]),
            ratio=doc.get("ratio"),
            eligible=bool(doc["eligible"]),
        )


@dataclass(frozen=True)
class MonitorBatchResult:
    spec_id: str
    batch_index: int
    window: tuple[str, str, int]  # (first record id, last record id, count)
    value: float | None
    verdict: BatchVerdict
    per_stratum: tuple[StratumDetail, ...] = ()
    malformed: int = 0

    def to_doc(self) -> dict[str, Any]:
        return {
            "spec_id": self.spec_id,
            "batch_index": self.batch_index,
            "window": {"first": self.window[0], "last": self.window[1], "count": self.window[2]},
            "value": self.value,
            "verdict": self.verdict.value,
            "per_stratum": [d.to_doc() for d in self.per_stratum],
            "malformed": self.malformed,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "MonitorBatchResult":
        window = doc["window"]
        return MonitorBatchResult(
            spec_id=doc["spec_id"],
            batch_index=doc["batch_index"],
            window=(window["first"], window["last"], window["count"]),
            value=doc.get("value"),
            verdict=BatchVerdict(doc["verdict"]),
            per_stratum=tuple(StratumDetail.from_doc(d) for d in doc.get("per_stratum", ())),
            malformed=doc.get("malformed", 0),
        )


@dataclass(frozen=True)
class MonitorRun:
    """Outcome of one monitor execution over a log.

    ``results`` holds the emitted batch results. Fail and Indeterminate
    batches are always emitted in full; Pass batches are emitted only when
    the spec does not restrict documentation to failures, and are otherwise
    visible through ``pass_count`` alone.
    """

    spec_id: str
    batch_count: int
    pass_count: int
    fail_count: int
    indeterminate_count: int
    malformed_total: int
    results: tuple[MonitorBatchResult, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "spec_id": self.spec_id,
            "batch_count": self.batch_count,
            "pass_count": self.pass_count,
            "fail_count": self.fail_count,
            "indeterminate_count": self.indeterminate_count,
            "malformed_total": self.malformed_total,
            "results": [r.to_doc() for r in self.results],
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "MonitorRun":
        return MonitorRun(
            spec_id=doc["spec_id"],
            batch_count=doc["batch_count"],
            pass_count=doc["pass_count"],
            fail_count=doc["fail_count"],
            indeterminate_count=doc["indeterminate_count"],
            malformed_total=doc["malformed_total"],
            results=tuple(MonitorBatchResult.from_doc(r) for r in doc["results"]),
        )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _is_malformed(record: PredictionRecord, spec: MonitorSpec) -> bool:
    if record.outcome not in (0, 1):
        return True
    if spec.metric == MetricKind.CONDITIONAL_INDEPENDENCE_RATIO:
        if record.get(spec.protected_attr) is None:
            return True
        if spec.stratum_attr is not None and record.get(spec.stratum_attr) is None:
            return True
    return False


def conditional_independence_ratio(
    window: Sequence[PredictionRecord], spec: MonitorSpec
) -> tuple[float | None, tuple[StratumDetail, ...], int]:
    """Worst-case per-stratum min/max positive-rate ratio over the window.

    Returns ``(value, per-stratum detail, malformed count)`` where value is
    None when no stratum could be evaluated. Within a stratum, groups with
    fewer than ``min_group_size`` records are excluded; a stratum with fewer
    than two remaining groups is skipped; a stratum where every remaining
    rate is zero scores 1.0 (perfect equality).
    """
    if not window:
        raise ValidationError("window must contain at least one record")
    spec.validate()

    malformed = 0
    # stratum -> group -> [positives, total]
    tallies: dict[str | None, dict[str, list[int]]] = {}
    for record in window:
        if _is_malformed(record, spec):
            malformed += 1
            continue
        stratum = (
            str(record.get(spec.stratum_attr)) if spec.stratum_attr is not None else None
        )
        group = str(record.get(spec.protected_attr))
        cell = tallies.setdefault(stratum, {}).setdefault(group, [0, 0])
        cell[0] += record.outcome
        cell[1] += 1

    details: list[StratumDetail] = []
    evaluated_ratios: list[float] = []
    for stratum in sorted(tallies, key=lambda s: "" if s is None else s):
        groups = tallies[stratum]
        counts = {g: (p, n) for g, (p, n) in groups.items()}
        eligible_groups = {g: (p, n) for g, (p, n) in counts.items() if n >= spec.min_group_size}
        if len(eligible_groups) < 2:
            details.append(
                StratumDetail(stratum=stratum, counts=counts, rates={}, ratio=None, eligible=False)
            )
            continue
        rates = {g: p / n for g, (p, n) in eligible_groups.items()}
        max_rate = max(rates.values())
        ratio = 1.0 if max_rate == 0.0 else min(rates.values()) / max_rate
        details.append(
            StratumDetail(stratum=stratum, counts=counts, rates=rates, ratio=ratio, eligible=True)
        )
        evaluated_ratios.append(ratio)

    value = min(evaluated_ratios) if evaluated_ratios else None
    return value, tuple(details), malformed


def error_rate(window: Sequence[PredictionRecord]) -> float | None:
    """Share of labeled records whose outcome disagrees with the label.

    Records without a ground-truth label do not count; a window with no
    labeled records yields None (indeterminate).
    """
    labeled = 0
    mismatches = 0
    for record in window:
        if record.label is None or record.outcome not in (0, 1):
            continue
        labeled += 1
        if record.outcome != record.label:
            mismatches += 1
    if labeled == 0:
        return None
    return mismatches / labeled


def _apply_threshold(value: float | None, spec: MonitorSpec) -> BatchVerdict:
    if value is None:
        return BatchVerdict.INDETERMINATE
    if spec.resolved_direction() == Direction.FAIL_BELOW:
        return BatchVerdict.FAIL if value < spec.threshold else BatchVerdict.PASS
    return BatchVerdict.FAIL if value > spec.threshold else BatchVerdict.PASS


def evaluate_batch(
    batch: Sequence[PredictionRecord],
    spec: MonitorSpec,
    batch_index: int,
    *,
    partial: bool = False,
) -> MonitorBatchResult:
    """Evaluate one batch. A trailing partial batch is never judged: it is
    reported Indeterminate with its (short) count."""
    window_desc = (batch[0].record_id, batch[-1].record_id, len(batch))
    if partial:
        malformed = sum(1 for r in batch if _is_malformed(r, spec))
        return MonitorBatchResult(
            spec_id=spec.id,
            batch_index=batch_index,
            window=window_desc,
            value=None,
            verdict=BatchVerdict.INDETERMINATE,
            per_stratum=(),
            malformed=malformed,
        )
    if spec.metric == MetricKind.CONDITIONAL_INDEPENDENCE_RATIO:
        value, details, malformed = conditional_independence_ratio(batch, spec)
    else:
        value = error_rate(batch)
        details = ()
        malformed = sum(1 for r in batch if _is_malformed(r, spec))
    return MonitorBatchResult(
        spec_id=spec.id,
        batch_index=batch_index,
        window=window_desc,
        value=value,
        verdict=_apply_threshold(value, spec),
        per_stratum=details,
        malformed=malformed,
    )


def run_monitor(spec: MonitorSpec, log: Iterable[PredictionRecord]) -> MonitorRun:
    """Partition ``log`` into consecutive batches of exactly ``batch_size``
    and evaluate each one.

    A trailing partial batch is reported Indeterminate. When the spec limits
    documentation to failures, passing batches are only counted; failing and
    indeterminate batches are always emitted in full.
    """
    spec.validate()
    records = list(log)
    n = spec.batch_size

    results: list[MonitorBatchResult] = []
    pass_count = fail_count = indeterminate_count = 0
    malformed_total = 0
    batch_count = 0
    for start in range(0, len(records), n):
        batch = records[start : start + n]
        batch_index = start // n
        batch_count += 1
        result = evaluate_batch(batch, spec, batch_index, partial=len(batch) < n)
        malformed_total += result.malformed
        if result.verdict == BatchVerdict.PASS:
            pass_count += 1
            if not spec.document_failures_only:
                results.append(result)
        elif result.verdict == BatchVerdict.FAIL:
            fail_count += 1
            results.append(result)
        else:
            indeterminate_count += 1
            results.append(result)

    return MonitorRun(
        spec_id=spec.id,
        batch_count=batch_count,
        pass_count=pass_count,
        fail_count=fail_count,
        indeterminate_count=indeterminate_count,
        malformed_total=malformed_total,
        results=tuple(results),
    )
