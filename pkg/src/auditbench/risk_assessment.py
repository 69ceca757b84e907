"""Step-tagged risk question database, scope filtering, and concern derivation.

Questions are tagged with the lifecycle steps they apply to and one of the
seven trustworthy-AI requirements. Scoping an audit to a set of steps filters
the database down to the questions that matter; auditor answers then drive a
mechanical derivation of ethical concerns per requirement.

Import is all-or-nothing: a partially imported database would silently
shrink the audit's scope, so any bad row aborts the whole import with the
row and field named.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .canonical import canonical_json_bytes, digest_doc, format_timestamp, parse_timestamp
from .errors import ValidationError
from .lifecycle import LifecycleModel


class Requirement(str, Enum):
    """The seven requirements of ethical and trustworthy AI (closed set)."""

    HUMAN_AGENCY_OVERSIGHT = "HumanAgencyOversight"
    TECHNICAL_ROBUSTNESS_SAFETY = "TechnicalRobustnessSafety"
    PRIVACY_DATA_GOVERNANCE = "PrivacyDataGovernance"
    TRANSPARENCY = "Transparency"
    DIVERSITY_NON_DISCRIMINATION_FAIRNESS = "DiversityNonDiscriminationFairness"
    SOCIETAL_ENVIRONMENTAL_WELLBEING = "SocietalEnvironmentalWellbeing"
    ACCOUNTABILITY = "Accountability"


_REQUIREMENT_ORDER: dict[Requirement, int] = {r: i for i, r in enumerate(Requirement)}


def requirement_order(requirement: Requirement) -> int:
    return _REQUIREMENT_ORDER[requirement]


class Answer(str, Enum):
    YES = "Yes"
    NO = "No"
    PARTIAL = "Partial"
    NOT_APPLICABLE = "NotApplicable"
    UNKNOWN = "Unknown"


#: Answers that flag a question as a potential concern trigger.
FLAGGED_ANSWERS = frozenset({Answer.NO, Answer.PARTIAL, Answer.UNKNOWN})

#: Answers that require a written justification.
JUSTIFICATION_REQUIRED = frozenset({Answer.NO, Answer.PARTIAL})


class Severity(str, Enum):
    INFO = "Info"
    ADVISORY = "Advisory"
    MAJOR = "Major"


class MitigationStatus(str, Enum):
    OPEN = "Open"
    IMPLEMENTED = "Implemented"
    WAIVED = "Waived"


@dataclass(frozen=True)
class RiskQuestion:
    id: str
    text: str
    requirement: Requirement
    step_tags: frozenset[str]
    source: str = ""
    mandatory: bool = False

    def sort_key(self) -> tuple[int, str]:
        return (requirement_order(self.requirement), self.id)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "requirement": self.requirement.value,
            "step_tags": sorted(self.step_tags),
            "source": self.source,
            "mandatory": self.mandatory,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "RiskQuestion":
        return RiskQuestion(
            id=doc["id"],
            text=doc["text"],
            requirement=Requirement(doc["requirement"]),
            step_tags=frozenset(doc["step_tags"]),
            source=doc.get("source", ""),
            mandatory=bool(doc.get("mandatory", False)),
        )


@dataclass(frozen=True)
class QuestionDB:
    """Immutable, digest-stamped snapshot of a question database."""

    questions: tuple[RiskQuestion, ...]
    digest: str

    def __len__(self) -> int:
        return len(self.questions)

    def by_id(self) -> dict[str, RiskQuestion]:
        return {q.id: q for q in self.questions}

    def to_doc(self) -> dict[str, Any]:
        return {"questions": [q.to_doc() for q in self.questions], "digest": self.digest}

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "QuestionDB":
        return QuestionDB(
            questions=tuple(RiskQuestion.from_doc(q) for q in doc["questions"]),
            digest=doc["digest"],
        )


def _snapshot(questions: Iterable[RiskQuestion]) -> QuestionDB:
    ordered = tuple(sorted(questions, key=RiskQuestion.sort_key))
    digest = digest_doc([q.to_doc() for q in ordered])
    return QuestionDB(questions=ordered, digest=digest)


CSV_HEADER = ["id", "text", "requirement", "step_tags", "source", "mandatory"]

_TRUE_WORDS = {"true", "1", "yes", "y"}
_FALSE_WORDS = {"false", "0", "no", "n", ""}


def _parse_mandatory(raw: Any, where: str) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in _TRUE_WORDS:
        return True
    if text in _FALSE_WORDS:
        return False
    raise ValidationError(f"{where}: field 'mandatory' must be a boolean, got {raw!r}")


def _validate_rows(
    rows: Sequence[tuple[str, Mapping[str, Any]]], model: LifecycleModel
) -> tuple[RiskQuestion, ...]:
    known_steps = set(model.step_ids())
    problems: list[str] = []
    seen_ids: set[str] = set()
    questions: list[RiskQuestion] = []
    for where, row in rows:
        qid = str(row.get("id", "") or "").strip()
        text = str(row.get("text", "") or "").strip()
        requirement_raw = str(row.get("requirement", "") or "").strip()
        tags_raw = row.get("step_tags") or []
        if isinstance(tags_raw, str):
            tags = [t.strip() for t in tags_raw.split(";") if t.strip()]
        else:
            tags = [str(t).strip() for t in tags_raw if str(t).strip()]
        if not qid:
            problems.append(f"{where}: field 'id' is empty")
            continue
        if qid in seen_ids:
            problems.append(f"{where}: duplicate question id {qid!r}")
            continue
        seen_ids.add(qid)
        if not text:
            problems.append(f"{where}: field 'text' is empty")
        try:
            requirement = Requirement(requirement_raw)
        except ValueError:
            problems.append(f"{where}: field 'requirement' has unknown value {requirement_raw!r}")
            continue
        if not tags:
            problems.append(f"{where}: field 'step_tags' must name at least one step")
            continue
        unknown = sorted(set(tags) - known_steps)
        if unknown:
            problems.append(
                f"{where}: field 'step_tags' has unresolvable step tag(s): {', '.join(unknown)}"
            )
            continue
        try:
            mandatory = _parse_mandatory(row.get("mandatory", False), where)
        except ValidationError as exc:
            problems.append(str(exc))
            continue
        questions.append(
            RiskQuestion(
                id=qid,
                text=text,
                requirement=requirement,
                step_tags=frozenset(tags),
                source=str(row.get("source", "") or "").strip(),
                mandatory=mandatory,
            )
        )
    if problems:
        raise ValidationError("question database import failed; no rows imported", problems)
    return tuple(questions)


def import_questions(
    document: str | bytes,
    model: LifecycleModel,
    *,
    fmt: str | None = None,
) -> QuestionDB:
    """Import a question database from CSV or JSON text.

    CSV uses the header ``id,text,requirement,step_tags,source,mandatory``
    with ``;``-separated step tags; JSON is a list of objects with the same
    fields (``step_tags`` as a list). Every step tag must resolve against
    ``model``. Any violation aborts the entire import.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if fmt is None:
        stripped = document.lstrip()
        fmt = "json" if stripped.startswith(("[", "{")) else "csv"

    rows: list[tuple[str, Mapping[str, Any]]] = []
    if fmt == "json":
        if document.strip():
            parsed = json.loads(document)
            if isinstance(parsed, Mapping):
                parsed = parsed.get("questions", [])
            if not isinstance(parsed, list):
                raise ValidationError("JSON question document must be a list of objects")
            for index, item in enumerate(parsed):
                if not isinstance(item, Mapping):
                    raise ValidationError(f"row {index + 1}: expected an object, got {type(item).__name__}")
                rows.append((f"row {index + 1}", item))
    elif fmt == "csv":
        if document.strip():
            reader = csv.DictReader(io.StringIO(document))
            header = reader.fieldnames or []
            missing = [col for col in CSV_HEADER if col not in header and col not in ("source", "mandatory")]
            if missing:
                raise ValidationError(f"CSV header is missing column(s): {', '.join(missing)}")
            for index, row in enumerate(reader):
                rows.append((f"row {index + 2}", row))  # row 1 is the header
    else:
        raise ValidationError(f"unknown question document format: {fmt!r}")

    return _snapshot(_validate_rows(rows, model))


def export_questions(questions: Sequence[RiskQuestion], fmt: str = "csv") -> str:
    """Render questions back out in an importable format."""
    if fmt == "json":
        return canonical_json_bytes([q.to_doc() for q in questions]).decode("utf-8")
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(CSV_HEADER)
        for q in questions:
            writer.writerow(
                [
                    q.id,
                    q.text,
                    q.requirement.value,
                    ";".join(sorted(q.step_tags)),
                    q.source,
                    "true" if q.mandatory else "false",
                ]
            )
        return out.getvalue()
    raise ValidationError(f"unknown question document format: {fmt!r}")


def filter_questions(
    db: QuestionDB,
    scope: Iterable[str],
    requirements: Iterable[Requirement] | None = None,
) -> list[RiskQuestion]:
    """Questions whose step tags intersect ``scope``, in (requirement, id) order."""
    scope_set = set(scope)
    if not scope_set:
        raise ValidationError("scope must name at least one step")
    wanted = set(requirements) if requirements is not None else None
    matched = [
        q
        for q in db.questions
        if q.step_tags & scope_set and (wanted is None or q.requirement in wanted)
    ]
    matched.sort(key=RiskQuestion.sort_key)
    return matched


# ---------------------------------------------------------------------------
# Responses, concerns, recommendations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuestionResponse:
    question_id: str
    answer: Answer
    justification: str = ""
    evidence_refs: tuple[str, ...] = ()
    answered_by: str = ""
    timestamp: datetime | None = None

    @property
    def flagged(self) -> bool:
        return self.answer in FLAGGED_ANSWERS

    def validate(self) -> None:
        if self.answer in JUSTIFICATION_REQUIRED and not self.justification.strip():
            raise ValidationError(
                f"answer {self.answer.value} to {self.question_id!r} requires a justification"
            )

    def to_doc(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "answer": self.answer.value,
            "justification": self.justification,
            "evidence_refs": list(self.evidence_refs),
            "answered_by": self.answered_by,
            "timestamp": format_timestamp(self.timestamp) if self.timestamp else None,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "QuestionResponse":
        ts = doc.get("timestamp")
        return QuestionResponse(
            question_id=doc["question_id"],
            answer=Answer(doc["answer"]),
            justification=doc.get("justification", ""),
            evidence_refs=tuple(doc.get("evidence_refs", ())),
            answered_by=doc.get("answered_by", ""),
            timestamp=parse_timestamp(ts) if ts else None,
        )


@dataclass(frozen=True)
class MitigationRecommendation:
    id: str
    text: str
    mandatory: bool = False
    status: MitigationStatus = MitigationStatus.OPEN
    waiver_rationale: str = ""

    def validate(self) -> None:
        if self.status == MitigationStatus.WAIVED and not self.waiver_rationale.strip():
            raise ValidationError(f"waived mitigation {self.id!r} requires a waiver rationale")

    def with_status(self, status: MitigationStatus, rationale: str = "") -> "MitigationRecommendation":
        updated = replace(self, status=status, waiver_rationale=rationale)
        updated.validate()
        return updated

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "mandatory": self.mandatory,
            "status": self.status.value,
            "waiver_rationale": self.waiver_rationale,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "MitigationRecommendation":
        return MitigationRecommendation(
            id=doc["id"],
            text=doc["text"],
            mandatory=bool(doc.get("mandatory", False)),
            status=MitigationStatus(doc.get("status", "Open")),
            waiver_rationale=doc.get("waiver_rationale", ""),
        )


@dataclass(frozen=True)
class EthicalConcern:
    requirement: Requirement
    triggering_responses: tuple[str, ...]
    severity: Severity
    recommendations: tuple[MitigationRecommendation, ...] = ()
    severity_override_rationale: str = ""

    def to_doc(self) -> dict[str, Any]:
        return {
            "requirement": self.requirement.value,
            "triggering_responses": list(self.triggering_responses),
            "severity": self.severity.value,
            "recommendations": [r.to_doc() for r in self.recommendations],
            "severity_override_rationale": self.severity_override_rationale,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "EthicalConcern":
        return EthicalConcern(
            requirement=Requirement(doc["requirement"]),
            triggering_responses=tuple(doc["triggering_responses"]),
            severity=Severity(doc["severity"]),
            recommendations=tuple(
                MitigationRecommendation.from_doc(r) for r in doc.get("recommendations", ())
            ),
            severity_override_rationale=doc.get("severity_override_rationale", ""),
        )


def derive_severity(
    flagged: Sequence[QuestionResponse], questions: Mapping[str, RiskQuestion]
) -> Severity:
    """Mechanical severity: any No on a mandatory question is Major; flags that
    are only Partial/Unknown are Advisory; everything else is Info."""
    if any(
        r.answer == Answer.NO and questions[r.question_id].mandatory for r in flagged
    ):
        return Severity.MAJOR
    if all(r.answer in (Answer.PARTIAL, Answer.UNKNOWN) for r in flagged):
        return Severity.ADVISORY
    return Severity.INFO


def derive_concerns(
    retained: Sequence[RiskQuestion],
    current_responses: Mapping[str, QuestionResponse],
    deferred: Iterable[str] = (),
    *,
    severity_overrides: Mapping[Requirement, tuple[Severity, str]] | None = None,
    recommendations: Mapping[Requirement, Sequence[MitigationRecommendation]] | None = None,
) -> list[EthicalConcern]:
    """One concern per requirement with at least one flagged response.

    Requires every retained question to be answered or explicitly deferred.
    Output ordering is fixed (requirement declaration order) so identical
    response sets always derive identical concern lists.
    """
    deferred_set = set(deferred)
    unresolved = [
        q.id for q in retained if q.id not in current_responses and q.id not in deferred_set
    ]
    if unresolved:
        raise ValidationError(
            "cannot derive concerns with unanswered, undeferred questions",
            [f"question {qid!r} is unanswered" for qid in sorted(unresolved)],
        )
    by_id = {q.id: q for q in retained}
    overrides = severity_overrides or {}
    recs = recommendations or {}

    flagged_by_requirement: dict[Requirement, list[QuestionResponse]] = {}
    for question in retained:
        response = current_responses.get(question.id)
        if response is not None and response.flagged:
            flagged_by_requirement.setdefault(question.requirement, []).append(response)

    concerns: list[EthicalConcern] = []
    for requirement in Requirement:
        flagged = flagged_by_requirement.get(requirement)
        if not flagged:
            continue
        severity = derive_severity(flagged, by_id)
        override_rationale = ""
        if requirement in overrides:
            severity, override_rationale = overrides[requirement]
        concerns.append(
            EthicalConcern(
                requirement=requirement,
                triggering_responses=tuple(sorted(r.question_id for r in flagged)),
                severity=severity,
                recommendations=tuple(recs.get(requirement, ())),
                severity_override_rationale=override_rationale,
            )
        )
    return concerns
