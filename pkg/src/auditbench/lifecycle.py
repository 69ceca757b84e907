"""Lifecycle model: the four-phase step map that scopes an audit.

A :class:`LifecycleModel` is an immutable value. Scoping decisions are
recorded as :class:`StepAssessment` entries; each write bumps the model
revision and is kept in an append-only history, so the current status of a
step is always "last writer wins" and the full decision trail survives.

Statuses render to a fixed color code that is part of the wire contract:
``InScope`` is blue, ``NotRelevant`` yellow, ``NotAuditable`` white and
``Pending`` grey. Coverage is the fraction of steps actually audited among
those that were expected to be auditable: blue / (blue + white + pending).
Steps ruled not relevant are excluded from the denominator entirely, and an
empty denominator yields an undefined coverage rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping

from .canonical import format_fraction, format_timestamp, parse_timestamp
from .errors import ConflictError, NotFoundError, ValidationError

DEFAULT_TEMPLATE_NAME = "default"


class StepStatus(str, Enum):
    PENDING = "Pending"
    IN_SCOPE = "InScope"
    NOT_RELEVANT = "NotRelevant"
    NOT_AUDITABLE = "NotAuditable"


#: Fixed status -> color mapping (wire contract).
STATUS_COLORS: Mapping[StepStatus, str] = {
    StepStatus.IN_SCOPE: "blue",
    StepStatus.NOT_RELEVANT: "yellow",
    StepStatus.NOT_AUDITABLE: "white",
    StepStatus.PENDING: "grey",
}


def status_color(status: StepStatus) -> str:
    return STATUS_COLORS[status]


@dataclass(frozen=True)
class Step:
    """One auditable step of a lifecycle phase."""

    id: str
    title: str
    expected_artifacts: tuple[str, ...] = ()
    owner: str | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "expected_artifacts": list(self.expected_artifacts),
            "owner": self.owner,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "Step":
        return Step(
            id=doc["id"],
            title=doc["title"],
            expected_artifacts=tuple(doc.get("expected_artifacts", ())),
            owner=doc.get("owner"),
        )


@dataclass(frozen=True)
class Phase:
    id: str
    title: str
    steps: tuple[Step, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "steps": [step.to_doc() for step in self.steps],
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "Phase":
        return Phase(
            id=doc["id"],
            title=doc["title"],
            steps=tuple(Step.from_doc(s) for s in doc["steps"]),
        )


@dataclass(frozen=True)
class StepAssessment:
    """A scoping decision for one step, made against a known model revision."""

    step_id: str
    status: StepStatus
    rationale: str
    assessed_by: str
    timestamp: datetime
    expected_revision: int

    @property
    def color(self) -> str:
        return status_color(self.status)

    def to_doc(self) -> dict[str, Any]:
        return {
            "step_id": self.step_id,
            "status": self.status.value,
            "color": self.color,
            "rationale": self.rationale,
            "assessed_by": self.assessed_by,
            "timestamp": format_timestamp(self.timestamp),
            "expected_revision": self.expected_revision,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "StepAssessment":
        return StepAssessment(
            step_id=doc["step_id"],
            status=StepStatus(doc["status"]),
            rationale=doc["rationale"],
            assessed_by=doc["assessed_by"],
            timestamp=parse_timestamp(doc["timestamp"]),
            expected_revision=doc["expected_revision"],
        )


@dataclass(frozen=True)
class LifecycleModel:
    """Immutable lifecycle model plus its scoping history."""

    template: str
    phases: tuple[Phase, ...]
    revision: int = 1
    history: tuple[StepAssessment, ...] = ()

    def step_ids(self) -> tuple[str, ...]:
        return tuple(step.id for phase in self.phases for step in phase.steps)

    def find_step(self, step_id: str) -> tuple[Phase, Step]:
        for phase in self.phases:
            for step in phase.steps:
                if step.id == step_id:
                    return phase, step
        raise NotFoundError(f"unknown step id: {step_id}")

    def has_step(self, step_id: str) -> bool:
        return any(step.id == step_id for phase in self.phases for step in phase.steps)

    def current_assessments(self) -> dict[str, StepAssessment]:
        """Latest assessment per existing step; unassessed steps are absent."""
        existing = set(self.step_ids())
        current: dict[str, StepAssessment] = {}
        for assessment in self.history:
            if assessment.step_id in existing:
                current[assessment.step_id] = assessment
        return current

    def current_status(self, step_id: str) -> StepStatus:
        if not self.has_step(step_id):
            raise NotFoundError(f"unknown step id: {step_id}")
        status = StepStatus.PENDING
        for assessment in self.history:
            if assessment.step_id == step_id:
                status = assessment.status
        return status

    def status_map(self) -> dict[str, StepStatus]:
        statuses = {step_id: StepStatus.PENDING for step_id in self.step_ids()}
        for assessment in self.history:
            if assessment.step_id in statuses:
                statuses[assessment.step_id] = assessment.status
        return statuses

    def color_map(self) -> dict[str, str]:
        return {step_id: status_color(s) for step_id, s in self.status_map().items()}

    def in_scope_steps(self) -> tuple[str, ...]:
        statuses = self.status_map()
        return tuple(s for s in self.step_ids() if statuses[s] == StepStatus.IN_SCOPE)

    def to_doc(self, *, include_history: bool = True) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "template": self.template,
            "revision": self.revision,
            "phases": [phase.to_doc() for phase in self.phases],
            "statuses": {
                step_id: {"status": status.value, "color": status_color(status)}
                for step_id, status in self.status_map().items()
            },
        }
        if include_history:
            doc["history"] = [a.to_doc() for a in self.history]
        return doc

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "LifecycleModel":
        return LifecycleModel(
            template=doc["template"],
            phases=tuple(Phase.from_doc(p) for p in doc["phases"]),
            revision=doc["revision"],
            history=tuple(StepAssessment.from_doc(a) for a in doc.get("history", ())),
        )


@dataclass(frozen=True)
class PhaseCoverage:
    blue: int
    yellow: int
    white: int
    pending: int
    fraction: Fraction | None

    def to_doc(self) -> dict[str, Any]:
        return {
            "blue": self.blue,
            "yellow": self.yellow,
            "white": self.white,
            "pending": self.pending,
            "fraction": format_fraction(self.fraction),
        }


@dataclass(frozen=True)
class CoverageReport:
    per_phase: Mapping[str, PhaseCoverage] = field(default_factory=dict)
    overall: Fraction | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "per_phase": {pid: pc.to_doc() for pid, pc in self.per_phase.items()},
            "overall": format_fraction(self.overall),
        }


# ---------------------------------------------------------------------------
# Default template
# ---------------------------------------------------------------------------

def _steps(*rows: tuple[str, str, tuple[str, ...]]) -> tuple[Step, ...]:
    return tuple(Step(id=sid, title=title, expected_artifacts=arts) for sid, title, arts in rows)


_DEFAULT_PHASES: tuple[Phase, ...] = (
    Phase(
        id="formulation",
        title="System Formulation",
        steps=_steps(
            ("goals", "Goals", ("document",)),
            ("legacy_systems", "Legacy systems", ("document",)),
            ("evaluation_metrics", "Evaluation metrics", ("document",)),
            ("system_subjects", "System subjects", ("document",)),
            ("system_users", "System users", ("document",)),
            ("societal_context", "Societal context", ("document",)),
            ("user_experience", "User experience", ("document",)),
            ("security_assessment", "Security assessment", ("document",)),
            ("impact_assessment", "Impact assessment", ("document",)),
        ),
    ),
    Phase(
        id="data",
        title="Data Management",
        steps=_steps(
            ("data_specification", "Data specification", ("datasheet", "document")),
            ("data_collection", "Data collection", ("datasheet",)),
            ("curation", "Data curation", ("datasheet",)),
            ("processing", "Data processing", ("document",)),
            ("extraction", "Data extraction", ("document",)),
            ("data_quality_assessment", "Data quality assessment", ("document", "query_result")),
        ),
    ),
    Phase(
        id="model",
        title="Model Management",
        steps=_steps(
            ("model_specification", "Model specification", ("model_card", "document")),
            ("feature_engineering", "Feature engineering", ("document",)),
            ("training_optimisation", "Training/Optimisation", ("model_card", "log_extract")),
            ("validation_interpretation", "Validation/Interpretation", ("document", "query_result")),
            ("model_quality_assessment", "Model quality assessment", ("document", "query_result")),
        ),
    ),
    Phase(
        id="deployment",
        title="Deployment/Operationalisation",
        steps=_steps(
            ("sandboxing", "Sandboxing", ("log_extract", "document")),
            ("operational_logging", "Operational logging", ("log_extract",)),
            ("continuous_testing", "Continuous testing", ("log_extract", "query_result")),
            ("reliability_assessment", "Reliability assessment", ("document",)),
            ("black_box_auditing", "Black-box auditing", ("query_result",)),
            ("post_market_analysis", "Post-market analysis", ("document", "log_extract")),
        ),
    ),
)


def instantiate_template() -> LifecycleModel:
    """Build the default four-phase model with every step unassessed."""
    model = LifecycleModel(template=DEFAULT_TEMPLATE_NAME, phases=_DEFAULT_PHASES)
    _validate_structure(model)
    return model


def _validate_structure(model: LifecycleModel) -> None:
    problems: list[str] = []
    seen: set[str] = set()
    for phase in model.phases:
        if not phase.steps:
            problems.append(f"phase {phase.id!r} has no steps")
        for step in phase.steps:
            if step.id in seen:
                problems.append(f"duplicate step id: {step.id!r}")
            seen.add(step.id)
    if problems:
        raise ValidationError("invalid lifecycle model", problems)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def assess_step(model: LifecycleModel, assessment: StepAssessment) -> LifecycleModel:
    """Record a scoping decision; returns a new model revision.

    The assessment must carry the revision the caller last saw; a mismatch is
    a concurrent-edit conflict. Every write lands in the history even when it
    repeats the current status.
    """
    if not model.has_step(assessment.step_id):
        raise NotFoundError(f"unknown step id: {assessment.step_id}")
    if assessment.expected_revision != model.revision:
        raise ConflictError(
            f"lifecycle:{model.template}", assessment.expected_revision, model.revision
        )
    if assessment.status != StepStatus.PENDING and not assessment.rationale.strip():
        raise ValidationError(
            f"assessment of {assessment.step_id!r} with status "
            f"{assessment.status.value} requires a rationale"
        )
    return replace(
        model,
        revision=model.revision + 1,
        history=model.history + (assessment,),
    )


def set_step_owner(model: LifecycleModel, step_id: str, owner: str | None) -> LifecycleModel:
    """Assign or clear the accountable owner of a step."""
    phase, step = model.find_step(step_id)
    new_step = replace(step, owner=owner)
    new_phase = replace(
        phase, steps=tuple(new_step if s.id == step_id else s for s in phase.steps)
    )
    phases = tuple(new_phase if p.id == phase.id else p for p in model.phases)
    return replace(model, phases=phases, revision=model.revision + 1)


def add_step(
    model: LifecycleModel,
    phase_id: str,
    step: Step,
    *,
    template: str | None = None,
) -> LifecycleModel:
    """Add a custom step under an existing parent phase.

    Customizing the frozen default template forks it: the result carries a
    new template name (``template`` or ``"<old>+custom"``).
    """
    if model.has_step(step.id):
        raise ValidationError(f"duplicate step id: {step.id!r}")
    target = next((p for p in model.phases if p.id == phase_id), None)
    if target is None:
        raise NotFoundError(f"unknown phase id: {phase_id}")
    new_phase = replace(target, steps=target.steps + (step,))
    phases = tuple(new_phase if p.id == phase_id else p for p in model.phases)
    name = template or _custom_name(model.template)
    return replace(model, template=name, phases=phases, revision=model.revision + 1)


def remove_step(
    model: LifecycleModel, step_id: str, *, template: str | None = None
) -> LifecycleModel:
    """Remove a step. Its assessment history is retained but no longer counted."""
    phase, _ = model.find_step(step_id)
    remaining = tuple(s for s in phase.steps if s.id != step_id)
    if not remaining:
        raise ValidationError(f"cannot remove last step of phase {phase.id!r}")
    new_phase = replace(phase, steps=remaining)
    phases = tuple(new_phase if p.id == phase.id else p for p in model.phases)
    name = template or _custom_name(model.template)
    return replace(model, template=name, phases=phases, revision=model.revision + 1)


def _custom_name(current: str) -> str:
    return current if current.endswith("+custom") else f"{current}+custom"


def _phase_coverage(statuses: Iterable[StepStatus]) -> PhaseCoverage:
    blue = yellow = white = pending = 0
    for status in statuses:
        if status == StepStatus.IN_SCOPE:
            blue += 1
        elif status == StepStatus.NOT_RELEVANT:
            yellow += 1
        elif status == StepStatus.NOT_AUDITABLE:
            white += 1
        else:
            pending += 1
    denominator = blue + white + pending
    fraction = Fraction(blue, denominator) if denominator else None
    return PhaseCoverage(blue=blue, yellow=yellow, white=white, pending=pending, fraction=fraction)


def coverage(model: LifecycleModel) -> CoverageReport:
    """Audit coverage per phase and overall.

    Coverage counts audited (blue) steps against everything that was expected
    to be auditable: blue + white + pending. Not-relevant steps never enter
    the denominator. A zero denominator yields ``None`` (undefined), never a
    division error.
    """
    statuses = model.status_map()
    per_phase: dict[str, PhaseCoverage] = {}
    for phase in model.phases:
        per_phase[phase.id] = _phase_coverage(statuses[s.id] for s in phase.steps)
    overall = _phase_coverage(statuses.values())
    return CoverageReport(per_phase=per_phase, overall=overall.fraction)


def coverage_from_statuses(
    phase_steps: Mapping[str, Iterable[str]],
    statuses: Mapping[str, StepStatus],
) -> CoverageReport:
    """Coverage over a frozen scope snapshot instead of a live model."""
    per_phase: dict[str, PhaseCoverage] = {}
    all_statuses: list[StepStatus] = []
    for phase_id, step_ids in phase_steps.items():
        phase_statuses = [statuses.get(s, StepStatus.PENDING) for s in step_ids]
        all_statuses.extend(phase_statuses)
        per_phase[phase_id] = _phase_coverage(phase_statuses)
    overall = _phase_coverage(all_statuses)
    return CoverageReport(per_phase=per_phase, overall=overall.fraction)
