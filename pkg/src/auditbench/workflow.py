"""Audit aggregate: kinds, iterations, gated phase transitions, triggers.

An :class:`Audit` is an immutable aggregate. Every mutating operation
returns a new value with the revision bumped; the service layer maps that
onto an optimistic-concurrency store. Each audit runs as a sequence of
iterations, at most one of which is open (not yet Reported) at any time.

An iteration walks Planning -> Fieldwork -> Reporting -> Reported, forward
only, and each gate refuses to advance until its conditions hold, reporting
every unmet condition at once:

* Planning -> Fieldwork: a non-empty scope and an Auditable verdict from the
  pre-fieldwork auditability check (or an explicit waiver with rationale).
  Leaving Planning freezes the scope snapshot.
* Fieldwork -> Reporting: every retained question answered or deferred with
  rationale.
* Reporting -> Reported: a compiled report, and every mandatory mitigation
  carried over from the previous iteration resolved (implemented or waived).

Re-audit triggers (periodic schedule, new deployment context, accumulated
negative feedback) fire once the audit has at least one reported iteration,
opening the next iteration in Planning and recording the cause.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from . import lifecycle as lc
from .canonical import digest_doc, format_timestamp, new_id, parse_timestamp
from .errors import GateError, NotFoundError, ValidationError
from .fieldwork import (
    AccessBasis,
    AssuranceNode,
    AssuranceTree,
    AssuranceValidation,
    EvidenceItem,
    TestRecord,
    validate_assurance_nodes,
    validate_evidence_registration,
)
from .monitoring import MonitorRun, MonitorSpec
from .risk_assessment import (
    EthicalConcern,
    MitigationRecommendation,
    MitigationStatus,
    QuestionDB,
    QuestionResponse,
    Requirement,
    RiskQuestion,
    Severity,
    derive_concerns,
    filter_questions,
)


class AuditKind(str, Enum):
    FIRST_PARTY = "FirstParty"
    SECOND_PARTY = "SecondParty"
    THIRD_PARTY = "ThirdParty"
    BLACK_BOX = "BlackBox"

    @property
    def internal_access(self) -> bool:
        """Black-box auditors only see what a regular user sees."""
        return self is not AuditKind.BLACK_BOX


class IterationPhase(str, Enum):
    PLANNING = "Planning"
    FIELDWORK = "Fieldwork"
    REPORTING = "Reporting"
    REPORTED = "Reported"


#: The legal forward transitions, in walking order.
PHASE_SEQUENCE: tuple[IterationPhase, ...] = (
    IterationPhase.PLANNING,
    IterationPhase.FIELDWORK,
    IterationPhase.REPORTING,
    IterationPhase.REPORTED,
)


class TriggerKind(str, Enum):
    PERIODIC = "Periodic"
    NEW_DEPLOYMENT_CONTEXT = "NewDeploymentContext"
    NEGATIVE_FEEDBACK_THRESHOLD = "NegativeFeedbackThreshold"


class EventKind(str, Enum):
    CLOCK_TICK = "ClockTick"
    DEPLOYMENT_CONTEXT_CHANGE = "DeploymentContextChange"
    NEGATIVE_FEEDBACK = "NegativeFeedback"


_EVENT_FOR_TRIGGER: Mapping[TriggerKind, EventKind] = {
    TriggerKind.PERIODIC: EventKind.CLOCK_TICK,
    TriggerKind.NEW_DEPLOYMENT_CONTEXT: EventKind.DEPLOYMENT_CONTEXT_CHANGE,
    TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD: EventKind.NEGATIVE_FEEDBACK,
}


@dataclass(frozen=True)
class ReauditTrigger:
    id: str
    kind: TriggerKind
    interval: int | None = None  # ticks, for Periodic
    threshold: int | None = None  # feedback count, for NegativeFeedbackThreshold
    counter: int = 0
    fired_count: int = 0

    def validate(self) -> None:
        if self.kind == TriggerKind.PERIODIC and (self.interval is None or self.interval <= 0):
            raise ValidationError(f"trigger {self.id!r}: periodic interval must be positive")
        if self.kind == TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD and (
            self.threshold is None or self.threshold <= 0
        ):
            raise ValidationError(f"trigger {self.id!r}: feedback threshold must be positive")

    def describe(self) -> str:
        if self.kind == TriggerKind.PERIODIC:
            return f"periodic schedule: re-audit every {self.interval} tick(s)"
        if self.kind == TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD:
            return f"event-based: re-audit after {self.threshold} negative feedback report(s)"
        return "event-based: re-audit on deployment into a new context"

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "interval": self.interval,
            "threshold": self.threshold,
            "counter": self.counter,
            "fired_count": self.fired_count,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "ReauditTrigger":
        return ReauditTrigger(
            id=doc["id"],
            kind=TriggerKind(doc["kind"]),
            interval=doc.get("interval"),
            threshold=doc.get("threshold"),
            counter=doc.get("counter", 0),
            fired_count=doc.get("fired_count", 0),
        )


@dataclass(frozen=True)
class AuditEvent:
    kind: EventKind
    note: str
    at: datetime

    def to_doc(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "note": self.note, "at": format_timestamp(self.at)}

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "AuditEvent":
        return AuditEvent(
            kind=EventKind(doc["kind"]), note=doc.get("note", ""), at=parse_timestamp(doc["at"])
        )


@dataclass(frozen=True)
class TransitionEvent:
    iteration_index: int
    from_phase: IterationPhase
    to_phase: IterationPhase
    actor: str
    at: datetime

    def to_doc(self) -> dict[str, Any]:
        return {
            "iteration_index": self.iteration_index,
            "from_phase": self.from_phase.value,
            "to_phase": self.to_phase.value,
            "actor": self.actor,
            "at": format_timestamp(self.at),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "TransitionEvent":
        return TransitionEvent(
            iteration_index=doc["iteration_index"],
            from_phase=IterationPhase(doc["from_phase"]),
            to_phase=IterationPhase(doc["to_phase"]),
            actor=doc["actor"],
            at=parse_timestamp(doc["at"]),
        )


@dataclass(frozen=True)
class EvidenceSourceDeclaration:
    """Planning-time declaration that evidence for a step is reachable."""

    step_id: str
    description: str
    access_basis: AccessBasis
    declared_by: str = ""

    def to_doc(self) -> dict[str, Any]:
        return {
            "step_id": self.step_id,
            "description": self.description,
            "access_basis": self.access_basis.value,
            "declared_by": self.declared_by,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "EvidenceSourceDeclaration":
        return EvidenceSourceDeclaration(
            step_id=doc["step_id"],
            description=doc["description"],
            access_basis=AccessBasis(doc["access_basis"]),
            declared_by=doc.get("declared_by", ""),
        )


@dataclass(frozen=True)
class Waiver:
    rationale: str
    actor: str
    at: datetime

    def to_doc(self) -> dict[str, Any]:
        return {"rationale": self.rationale, "actor": self.actor, "at": format_timestamp(self.at)}

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "Waiver":
        return Waiver(rationale=doc["rationale"], actor=doc["actor"], at=parse_timestamp(doc["at"]))


@dataclass(frozen=True)
class Deferral:
    question_id: str
    rationale: str
    actor: str

    def to_doc(self) -> dict[str, Any]:
        return {"question_id": self.question_id, "rationale": self.rationale, "actor": self.actor}

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "Deferral":
        return Deferral(
            question_id=doc["question_id"],
            rationale=doc["rationale"],
            actor=doc.get("actor", ""),
        )


@dataclass(frozen=True)
class StepAuditability:
    step_id: str
    owner_assigned: bool
    evidence_source_available: bool
    blockers: tuple[str, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "step_id": self.step_id,
            "owner_assigned": self.owner_assigned,
            "evidence_source_available": self.evidence_source_available,
            "blockers": list(self.blockers),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "StepAuditability":
        return StepAuditability(
            step_id=doc["step_id"],
            owner_assigned=doc["owner_assigned"],
            evidence_source_available=doc["evidence_source_available"],
            blockers=tuple(doc.get("blockers", ())),
        )


@dataclass(frozen=True)
class AuditabilityReport:
    steps: tuple[StepAuditability, ...]
    auditable: bool

    @property
    def blockers(self) -> tuple[str, ...]:
        collected: list[str] = []
        for step in self.steps:
            collected.extend(f"{step.step_id}: {b}" for b in step.blockers)
        return tuple(collected)

    def to_doc(self) -> dict[str, Any]:
        return {
            "steps": [s.to_doc() for s in self.steps],
            "verdict": "Auditable" if self.auditable else "NotAuditable",
            "blockers": list(self.blockers),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "AuditabilityReport":
        return AuditabilityReport(
            steps=tuple(StepAuditability.from_doc(s) for s in doc["steps"]),
            auditable=doc["verdict"] == "Auditable",
        )


@dataclass(frozen=True)
class ScopeSnapshot:
    """Frozen copy of the scoping state at the moment fieldwork began."""

    model_revision: int
    phases: tuple[tuple[str, str, tuple[str, ...]], ...]  # (phase id, title, step ids)
    step_meta: Mapping[str, dict[str, Any]]  # step id -> {title, owner, expected_artifacts}
    statuses: Mapping[str, lc.StepAssessment | None]
    in_scope: tuple[str, ...]
    retained_questions: tuple[str, ...]
    questionnaire_digest: str

    def status_map(self) -> dict[str, lc.StepStatus]:
        return {
            step_id: (a.status if a is not None else lc.StepStatus.PENDING)
            for step_id, a in self.statuses.items()
        }

    def coverage(self) -> lc.CoverageReport:
        phase_steps = {pid: step_ids for pid, _, step_ids in self.phases}
        return lc.coverage_from_statuses(phase_steps, self.status_map())

    def to_doc(self) -> dict[str, Any]:
        return {
            "model_revision": self.model_revision,
            "phases": [
                {"id": pid, "title": title, "steps": list(step_ids)}
                for pid, title, step_ids in self.phases
            ],
            "step_meta": {k: dict(v) for k, v in self.step_meta.items()},
            "statuses": {
                step_id: (a.to_doc() if a is not None else None)
                for step_id, a in self.statuses.items()
            },
            "in_scope": list(self.in_scope),
            "retained_questions": list(self.retained_questions),
            "questionnaire_digest": self.questionnaire_digest,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "ScopeSnapshot":
        return ScopeSnapshot(
            model_revision=doc["model_revision"],
            phases=tuple(
                (p["id"], p["title"], tuple(p["steps"])) for p in doc["phases"]
            ),
            step_meta={k: dict(v) for k, v in doc["step_meta"].items()},
            statuses={
                step_id: (lc.StepAssessment.from_doc(a) if a is not None else None)
                for step_id, a in doc["statuses"].items()
            },
            in_scope=tuple(doc["in_scope"]),
            retained_questions=tuple(doc["retained_questions"]),
            questionnaire_digest=doc["questionnaire_digest"],
        )


@dataclass(frozen=True)
class RecommendationLink:
    """Ties a mitigation recommendation to the concern (or auditor note) it
    answers."""

    recommendation_id: str
    requirement: Requirement | None = None
    note: str = ""

    def to_doc(self) -> dict[str, Any]:
        return {
            "recommendation_id": self.recommendation_id,
            "requirement": self.requirement.value if self.requirement else None,
            "note": self.note,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "RecommendationLink":
        req = doc.get("requirement")
        return RecommendationLink(
            recommendation_id=doc["recommendation_id"],
            requirement=Requirement(req) if req else None,
            note=doc.get("note", ""),
        )


@dataclass(frozen=True)
class AuditIteration:
    index: int
    phase: IterationPhase = IterationPhase.PLANNING
    opened_cause: str = "initial"
    scope: ScopeSnapshot | None = None
    evidence_sources: tuple[EvidenceSourceDeclaration, ...] = ()
    auditability_waiver: Waiver | None = None
    auditability_result: AuditabilityReport | None = None
    responses: tuple[QuestionResponse, ...] = ()  # append-only; last per question wins
    deferrals: tuple[Deferral, ...] = ()
    evidence: tuple[EvidenceItem, ...] = ()
    tests: tuple[TestRecord, ...] = ()
    assurance: AssuranceTree | None = None
    assurance_validation: AssuranceValidation | None = None
    monitor_specs: tuple[MonitorSpec, ...] = ()
    monitor_runs: tuple[MonitorRun, ...] = ()
    concerns: tuple[EthicalConcern, ...] | None = None
    severity_overrides: tuple[tuple[Requirement, Severity, str], ...] = ()
    recommendation_links: tuple[RecommendationLink, ...] = ()
    report: dict[str, Any] | None = None

    def current_responses(self) -> dict[str, QuestionResponse]:
        current: dict[str, QuestionResponse] = {}
        for response in self.responses:
            current[response.question_id] = response
        return current

    def deferred_ids(self) -> set[str]:
        return {d.question_id for d in self.deferrals}

    def evidence_by_id(self) -> dict[str, EvidenceItem]:
        return {e.id: e for e in self.evidence}

    def to_doc(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "phase": self.phase.value,
            "opened_cause": self.opened_cause,
            "scope": self.scope.to_doc() if self.scope else None,
            "evidence_sources": [d.to_doc() for d in self.evidence_sources],
            "auditability_waiver": (
                self.auditability_waiver.to_doc() if self.auditability_waiver else None
            ),
            "auditability_result": (
                self.auditability_result.to_doc() if self.auditability_result else None
            ),
            "responses": [r.to_doc() for r in self.responses],
            "deferrals": [d.to_doc() for d in self.deferrals],
            "evidence": [e.to_doc() for e in self.evidence],
            "tests": [t.to_doc() for t in self.tests],
            "assurance": self.assurance.to_doc() if self.assurance else None,
            "assurance_validation": (
                self.assurance_validation.to_doc() if self.assurance_validation else None
            ),
            "monitor_specs": [s.to_doc() for s in self.monitor_specs],
            "monitor_runs": [r.to_doc() for r in self.monitor_runs],
            "concerns": [c.to_doc() for c in self.concerns] if self.concerns is not None else None,
            "severity_overrides": [
                {"requirement": r.value, "severity": s.value, "rationale": why}
                for r, s, why in self.severity_overrides
            ],
            "recommendation_links": [l.to_doc() for l in self.recommendation_links],
            "report": self.report,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "AuditIteration":
        concerns_doc = doc.get("concerns")
        return AuditIteration(
            index=doc["index"],
            phase=IterationPhase(doc["phase"]),
            opened_cause=doc.get("opened_cause", "initial"),
            scope=ScopeSnapshot.from_doc(doc["scope"]) if doc.get("scope") else None,
            evidence_sources=tuple(
                EvidenceSourceDeclaration.from_doc(d) for d in doc.get("evidence_sources", ())
            ),
            auditability_waiver=(
                Waiver.from_doc(doc["auditability_waiver"])
                if doc.get("auditability_waiver")
                else None
            ),
            auditability_result=(
                AuditabilityReport.from_doc(doc["auditability_result"])
                if doc.get("auditability_result")
                else None
            ),
            responses=tuple(QuestionResponse.from_doc(r) for r in doc.get("responses", ())),
            deferrals=tuple(Deferral.from_doc(d) for d in doc.get("deferrals", ())),
            evidence=tuple(EvidenceItem.from_doc(e) for e in doc.get("evidence", ())),
            tests=tuple(TestRecord.from_doc(t) for t in doc.get("tests", ())),
            assurance=AssuranceTree.from_doc(doc["assurance"]) if doc.get("assurance") else None,
            assurance_validation=(
                AssuranceValidation(
                    root_id=doc["assurance_validation"]["root_id"],
                    unsupported_leaves=tuple(doc["assurance_validation"]["unsupported_leaves"]),
                    open_challenges=tuple(doc["assurance_validation"]["open_challenges"]),
                    unreferenced_evidence=tuple(
                        doc["assurance_validation"]["unreferenced_evidence"]
                    ),
                )
                if doc.get("assurance_validation")
                else None
            ),
            monitor_specs=tuple(MonitorSpec.from_doc(s) for s in doc.get("monitor_specs", ())),
            monitor_runs=tuple(MonitorRun.from_doc(r) for r in doc.get("monitor_runs", ())),
            concerns=(
                tuple(EthicalConcern.from_doc(c) for c in concerns_doc)
                if concerns_doc is not None
                else None
            ),
            severity_overrides=tuple(
                (Requirement(o["requirement"]), Severity(o["severity"]), o.get("rationale", ""))
                for o in doc.get("severity_overrides", ())
            ),
            recommendation_links=tuple(
                RecommendationLink.from_doc(l) for l in doc.get("recommendation_links", ())
            ),
            report=doc.get("report"),
        )


@dataclass(frozen=True)
class Audit:
    id: str
    title: str
    kind: AuditKind
    target_system: str
    model: lc.LifecycleModel
    revision: int = 1
    question_db: QuestionDB | None = None
    iterations: tuple[AuditIteration, ...] = ()
    triggers: tuple[ReauditTrigger, ...] = ()
    carried_mitigations: tuple[str, ...] = ()
    mitigations: tuple[MitigationRecommendation, ...] = ()
    transitions: tuple[TransitionEvent, ...] = ()
    events: tuple[AuditEvent, ...] = ()
    register_refs: tuple[str, ...] = ()

    def open_iteration(self) -> AuditIteration | None:
        open_ones = [it for it in self.iterations if it.phase != IterationPhase.REPORTED]
        if len(open_ones) > 1:  # enforced by construction; belt and braces
            raise ValidationError(f"audit {self.id!r} has more than one open iteration")
        return open_ones[0] if open_ones else None

    def require_open_iteration(self) -> AuditIteration:
        iteration = self.open_iteration()
        if iteration is None:
            raise GateError(f"audit {self.id!r} has no open iteration", ["no open iteration"])
        return iteration

    def mitigation_by_id(self) -> dict[str, MitigationRecommendation]:
        return {m.id: m for m in self.mitigations}

    def retained_questions(self, iteration: AuditIteration) -> list[RiskQuestion]:
        if iteration.scope is None or self.question_db is None:
            return []
        by_id = self.question_db.by_id()
        return [by_id[qid] for qid in iteration.scope.retained_questions if qid in by_id]

    def _replace_iteration(self, iteration: AuditIteration) -> "Audit":
        iterations = tuple(
            iteration if it.index == iteration.index else it for it in self.iterations
        )
        return replace(self, iterations=iterations, revision=self.revision + 1)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "kind": self.kind.value,
            "target_system": self.target_system,
            "revision": self.revision,
            "model": self.model.to_doc(),
            "question_db": self.question_db.to_doc() if self.question_db else None,
            "iterations": [it.to_doc() for it in self.iterations],
            "triggers": [t.to_doc() for t in self.triggers],
            "carried_mitigations": list(self.carried_mitigations),
            "mitigations": [m.to_doc() for m in self.mitigations],
            "transitions": [t.to_doc() for t in self.transitions],
            "events": [e.to_doc() for e in self.events],
            "register_refs": list(self.register_refs),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "Audit":
        return Audit(
            id=doc["id"],
            title=doc["title"],
            kind=AuditKind(doc["kind"]),
            target_system=doc["target_system"],
            revision=doc["revision"],
            model=lc.LifecycleModel.from_doc(doc["model"]),
            question_db=(
                QuestionDB.from_doc(doc["question_db"]) if doc.get("question_db") else None
            ),
            iterations=tuple(AuditIteration.from_doc(it) for it in doc.get("iterations", ())),
            triggers=tuple(ReauditTrigger.from_doc(t) for t in doc.get("triggers", ())),
            carried_mitigations=tuple(doc.get("carried_mitigations", ())),
            mitigations=tuple(
                MitigationRecommendation.from_doc(m) for m in doc.get("mitigations", ())
            ),
            transitions=tuple(TransitionEvent.from_doc(t) for t in doc.get("transitions", ())),
            events=tuple(AuditEvent.from_doc(e) for e in doc.get("events", ())),
            register_refs=tuple(doc.get("register_refs", ())),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def create_audit(
    title: str,
    kind: AuditKind,
    target_system: str,
    model: lc.LifecycleModel | None = None,
    *,
    audit_id: str | None = None,
) -> Audit:
    """New audit with iteration 0 open in Planning."""
    return Audit(
        id=audit_id or new_id("audit"),
        title=title,
        kind=kind,
        target_system=target_system,
        model=model if model is not None else lc.instantiate_template(),
        iterations=(AuditIteration(index=0),),
    )


def attach_question_db(audit: Audit, db: QuestionDB) -> Audit:
    iteration = audit.require_open_iteration()
    if iteration.phase != IterationPhase.PLANNING:
        raise GateError(
            "question database can only be attached during Planning",
            [f"iteration {iteration.index} is in {iteration.phase.value}"],
        )
    return replace(audit, question_db=db, revision=audit.revision + 1)


def assess_step(audit: Audit, assessment: lc.StepAssessment) -> Audit:
    """Record a scoping decision on the audit's lifecycle model."""
    model = lc.assess_step(audit.model, assessment)
    return replace(audit, model=model, revision=audit.revision + 1)


def replace_model(audit: Audit, model: lc.LifecycleModel) -> Audit:
    """Swap in an edited lifecycle model (owner changes, custom steps)."""
    return replace(audit, model=model, revision=audit.revision + 1)


def declare_evidence_source(audit: Audit, declaration: EvidenceSourceDeclaration) -> Audit:
    iteration = audit.require_open_iteration()
    if not audit.model.has_step(declaration.step_id):
        raise NotFoundError(f"unknown step id: {declaration.step_id}")
    updated = replace(
        iteration, evidence_sources=iteration.evidence_sources + (declaration,)
    )
    return audit._replace_iteration(updated)


def waive_auditability(audit: Audit, rationale: str, actor: str, at: datetime) -> Audit:
    if not rationale.strip():
        raise ValidationError("an auditability waiver requires a rationale")
    iteration = audit.require_open_iteration()
    if iteration.phase != IterationPhase.PLANNING:
        raise GateError(
            "auditability can only be waived during Planning",
            [f"iteration {iteration.index} is in {iteration.phase.value}"],
        )
    updated = replace(iteration, auditability_waiver=Waiver(rationale, actor, at))
    return audit._replace_iteration(updated)


def check_auditability(audit: Audit) -> AuditabilityReport:
    """Pre-fieldwork check: each in-scope step needs an accountable owner and
    at least one evidence source the audit's access level can actually reach."""
    iteration = audit.require_open_iteration()
    in_scope = audit.model.in_scope_steps()
    if not in_scope:
        raise ValidationError("auditability check requires at least one in-scope step")

    declared: dict[str, list[EvidenceSourceDeclaration]] = {}
    for declaration in iteration.evidence_sources:
        declared.setdefault(declaration.step_id, []).append(declaration)

    step_reports: list[StepAuditability] = []
    for step_id in in_scope:
        _, step = audit.model.find_step(step_id)
        blockers: list[str] = []
        owner_ok = bool(step.owner and step.owner.strip())
        if not owner_ok:
            blockers.append("no owner assigned")
        sources = declared.get(step_id, [])
        usable = [
            s
            for s in sources
            if audit.kind.internal_access or s.access_basis != AccessBasis.GRANTED_ACCESS
        ]
        source_ok = bool(usable)
        if not sources:
            blockers.append("no declared evidence source or access grant")
        elif not usable:
            blockers.append(
                "black-box audit: every declared source requires internal access"
            )
        step_reports.append(
            StepAuditability(
                step_id=step_id,
                owner_assigned=owner_ok,
                evidence_source_available=source_ok,
                blockers=tuple(blockers),
            )
        )
    return AuditabilityReport(
        steps=tuple(step_reports), auditable=all(not s.blockers for s in step_reports)
    )


def _freeze_scope(audit: Audit) -> ScopeSnapshot:
    model = audit.model
    assessments = model.current_assessments()
    in_scope = model.in_scope_steps()
    retained: list[RiskQuestion] = []
    if audit.question_db is not None and in_scope:
        retained = filter_questions(audit.question_db, in_scope)
    questionnaire_digest = digest_doc([q.to_doc() for q in retained])
    return ScopeSnapshot(
        model_revision=model.revision,
        phases=tuple(
            (phase.id, phase.title, tuple(s.id for s in phase.steps)) for phase in model.phases
        ),
        step_meta={
            step.id: {
                "title": step.title,
                "owner": step.owner,
                "expected_artifacts": list(step.expected_artifacts),
            }
            for phase in model.phases
            for step in phase.steps
        },
        statuses={step_id: assessments.get(step_id) for step_id in model.step_ids()},
        in_scope=in_scope,
        retained_questions=tuple(q.id for q in retained),
        questionnaire_digest=questionnaire_digest,
    )


def _planning_gate(audit: Audit, iteration: AuditIteration) -> list[str]:
    unmet: list[str] = []
    if not audit.model.in_scope_steps():
        unmet.append("empty scope: no step is assessed InScope")
        return unmet
    if iteration.auditability_waiver is not None:
        return unmet
    report = check_auditability(audit)
    if not report.auditable:
        unmet.append("auditability verdict is NotAuditable and no waiver was recorded")
        unmet.extend(report.blockers)
    return unmet


def _fieldwork_gate(audit: Audit, iteration: AuditIteration) -> list[str]:
    unmet: list[str] = []
    answered = set(iteration.current_responses())
    deferred = iteration.deferred_ids()
    assert iteration.scope is not None
    for qid in iteration.scope.retained_questions:
        if qid not in answered and qid not in deferred:
            unmet.append(f"retained question {qid!r} is neither answered nor deferred")
    return unmet


def _reporting_gate(audit: Audit, iteration: AuditIteration) -> list[str]:
    unmet: list[str] = []
    if iteration.report is None:
        unmet.append("no report compiled for this iteration")
    registry = audit.mitigation_by_id()
    for mitigation_id in audit.carried_mitigations:
        mitigation = registry.get(mitigation_id)
        if mitigation is None:
            unmet.append(f"carried mitigation {mitigation_id!r} is unknown")
        elif mitigation.mandatory and mitigation.status == MitigationStatus.OPEN:
            unmet.append(
                f"mandatory mitigation {mitigation_id!r} from the previous iteration is still Open"
            )
    return unmet


def advance_phase(audit: Audit, *, actor: str, at: datetime) -> Audit:
    """Advance the open iteration one phase forward, enforcing the gate."""
    iteration = audit.require_open_iteration()
    position = PHASE_SEQUENCE.index(iteration.phase)
    target = PHASE_SEQUENCE[position + 1]

    if iteration.phase == IterationPhase.PLANNING:
        unmet = _planning_gate(audit, iteration)
    elif iteration.phase == IterationPhase.FIELDWORK:
        unmet = _fieldwork_gate(audit, iteration)
    else:
        unmet = _reporting_gate(audit, iteration)
    if unmet:
        raise GateError(
            f"cannot advance iteration {iteration.index} from "
            f"{iteration.phase.value} to {target.value}",
            unmet,
        )

    updated = replace(iteration, phase=target)
    if iteration.phase == IterationPhase.PLANNING:
        updated = replace(
            updated,
            scope=_freeze_scope(audit),
            auditability_result=check_auditability(audit),
        )
    transition = TransitionEvent(
        iteration_index=iteration.index,
        from_phase=iteration.phase,
        to_phase=target,
        actor=actor,
        at=at,
    )
    advanced = audit._replace_iteration(updated)
    return replace(advanced, transitions=advanced.transitions + (transition,))


def open_iteration(audit: Audit, *, cause: str) -> Audit:
    """Open the next iteration in Planning; only one may be open at a time."""
    if audit.open_iteration() is not None:
        raise GateError(
            f"audit {audit.id!r} already has an open iteration",
            ["at most one iteration may be open"],
        )
    next_index = len(audit.iterations)
    iteration = AuditIteration(index=next_index, opened_cause=cause)
    return replace(
        audit, iterations=audit.iterations + (iteration,), revision=audit.revision + 1
    )


def add_trigger(audit: Audit, trigger: ReauditTrigger) -> Audit:
    trigger.validate()
    if any(t.id == trigger.id for t in audit.triggers):
        raise ValidationError(f"duplicate trigger id: {trigger.id!r}")
    return replace(audit, triggers=audit.triggers + (trigger,), revision=audit.revision + 1)


def record_event(
    audit: Audit, kind: EventKind, *, at: datetime, note: str = ""
) -> tuple[Audit, list[str]]:
    """Ingest one external event; returns the updated audit and the ids of
    triggers that fired.

    Counters always advance. Triggers only fire once the audit has at least
    one reported iteration; a firing opens the next iteration in Planning
    when none is open, and otherwise just records itself.
    """
    has_reported = any(it.phase == IterationPhase.REPORTED for it in audit.iterations)
    fired: list[str] = []
    new_triggers: list[ReauditTrigger] = []
    for trigger in audit.triggers:
        if _EVENT_FOR_TRIGGER[trigger.kind] != kind:
            new_triggers.append(trigger)
            continue
        counter = trigger.counter + 1
        limit = 1
        if trigger.kind == TriggerKind.PERIODIC:
            limit = trigger.interval or 1
        elif trigger.kind == TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD:
            limit = trigger.threshold or 1
        if has_reported and counter >= limit:
            fired.append(trigger.id)
            new_triggers.append(
                replace(trigger, counter=0, fired_count=trigger.fired_count + 1)
            )
        else:
            new_triggers.append(replace(trigger, counter=counter))

    event = AuditEvent(kind=kind, note=note, at=at)
    updated = replace(
        audit,
        triggers=tuple(new_triggers),
        events=audit.events + (event,),
        revision=audit.revision + 1,
    )
    if fired and updated.open_iteration() is None:
        cause = f"triggered by {', '.join(fired)} ({kind.value})"
        updated = open_iteration(updated, cause=cause)
    return updated, fired


# ---------------------------------------------------------------------------
# Fieldwork operations on the aggregate
# ---------------------------------------------------------------------------


def _require_phase(iteration: AuditIteration, *phases: IterationPhase, doing: str) -> None:
    if iteration.phase not in phases:
        allowed = ", ".join(p.value for p in phases)
        raise GateError(
            f"{doing} is only allowed in {allowed}",
            [f"iteration {iteration.index} is in {iteration.phase.value}"],
        )


def register_evidence(audit: Audit, item: EvidenceItem, content: bytes | None = None) -> Audit:
    """Append an immutable evidence item to the open iteration."""
    iteration = audit.require_open_iteration()
    _require_phase(iteration, IterationPhase.FIELDWORK, doing="evidence registration")
    existing = iteration.evidence_by_id()
    if item.id in existing:
        raise ValidationError(f"evidence id {item.id!r} already registered")
    if item.supersedes is not None and item.supersedes not in existing:
        raise NotFoundError(
            f"evidence {item.id!r} supersedes unknown item {item.supersedes!r}"
        )
    validate_evidence_registration(
        item,
        known_step_ids=audit.model.step_ids(),
        black_box=audit.kind == AuditKind.BLACK_BOX,
        content=content,
    )
    updated = replace(iteration, evidence=iteration.evidence + (item,))
    return audit._replace_iteration(updated)


def record_test(audit: Audit, record: TestRecord) -> Audit:
    iteration = audit.require_open_iteration()
    _require_phase(iteration, IterationPhase.FIELDWORK, doing="test recording")
    record.validate()
    if any(t.id == record.id for t in iteration.tests):
        raise ValidationError(f"test id {record.id!r} already recorded")
    known_evidence = iteration.evidence_by_id()
    dangling = [ref for ref in record.evidence_refs if ref not in known_evidence]
    if dangling:
        raise NotFoundError(
            f"test {record.id!r} references unknown evidence: {', '.join(dangling)}"
        )
    updated = replace(iteration, tests=iteration.tests + (record.with_category_warnings(),))
    return audit._replace_iteration(updated)


def build_assurance_argument(
    audit: Audit, nodes: Sequence[AssuranceNode]
) -> tuple[Audit, AssuranceValidation]:
    iteration = audit.require_open_iteration()
    _require_phase(
        iteration, IterationPhase.FIELDWORK, IterationPhase.REPORTING,
        doing="assurance argumentation",
    )
    tree, validation = validate_assurance_nodes(
        nodes, registered_evidence=iteration.evidence_by_id().keys()
    )
    updated = replace(iteration, assurance=tree, assurance_validation=validation)
    return audit._replace_iteration(updated), validation


def record_response(audit: Audit, response: QuestionResponse) -> Audit:
    """Store an answer to a retained question; re-answers supersede but the
    whole answer history is kept. New answers invalidate derived concerns."""
    iteration = audit.require_open_iteration()
    _require_phase(
        iteration, IterationPhase.FIELDWORK, IterationPhase.REPORTING, doing="answer recording"
    )
    response.validate()
    if iteration.scope is None or response.question_id not in iteration.scope.retained_questions:
        raise NotFoundError(
            f"question {response.question_id!r} is not retained in this iteration's scope"
        )
    known_evidence = iteration.evidence_by_id()
    dangling = [ref for ref in response.evidence_refs if ref not in known_evidence]
    if dangling:
        raise NotFoundError(
            f"response to {response.question_id!r} references unknown evidence: "
            f"{', '.join(dangling)}"
        )
    updated = replace(
        iteration, responses=iteration.responses + (response,), concerns=None
    )
    return audit._replace_iteration(updated)


def defer_question(audit: Audit, question_id: str, rationale: str, actor: str) -> Audit:
    iteration = audit.require_open_iteration()
    _require_phase(
        iteration, IterationPhase.FIELDWORK, IterationPhase.REPORTING, doing="question deferral"
    )
    if not rationale.strip():
        raise ValidationError(f"deferring question {question_id!r} requires a rationale")
    if iteration.scope is None or question_id not in iteration.scope.retained_questions:
        raise NotFoundError(f"question {question_id!r} is not retained in this iteration's scope")
    updated = replace(
        iteration,
        deferrals=iteration.deferrals + (Deferral(question_id, rationale, actor),),
        concerns=None,
    )
    return audit._replace_iteration(updated)


def override_concern_severity(
    audit: Audit, requirement: Requirement, severity: Severity, rationale: str
) -> Audit:
    if not rationale.strip():
        raise ValidationError("a severity override requires a rationale")
    iteration = audit.require_open_iteration()
    overrides = tuple(
        (r, s, why) for r, s, why in iteration.severity_overrides if r != requirement
    ) + ((requirement, severity, rationale),)
    updated = replace(iteration, severity_overrides=overrides, concerns=None)
    return audit._replace_iteration(updated)


def derive_and_store_concerns(audit: Audit) -> tuple[Audit, tuple[EthicalConcern, ...]]:
    """Derive ethical concerns for the open iteration and cache them for the
    report compiler."""
    iteration = audit.require_open_iteration()
    retained = audit.retained_questions(iteration)
    recommendations = _recommendations_by_requirement(audit, iteration)
    concerns = tuple(
        derive_concerns(
            retained,
            iteration.current_responses(),
            iteration.deferred_ids(),
            severity_overrides={
                r: (s, why) for r, s, why in iteration.severity_overrides
            },
            recommendations=recommendations,
        )
    )
    updated = replace(iteration, concerns=concerns)
    return audit._replace_iteration(updated), concerns


def _recommendations_by_requirement(
    audit: Audit, iteration: AuditIteration
) -> dict[Requirement, list[MitigationRecommendation]]:
    registry = audit.mitigation_by_id()
    linked: dict[Requirement, list[MitigationRecommendation]] = {}
    for link in iteration.recommendation_links:
        if link.requirement is not None and link.recommendation_id in registry:
            linked.setdefault(link.requirement, []).append(registry[link.recommendation_id])
    return linked


def attach_recommendation(
    audit: Audit,
    recommendation: MitigationRecommendation,
    *,
    requirement: Requirement | None = None,
    note: str = "",
) -> Audit:
    """Register a mitigation recommendation tied to a concern's requirement or
    to an explicit auditor note."""
    if requirement is None and not note.strip():
        raise ValidationError(
            "a recommendation must answer a concern (requirement) or carry an auditor note"
        )
    recommendation.validate()
    iteration = audit.require_open_iteration()
    if recommendation.id in audit.mitigation_by_id():
        raise ValidationError(f"duplicate recommendation id: {recommendation.id!r}")
    link = RecommendationLink(
        recommendation_id=recommendation.id, requirement=requirement, note=note
    )
    updated_iteration = replace(
        iteration,
        recommendation_links=iteration.recommendation_links + (link,),
        concerns=None if requirement is not None else iteration.concerns,
    )
    updated = audit._replace_iteration(updated_iteration)
    return replace(updated, mitigations=updated.mitigations + (recommendation,))


def update_mitigation(
    audit: Audit, mitigation_id: str, status: MitigationStatus, rationale: str = ""
) -> Audit:
    registry = audit.mitigation_by_id()
    if mitigation_id not in registry:
        raise NotFoundError(f"unknown mitigation id: {mitigation_id}")
    updated = registry[mitigation_id].with_status(status, rationale)
    mitigations = tuple(
        updated if m.id == mitigation_id else m for m in audit.mitigations
    )
    return replace(audit, mitigations=mitigations, revision=audit.revision + 1)


def add_monitor_spec(audit: Audit, spec: MonitorSpec) -> Audit:
    spec.validate()
    iteration = audit.require_open_iteration()
    if any(s.id == spec.id for s in iteration.monitor_specs):
        raise ValidationError(f"duplicate monitor spec id: {spec.id!r}")
    updated = replace(iteration, monitor_specs=iteration.monitor_specs + (spec,))
    return audit._replace_iteration(updated)


def record_monitor_run(audit: Audit, run: MonitorRun) -> Audit:
    iteration = audit.require_open_iteration()
    if not any(s.id == run.spec_id for s in iteration.monitor_specs):
        raise NotFoundError(f"unknown monitor spec id: {run.spec_id}")
    updated = replace(iteration, monitor_runs=iteration.monitor_runs + (run,))
    return audit._replace_iteration(updated)


def reference_register_entries(audit: Audit, entry_ids: Iterable[str]) -> Audit:
    merged = tuple(dict.fromkeys(audit.register_refs + tuple(entry_ids)))
    return replace(audit, register_refs=merged, revision=audit.revision + 1)


def store_report(audit: Audit, report_doc: dict[str, Any]) -> Audit:
    """Attach a compiled report to the open iteration (reporting module calls
    this; reports are immutable once the iteration is Reported)."""
    iteration = audit.require_open_iteration()
    _require_phase(iteration, IterationPhase.REPORTING, doing="report storage")
    updated = replace(iteration, report=report_doc)
    return audit._replace_iteration(updated)
