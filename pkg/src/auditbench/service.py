"""Workbench facade: persistence, revision protocol, and jobs.

Everything the CLI, the HTTP API and scripts do goes through
:class:`Workbench`. Each mutating call names the audit revision the caller
last saw; a mismatch is a conflict, never a lost update. Aggregates are
persisted whole into the append-only entity log, evidence content into the
content-addressed blob store.

Long monitor runs over large logs can be submitted as background jobs
executed on a bounded worker pool and polled for status.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import bundle as bundle_mod
from . import lifecycle as lc
from . import reporting, workflow
from .canonical import new_id
from .errors import ConflictError, DigestMismatchError, NotFoundError, ValidationError
from .fieldwork import AssuranceNode, AssuranceValidation, EvidenceItem, TestRecord
from .monitoring import MonitorRun, MonitorSpec, PredictionRecord, parse_prediction_log, run_monitor
from .risk_assessment import (
    MitigationRecommendation,
    MitigationStatus,
    QuestionDB,
    QuestionResponse,
    Requirement,
    RiskQuestion,
    Severity,
    filter_questions,
    import_questions,
)
from .risk_register import (
    RiskRegister,
    RiskRegisterEntry,
    add_entry,
    ingest_external_feed,
    query_entries,
)
from .store import Store
from .workflow import Audit, AuditabilityReport, EventKind, IterationPhase

_REGISTER_ENTITY = "register:default"
_QUESTION_DB_PREFIX = "questiondb:"


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass
class WorkbenchConfig:
    """Single config file plus environment overrides."""

    store_path: str | None = None
    bind_host: str = "127.0.0.1"
    bind_port: int = 8060
    token: str | None = None
    default_fairness_threshold: float = 0.95
    default_min_group_size: int = 10
    job_workers: int = 4

    @staticmethod
    def load(config_file: str | os.PathLike[str] | None = None) -> "WorkbenchConfig":
        config = WorkbenchConfig()
        if config_file is not None:
            raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
            for key in (
                "store_path",
                "bind_host",
                "bind_port",
                "token",
                "default_fairness_threshold",
                "default_min_group_size",
                "job_workers",
            ):
                if key in raw:
                    setattr(config, key, raw[key])
        env = os.environ
        if "AUDITBENCH_STORE" in env:
            config.store_path = env["AUDITBENCH_STORE"]
        if "AUDITBENCH_HOST" in env:
            config.bind_host = env["AUDITBENCH_HOST"]
        if "AUDITBENCH_PORT" in env:
            config.bind_port = int(env["AUDITBENCH_PORT"])
        if "AUDITBENCH_TOKEN" in env:
            config.token = env["AUDITBENCH_TOKEN"]
        return config


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"  # queued | running | done | error
    result: dict[str, Any] | None = None
    error: str | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "result": self.result,
            "error": self.error,
        }


class Workbench:
    """Facade over one store. Mutations are serialized per workbench."""

    def __init__(self, store: Store | None = None, config: WorkbenchConfig | None = None) -> None:
        self.config = config or WorkbenchConfig()
        if store is None:
            store = Store(self.config.store_path)
        self.store = store
        self._lock = threading.RLock()
        self._jobs: dict[str, Job] = {}
        self._executor = ThreadPoolExecutor(max_workers=max(1, self.config.job_workers))

    # -- audits ---------------------------------------------------------

    def _entity(self, audit_id: str) -> str:
        return bundle_mod.audit_entity_id(audit_id)

    def get_audit(self, audit_id: str) -> Audit:
        try:
            revision = self.store.get(self._entity(audit_id))
        except NotFoundError:
            raise NotFoundError(f"unknown audit: {audit_id}") from None
        return Audit.from_doc(revision.payload)

    def list_audits(self) -> list[dict[str, Any]]:
        summaries = []
        for entity_id in self.store.entity_ids("audit:"):
            audit = Audit.from_doc(self.store.get(entity_id).payload)
            open_iteration = audit.open_iteration()
            summaries.append(
                {
                    "id": audit.id,
                    "title": audit.title,
                    "kind": audit.kind.value,
                    "target_system": audit.target_system,
                    "revision": audit.revision,
                    "iterations": len(audit.iterations),
                    "open_phase": open_iteration.phase.value if open_iteration else None,
                }
            )
        return summaries

    def _persist(self, audit: Audit, *, actor: str, at: datetime | None) -> Audit:
        entity_id = self._entity(audit.id)
        self.store.append(
            entity_id,
            self.store.current_revision(entity_id),
            audit.to_doc(),
            actor=actor,
            at=at or _now(),
        )
        return audit

    def _mutate(
        self,
        audit_id: str,
        expected_revision: int,
        fn: Callable[[Audit], Audit],
        *,
        actor: str,
        at: datetime | None = None,
    ) -> Audit:
        with self._lock:
            audit = self.get_audit(audit_id)
            if audit.revision != expected_revision:
                raise ConflictError(self._entity(audit_id), expected_revision, audit.revision)
            updated = fn(audit)
            return self._persist(updated, actor=actor, at=at)

    def create_audit(
        self,
        title: str,
        kind: workflow.AuditKind,
        target_system: str,
        *,
        model: lc.LifecycleModel | None = None,
        audit_id: str | None = None,
        actor: str = "",
        at: datetime | None = None,
    ) -> Audit:
        with self._lock:
            audit = workflow.create_audit(
                title, kind, target_system, model, audit_id=audit_id
            )
            if self.store.exists(self._entity(audit.id)):
                raise ValidationError(f"audit id already exists: {audit.id!r}")
            return self._persist(audit, actor=actor, at=at)

    # -- lifecycle --------------------------------------------------------

    def assess_step(
        self,
        audit_id: str,
        expected_revision: int,
        assessment: lc.StepAssessment,
        *,
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.assess_step(a, assessment),
            actor=actor or assessment.assessed_by,
            at=assessment.timestamp,
        )

    def set_step_owner(
        self, audit_id: str, expected_revision: int, step_id: str, owner: str | None, *, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.replace_model(a, lc.set_step_owner(a.model, step_id, owner)),
            actor=actor,
        )

    def coverage(self, audit_id: str) -> lc.CoverageReport:
        return lc.coverage(self.get_audit(audit_id).model)

    # -- questions ---------------------------------------------------------

    def import_question_db(
        self,
        document: str | bytes,
        *,
        fmt: str | None = None,
        audit_id: str | None = None,
        expected_revision: int | None = None,
        actor: str = "",
    ) -> tuple[str, QuestionDB]:
        """Import a question database.

        With ``audit_id``, tags are resolved against that audit's lifecycle
        model and the snapshot is attached to the audit; otherwise the default
        template is used and the snapshot is stored standalone under its
        digest.
        """
        with self._lock:
            if audit_id is not None:
                if expected_revision is None:
                    raise ValidationError("expected_revision is required to attach a question db")
                audit = self.get_audit(audit_id)
                db = import_questions(document, audit.model, fmt=fmt)
                self._mutate(
                    audit_id,
                    expected_revision,
                    lambda a: workflow.attach_question_db(a, db),
                    actor=actor,
                )
                return f"{_QUESTION_DB_PREFIX}{db.digest[:12]}", db
            db = import_questions(document, lc.instantiate_template(), fmt=fmt)
            entity_id = f"{_QUESTION_DB_PREFIX}{db.digest[:12]}"
            if not self.store.exists(entity_id):
                self.store.append(entity_id, 0, db.to_doc(), actor=actor, at=_now())
            return entity_id, db

    def get_question_db(self, db_id: str) -> QuestionDB:
        return QuestionDB.from_doc(self.store.get(db_id).payload)

    def attach_question_db(
        self, audit_id: str, expected_revision: int, db_id: str, *, actor: str = ""
    ) -> Audit:
        db = self.get_question_db(db_id)
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.attach_question_db(a, db),
            actor=actor,
        )

    def filter_questions(
        self,
        audit_id: str,
        *,
        steps: Iterable[str] | None = None,
        requirements: Iterable[Requirement] | None = None,
    ) -> list[RiskQuestion]:
        """Filter the audit's question database.

        Defaults to the open iteration's frozen retained scope when fieldwork
        has begun, otherwise to the live in-scope steps.
        """
        audit = self.get_audit(audit_id)
        if audit.question_db is None:
            return []
        if steps is None:
            iteration = audit.open_iteration()
            if iteration is not None and iteration.scope is not None:
                steps = set(iteration.scope.in_scope)
            else:
                steps = set(audit.model.in_scope_steps())
        return filter_questions(audit.question_db, steps, requirements)

    # -- planning / workflow -------------------------------------------------

    def declare_evidence_source(
        self,
        audit_id: str,
        expected_revision: int,
        declaration: workflow.EvidenceSourceDeclaration,
        *,
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.declare_evidence_source(a, declaration),
            actor=actor,
        )

    def waive_auditability(
        self, audit_id: str, expected_revision: int, rationale: str, *, actor: str, at: datetime
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.waive_auditability(a, rationale, actor, at),
            actor=actor,
            at=at,
        )

    def check_auditability(self, audit_id: str) -> AuditabilityReport:
        return workflow.check_auditability(self.get_audit(audit_id))

    def advance_phase(
        self, audit_id: str, expected_revision: int, *, actor: str, at: datetime
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.advance_phase(a, actor=actor, at=at),
            actor=actor,
            at=at,
        )

    def add_trigger(
        self, audit_id: str, expected_revision: int, trigger: workflow.ReauditTrigger, *, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id, expected_revision, lambda a: workflow.add_trigger(a, trigger), actor=actor
        )

    def record_event(
        self, audit_id: str, kind: EventKind, *, at: datetime, note: str = "", actor: str = ""
    ) -> tuple[Audit, list[str]]:
        """Event ingestion is not revision-gated: events arrive from outside
        the editing session and are serialized by the workbench lock."""
        with self._lock:
            audit = self.get_audit(audit_id)
            updated, fired = workflow.record_event(audit, kind, at=at, note=note)
            return self._persist(updated, actor=actor, at=at), fired

    def open_iteration(
        self, audit_id: str, expected_revision: int, *, cause: str, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id, expected_revision, lambda a: workflow.open_iteration(a, cause=cause), actor=actor
        )

    # -- fieldwork -----------------------------------------------------------

    def record_response(
        self, audit_id: str, expected_revision: int, response: QuestionResponse, *, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.record_response(a, response),
            actor=actor or response.answered_by,
        )

    def defer_question(
        self,
        audit_id: str,
        expected_revision: int,
        question_id: str,
        rationale: str,
        *,
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.defer_question(a, question_id, rationale, actor),
            actor=actor,
        )

    def register_evidence(
        self,
        audit_id: str,
        expected_revision: int,
        item: EvidenceItem,
        content: bytes | None = None,
        *,
        actor: str = "",
    ) -> Audit:
        with self._lock:
            # blob first: an orphaned blob is harmless, a registered item
            # without its content is not
            if content is not None:
                self.store.put_blob(content)
            return self._mutate(
                audit_id,
                expected_revision,
                lambda a: workflow.register_evidence(a, item, content),
                actor=actor or item.collected_by,
                at=item.timestamp,
            )

    def verify_evidence(self, audit_id: str, evidence_id: str | None = None) -> dict[str, Any]:
        """Re-read stored evidence content and re-verify digests."""
        audit = self.get_audit(audit_id)
        verified: list[str] = []
        failed: list[dict[str, str]] = []
        skipped: list[str] = []
        for iteration in audit.iterations:
            for item in iteration.evidence:
                if evidence_id is not None and item.id != evidence_id:
                    continue
                if not self.store.has_blob(item.content_digest):
                    skipped.append(item.id)
                    continue
                try:
                    self.store.get_blob(item.content_digest)
                except DigestMismatchError as exc:
                    failed.append({"id": item.id, "error": str(exc)})
                else:
                    verified.append(item.id)
        if evidence_id is not None and not (verified or failed or skipped):
            raise NotFoundError(f"unknown evidence id: {evidence_id}")
        return {"verified": verified, "failed": failed, "skipped": skipped}

    def record_test(
        self, audit_id: str, expected_revision: int, record: TestRecord, *, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id, expected_revision, lambda a: workflow.record_test(a, record), actor=actor
        )

    def build_assurance_argument(
        self,
        audit_id: str,
        expected_revision: int,
        nodes: Sequence[AssuranceNode],
        *,
        actor: str = "",
    ) -> tuple[Audit, AssuranceValidation]:
        with self._lock:
            audit = self.get_audit(audit_id)
            if audit.revision != expected_revision:
                raise ConflictError(self._entity(audit_id), expected_revision, audit.revision)
            updated, validation = workflow.build_assurance_argument(audit, nodes)
            return self._persist(updated, actor=actor, at=None), validation

    # -- concerns and recommendations ----------------------------------------

    def derive_concerns(
        self, audit_id: str, expected_revision: int, *, actor: str = ""
    ) -> tuple[Audit, list[dict[str, Any]]]:
        with self._lock:
            audit = self.get_audit(audit_id)
            if audit.revision != expected_revision:
                raise ConflictError(self._entity(audit_id), expected_revision, audit.revision)
            updated, concerns = workflow.derive_and_store_concerns(audit)
            persisted = self._persist(updated, actor=actor, at=None)
            return persisted, [c.to_doc() for c in concerns]

    def override_concern_severity(
        self,
        audit_id: str,
        expected_revision: int,
        requirement: Requirement,
        severity: Severity,
        rationale: str,
        *,
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.override_concern_severity(a, requirement, severity, rationale),
            actor=actor,
        )

    def attach_recommendation(
        self,
        audit_id: str,
        expected_revision: int,
        recommendation: MitigationRecommendation,
        *,
        requirement: Requirement | None = None,
        note: str = "",
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.attach_recommendation(
                a, recommendation, requirement=requirement, note=note
            ),
            actor=actor,
        )

    def update_mitigation(
        self,
        audit_id: str,
        expected_revision: int,
        mitigation_id: str,
        status: MitigationStatus,
        rationale: str = "",
        *,
        actor: str = "",
    ) -> Audit:
        return self._mutate(
            audit_id,
            expected_revision,
            lambda a: workflow.update_mitigation(a, mitigation_id, status, rationale),
            actor=actor,
        )

    # -- monitoring ------------------------------------------------------------

    def add_monitor_spec(
        self, audit_id: str, expected_revision: int, spec: MonitorSpec, *, actor: str = ""
    ) -> Audit:
        return self._mutate(
            audit_id, expected_revision, lambda a: workflow.add_monitor_spec(a, spec), actor=actor
        )

    def run_monitor(
        self,
        audit_id: str,
        spec_id: str,
        records: Sequence[PredictionRecord],
        *,
        actor: str = "",
    ) -> MonitorRun:
        """Run a monitor over a log and record the result on the open
        iteration (revision acquired internally; runs are their own writer)."""
        with self._lock:
            audit = self.get_audit(audit_id)
            iteration = audit.require_open_iteration()
            spec = next((s for s in iteration.monitor_specs if s.id == spec_id), None)
            if spec is None:
                raise NotFoundError(f"unknown monitor spec id: {spec_id}")
            run = run_monitor(spec, records)
            self._persist(workflow.record_monitor_run(audit, run), actor=actor, at=None)
            return run

    def submit_monitor_job(
        self, audit_id: str, spec_id: str, log_text: str, *, actor: str = ""
    ) -> Job:
        job = Job(id=new_id("job"), kind="monitor-run")
        self._jobs[job.id] = job

        def execute() -> None:
            job.status = "running"
            try:
                records = parse_prediction_log(log_text)
                run = self.run_monitor(audit_id, spec_id, records, actor=actor)
                job.result = run.to_doc()
                job.status = "done"
            except Exception as exc:  # surfaced via polling, not raised
                job.error = str(exc)
                job.status = "error"

        self._executor.submit(execute)
        return job

    def get_job(self, job_id: str) -> Job:
        job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job: {job_id}")
        return job

    # -- reporting ---------------------------------------------------------------

    def compile_report(
        self, audit_id: str, expected_revision: int, *, at: datetime, actor: str = ""
    ) -> tuple[Audit, dict[str, Any]]:
        with self._lock:
            audit = self.get_audit(audit_id)
            if audit.revision != expected_revision:
                raise ConflictError(self._entity(audit_id), expected_revision, audit.revision)
            updated, doc = reporting.compile_report(audit, at=at)
            return self._persist(updated, actor=actor, at=at), doc

    def get_report(self, audit_id: str, iteration_index: int | None = None) -> dict[str, Any]:
        audit = self.get_audit(audit_id)
        candidates = [it for it in audit.iterations if it.report is not None]
        if iteration_index is not None:
            candidates = [it for it in candidates if it.index == iteration_index]
        if not candidates:
            raise NotFoundError(f"audit {audit_id!r} has no compiled report")
        return candidates[-1].report  # type: ignore[return-value]

    def render_report(
        self, audit_id: str, fmt: str, iteration_index: int | None = None
    ) -> bytes:
        return reporting.render(self.get_report(audit_id, iteration_index), fmt)

    def carry_over_mitigations(
        self, audit_id: str, expected_revision: int, *, actor: str = ""
    ) -> Audit:
        with self._lock:
            audit = self.get_audit(audit_id)
            if audit.revision != expected_revision:
                raise ConflictError(self._entity(audit_id), expected_revision, audit.revision)
            reported = [it for it in audit.iterations if it.phase == IterationPhase.REPORTED]
            if not reported or reported[-1].report is None:
                raise ValidationError("audit has no reported iteration to carry over from")
            updated = reporting.carry_over_mitigations(audit, reported[-1].report)
            if updated is audit:
                return audit
            return self._persist(updated, actor=actor, at=None)

    # -- bundles --------------------------------------------------------------

    def export_bundle(self, audit_id: str) -> bytes:
        return bundle_mod.export_bundle(self.store, audit_id)

    def import_bundle(self, data: bytes, *, rename_to: str | None = None) -> str:
        with self._lock:
            return bundle_mod.import_bundle(self.store, data, rename_to=rename_to)

    # -- risk register -----------------------------------------------------------

    def _load_register(self) -> RiskRegister:
        if self.store.exists(_REGISTER_ENTITY):
            return RiskRegister.from_doc(self.store.get(_REGISTER_ENTITY).payload)
        return RiskRegister(template=lc.DEFAULT_TEMPLATE_NAME)

    def _save_register(self, register: RiskRegister, *, actor: str) -> RiskRegister:
        self.store.append(
            _REGISTER_ENTITY,
            self.store.current_revision(_REGISTER_ENTITY),
            register.to_doc(),
            actor=actor,
            at=_now(),
        )
        return register

    def add_register_entry(self, entry: RiskRegisterEntry, *, actor: str = "") -> RiskRegister:
        with self._lock:
            register = self._load_register()
            updated = add_entry(register, entry, lc.instantiate_template())
            return self._save_register(updated, actor=actor)

    def ingest_register_feed(
        self, rows: Iterable[Mapping[str, str]], *, actor: str = ""
    ) -> RiskRegister:
        with self._lock:
            register = self._load_register()
            updated = ingest_external_feed(register, rows, lc.instantiate_template())
            return self._save_register(updated, actor=actor)

    def query_register(
        self, steps: Iterable[str], requirement: Requirement | None = None
    ) -> list[RiskRegisterEntry]:
        return query_entries(self._load_register(), steps, requirement)

    def close(self) -> None:
        self._executor.shutdown(wait=True)
