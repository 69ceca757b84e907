"""Resource-oriented HTTP API over the workbench.

Operations mirror the library surface 1:1; responses are pure projections of
stored state. Every mutating call carries the caller's ``expected_revision``
and stale writers receive 409 instead of overwriting. Long monitor runs can
be submitted as jobs and polled.

Authentication is a single shared bearer token (``token`` in the config or
``AUDITBENCH_TOKEN``); when unset the API is open, which is intended for
local single-user use behind a reverse proxy.
"""

from __future__ import annotations

import base64
from datetime import datetime, timezone
from typing import Any

from fastapi import Body, Depends, FastAPI, Header, HTTPException, Query, Request, Response

from . import lifecycle as lc
from .canonical import parse_timestamp
from .errors import (
    AuditbenchError,
    BundleError,
    ConflictError,
    DigestMismatchError,
    GateError,
    NotFoundError,
    ValidationError,
)
from .fieldwork import AssuranceNode, EvidenceItem, TestRecord
from .monitoring import MonitorSpec, parse_prediction_log
from .reporting import CANONICAL_FORMAT, MARKUP_FORMAT
from .risk_assessment import (
    MitigationRecommendation,
    MitigationStatus,
    QuestionResponse,
    Requirement,
    Severity,
    export_questions,
)
from .risk_register import RiskRegisterEntry
from .service import Workbench, WorkbenchConfig
from .workflow import AuditKind, EventKind, EvidenceSourceDeclaration, ReauditTrigger


def _bad_request(exc: AuditbenchError, status: int = 400) -> HTTPException:
    detail: dict[str, Any] = {"error": str(exc)}
    if isinstance(exc, ValidationError):
        detail["details"] = exc.details
    if isinstance(exc, GateError):
        detail["unmet"] = exc.unmet
    if isinstance(exc, ConflictError):
        detail["expected"] = exc.expected
        detail["actual"] = exc.actual
    return HTTPException(status_code=status, detail=detail)


def _parse_at(value: str | None) -> datetime:
    if value is None:
        return datetime.now(timezone.utc)
    return parse_timestamp(value)


def _enum(enum_cls: Any, value: Any, what: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError:
        legal = ", ".join(e.value for e in enum_cls)
        raise HTTPException(
            status_code=400, detail={"error": f"unknown {what}: {value!r} (one of: {legal})"}
        ) from None


def create_app(workbench: Workbench | None = None, config: WorkbenchConfig | None = None) -> FastAPI:
    if config is None:
        config = WorkbenchConfig() if workbench is not None else WorkbenchConfig.load()
    bench = workbench or Workbench(config=config)
    app = FastAPI(title="auditbench", version="0.1.0")

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if config.token is None:
            return
        if authorization != f"Bearer {config.token}":
            raise HTTPException(status_code=401, detail={"error": "invalid or missing token"})

    guarded = Depends(require_token)

    @app.exception_handler(AuditbenchError)
    async def _domain_error(request: Request, exc: AuditbenchError) -> Response:
        if isinstance(exc, NotFoundError):
            raised = _bad_request(exc, 404)
        elif isinstance(exc, (ConflictError, GateError)):
            raised = _bad_request(exc, 409)
        elif isinstance(exc, (DigestMismatchError, BundleError, ValidationError)):
            raised = _bad_request(exc, 400)
        else:
            raised = _bad_request(exc, 400)
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=raised.status_code, content={"detail": raised.detail})

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    # -- audits -----------------------------------------------------------

    @app.get("/audits", dependencies=[guarded])
    def list_audits() -> list[dict[str, Any]]:
        return bench.list_audits()

    @app.post("/audits", dependencies=[guarded], status_code=201)
    def create_audit(payload: dict = Body(...)) -> dict[str, Any]:
        kind = _enum(AuditKind, payload.get("kind"), "audit kind")
        audit = bench.create_audit(
            payload["title"],
            kind,
            payload.get("target_system", ""),
            audit_id=payload.get("audit_id"),
            actor=payload.get("actor", ""),
        )
        return audit.to_doc()

    @app.get("/audits/{audit_id}", dependencies=[guarded])
    def get_audit(audit_id: str) -> dict[str, Any]:
        return bench.get_audit(audit_id).to_doc()

    @app.get("/audits/{audit_id}/coverage", dependencies=[guarded])
    def get_coverage(audit_id: str) -> dict[str, Any]:
        return bench.coverage(audit_id).to_doc()

    @app.post("/audits/{audit_id}/assessments", dependencies=[guarded])
    def post_assessment(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        audit = bench.get_audit(audit_id)
        doc = dict(payload["assessment"])
        doc.setdefault("timestamp", _parse_at(None).isoformat().replace("+00:00", "Z"))
        doc.setdefault("expected_revision", audit.model.revision)
        assessment = lc.StepAssessment.from_doc(doc)
        updated = bench.assess_step(
            audit_id, payload["expected_revision"], assessment, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.put("/audits/{audit_id}/steps/{step_id}/owner", dependencies=[guarded])
    def put_owner(audit_id: str, step_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.set_step_owner(
            audit_id,
            payload["expected_revision"],
            step_id,
            payload.get("owner"),
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/evidence-sources", dependencies=[guarded])
    def post_evidence_source(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        declaration = EvidenceSourceDeclaration.from_doc(payload["declaration"])
        updated = bench.declare_evidence_source(
            audit_id, payload["expected_revision"], declaration, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.get("/audits/{audit_id}/auditability", dependencies=[guarded])
    def get_auditability(audit_id: str) -> dict[str, Any]:
        return bench.check_auditability(audit_id).to_doc()

    @app.post("/audits/{audit_id}/waiver", dependencies=[guarded])
    def post_waiver(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.waive_auditability(
            audit_id,
            payload["expected_revision"],
            payload["rationale"],
            actor=payload.get("actor", ""),
            at=_parse_at(payload.get("at")),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/advance", dependencies=[guarded])
    def post_advance(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.advance_phase(
            audit_id,
            payload["expected_revision"],
            actor=payload.get("actor", ""),
            at=_parse_at(payload.get("at")),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/triggers", dependencies=[guarded])
    def post_trigger(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        trigger = ReauditTrigger.from_doc(payload["trigger"])
        updated = bench.add_trigger(
            audit_id, payload["expected_revision"], trigger, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/events", dependencies=[guarded])
    def post_event(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        kind = _enum(EventKind, payload.get("kind"), "event kind")
        audit, fired = bench.record_event(
            audit_id,
            kind,
            at=_parse_at(payload.get("at")),
            note=payload.get("note", ""),
            actor=payload.get("actor", ""),
        )
        return {"audit": audit.to_doc(), "fired": fired}

    @app.post("/audits/{audit_id}/iterations", dependencies=[guarded])
    def post_iteration(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.open_iteration(
            audit_id,
            payload["expected_revision"],
            cause=payload.get("cause", "manual"),
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    # -- questions -----------------------------------------------------------

    @app.post("/question-dbs", dependencies=[guarded], status_code=201)
    def post_question_db(payload: dict = Body(...)) -> dict[str, Any]:
        db_id, db = bench.import_question_db(
            payload["document"], fmt=payload.get("fmt")
        )
        return {"id": db_id, "digest": db.digest, "count": len(db)}

    @app.get("/question-dbs/{db_id}", dependencies=[guarded])
    def get_question_db(db_id: str) -> dict[str, Any]:
        return bench.get_question_db(db_id).to_doc()

    @app.post("/audits/{audit_id}/question-db", dependencies=[guarded])
    def attach_question_db(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        if "document" in payload:
            _, db = bench.import_question_db(
                payload["document"],
                fmt=payload.get("fmt"),
                audit_id=audit_id,
                expected_revision=payload["expected_revision"],
                actor=payload.get("actor", ""),
            )
            return {"digest": db.digest, "count": len(db)}
        updated = bench.attach_question_db(
            audit_id, payload["expected_revision"], payload["db_id"], actor=payload.get("actor", "")
        )
        assert updated.question_db is not None
        return {"digest": updated.question_db.digest, "count": len(updated.question_db)}

    @app.get("/audits/{audit_id}/questions", dependencies=[guarded])
    def get_questions(
        audit_id: str,
        requirement: list[str] | None = Query(default=None),
        steps: str | None = Query(default=None),
        fmt: str | None = Query(default=None),
    ) -> Any:
        requirements = (
            [_enum(Requirement, r, "requirement") for r in requirement] if requirement else None
        )
        step_set = set(s.strip() for s in steps.split(",") if s.strip()) if steps else None
        questions = bench.filter_questions(audit_id, steps=step_set, requirements=requirements)
        if fmt in ("csv", "json"):
            return Response(
                content=export_questions(questions, fmt),
                media_type="text/csv" if fmt == "csv" else "application/json",
            )
        return [q.to_doc() for q in questions]

    @app.post("/audits/{audit_id}/responses", dependencies=[guarded])
    def post_response(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        doc = dict(payload["response"])
        doc.setdefault("timestamp", _parse_at(None).isoformat().replace("+00:00", "Z"))
        response = QuestionResponse.from_doc(doc)
        updated = bench.record_response(
            audit_id, payload["expected_revision"], response, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/deferrals", dependencies=[guarded])
    def post_deferral(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.defer_question(
            audit_id,
            payload["expected_revision"],
            payload["question_id"],
            payload["rationale"],
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/concerns", dependencies=[guarded])
    def post_concerns(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        audit, concerns = bench.derive_concerns(
            audit_id, payload["expected_revision"], actor=payload.get("actor", "")
        )
        return {"revision": audit.revision, "concerns": concerns}

    @app.get("/audits/{audit_id}/concerns", dependencies=[guarded])
    def get_concerns(audit_id: str) -> list[dict[str, Any]]:
        audit = bench.get_audit(audit_id)
        iteration = audit.open_iteration() or audit.iterations[-1]
        if iteration.concerns is None:
            raise NotFoundError("concerns have not been derived for this iteration")
        return [c.to_doc() for c in iteration.concerns]

    @app.post("/audits/{audit_id}/severity-overrides", dependencies=[guarded])
    def post_severity_override(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.override_concern_severity(
            audit_id,
            payload["expected_revision"],
            _enum(Requirement, payload.get("requirement"), "requirement"),
            _enum(Severity, payload.get("severity"), "severity"),
            payload["rationale"],
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/recommendations", dependencies=[guarded])
    def post_recommendation(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        requirement = payload.get("requirement")
        updated = bench.attach_recommendation(
            audit_id,
            payload["expected_revision"],
            MitigationRecommendation.from_doc(payload["recommendation"]),
            requirement=_enum(Requirement, requirement, "requirement") if requirement else None,
            note=payload.get("note", ""),
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/mitigations/{mitigation_id}", dependencies=[guarded])
    def post_mitigation(audit_id: str, mitigation_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.update_mitigation(
            audit_id,
            payload["expected_revision"],
            mitigation_id,
            _enum(MitigationStatus, payload.get("status"), "mitigation status"),
            payload.get("rationale", ""),
            actor=payload.get("actor", ""),
        )
        return updated.to_doc()

    # -- fieldwork --------------------------------------------------------------

    @app.post("/audits/{audit_id}/evidence", dependencies=[guarded])
    def post_evidence(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        item = EvidenceItem.from_doc(payload["item"])
        content = None
        if payload.get("content_base64") is not None:
            content = base64.b64decode(payload["content_base64"])
        updated = bench.register_evidence(
            audit_id, payload["expected_revision"], item, content, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.get("/audits/{audit_id}/evidence", dependencies=[guarded])
    def get_evidence(audit_id: str) -> list[dict[str, Any]]:
        audit = bench.get_audit(audit_id)
        return [e.to_doc() for it in audit.iterations for e in it.evidence]

    @app.get("/audits/{audit_id}/evidence/verify", dependencies=[guarded])
    def verify_evidence(audit_id: str, evidence_id: str | None = Query(default=None)) -> dict[str, Any]:
        return bench.verify_evidence(audit_id, evidence_id)

    @app.post("/audits/{audit_id}/tests", dependencies=[guarded])
    def post_test(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        record = TestRecord.from_doc(payload["record"])
        updated = bench.record_test(
            audit_id, payload["expected_revision"], record, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/assurance", dependencies=[guarded])
    def post_assurance(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        nodes = [AssuranceNode.from_doc(n) for n in payload["nodes"]]
        audit, validation = bench.build_assurance_argument(
            audit_id, payload["expected_revision"], nodes, actor=payload.get("actor", "")
        )
        return {"revision": audit.revision, "validation": validation.to_doc()}

    # -- monitoring ----------------------------------------------------------------

    @app.post("/audits/{audit_id}/monitors", dependencies=[guarded])
    def post_monitor(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        spec = MonitorSpec.from_doc(payload["spec"])
        updated = bench.add_monitor_spec(
            audit_id, payload["expected_revision"], spec, actor=payload.get("actor", "")
        )
        return updated.to_doc()

    @app.post("/audits/{audit_id}/monitors/{spec_id}/runs", dependencies=[guarded])
    def post_monitor_run(audit_id: str, spec_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        records = parse_prediction_log(payload["log"])
        run = bench.run_monitor(audit_id, spec_id, records, actor=payload.get("actor", ""))
        return run.to_doc()

    @app.post("/audits/{audit_id}/monitors/{spec_id}/jobs", dependencies=[guarded], status_code=202)
    def post_monitor_job(audit_id: str, spec_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        job = bench.submit_monitor_job(
            audit_id, spec_id, payload["log"], actor=payload.get("actor", "")
        )
        return job.to_doc()

    @app.get("/jobs/{job_id}", dependencies=[guarded])
    def get_job(job_id: str) -> dict[str, Any]:
        return bench.get_job(job_id).to_doc()

    # -- reporting -------------------------------------------------------------------

    @app.post("/audits/{audit_id}/report", dependencies=[guarded])
    def post_report(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        _, doc = bench.compile_report(
            audit_id,
            payload["expected_revision"],
            at=_parse_at(payload.get("at")),
            actor=payload.get("actor", ""),
        )
        return doc

    @app.get("/audits/{audit_id}/report", dependencies=[guarded])
    def get_report(
        audit_id: str,
        format: str = Query(default="canonical"),
        iteration: int | None = Query(default=None),
    ) -> Response:
        if format in ("canonical", CANONICAL_FORMAT):
            data = bench.render_report(audit_id, CANONICAL_FORMAT, iteration)
            return Response(content=data, media_type="application/json")
        if format in ("markdown", MARKUP_FORMAT):
            data = bench.render_report(audit_id, MARKUP_FORMAT, iteration)
            return Response(content=data, media_type="text/markdown")
        raise ValidationError(f"unknown report format: {format!r}")

    @app.post("/audits/{audit_id}/carry-over", dependencies=[guarded])
    def post_carry_over(audit_id: str, payload: dict = Body(...)) -> dict[str, Any]:
        updated = bench.carry_over_mitigations(
            audit_id, payload["expected_revision"], actor=payload.get("actor", "")
        )
        return updated.to_doc()

    # -- bundles ---------------------------------------------------------------------

    @app.get("/audits/{audit_id}/bundle", dependencies=[guarded])
    def get_bundle(audit_id: str) -> Response:
        data = bench.export_bundle(audit_id)
        return Response(content=data, media_type="application/zip")

    @app.post("/bundles", dependencies=[guarded], status_code=201)
    async def post_bundle(request: Request, rename_to: str | None = Query(default=None)) -> dict[str, Any]:
        data = await request.body()
        audit_id = bench.import_bundle(data, rename_to=rename_to)
        return {"audit_id": audit_id}

    # -- risk register ----------------------------------------------------------------

    @app.post("/register/entries", dependencies=[guarded], status_code=201)
    def post_register_entry(payload: dict = Body(...)) -> dict[str, Any]:
        entry = RiskRegisterEntry.from_doc(payload["entry"])
        register = bench.add_register_entry(entry, actor=payload.get("actor", ""))
        return {"revision": register.revision, "count": len(register.entries)}

    @app.get("/register/entries", dependencies=[guarded])
    def get_register_entries(
        steps: str = Query(...), requirement: str | None = Query(default=None)
    ) -> list[dict[str, Any]]:
        step_set = {s.strip() for s in steps.split(",") if s.strip()}
        req = _enum(Requirement, requirement, "requirement") if requirement else None
        return [e.to_doc() for e in bench.query_register(step_set, req)]

    @app.post("/register/feed", dependencies=[guarded], status_code=201)
    def post_register_feed(payload: dict = Body(...)) -> dict[str, Any]:
        import csv
        import io

        rows = list(csv.DictReader(io.StringIO(payload["csv"])))
        register = bench.ingest_register_feed(rows, actor=payload.get("actor", ""))
        return {"revision": register.revision, "count": len(register.entries)}

    app.state.workbench = bench
    return app


def main() -> None:  # pragma: no cover - thin uvicorn launcher
    import uvicorn

    config = WorkbenchConfig.load()
    app = create_app(config=config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port)


if __name__ == "__main__":  # pragma: no cover
    main()
