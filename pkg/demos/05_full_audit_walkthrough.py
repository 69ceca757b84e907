"""A complete audit, end to end, against a throwaway store.

Planning (scope, owners, evidence sources, auditability gate), fieldwork
(questionnaire, evidence, tests), reporting (concerns, recommendations,
deterministic report), and the re-audit trigger that opens iteration 1.
"""

import tempfile
from datetime import datetime, timezone

from auditbench import (
    AccessBasis,
    Answer,
    AuditKind,
    EventKind,
    EvidenceItem,
    EvidenceKind,
    EvidenceSourceDeclaration,
    MitigationRecommendation,
    QuestionResponse,
    ReauditTrigger,
    Requirement,
    StepAssessment,
    StepStatus,
    Store,
    TriggerKind,
    Workbench,
    sha256_hex,
)
from auditbench.fixtures import sample_question_csv
from auditbench.reporting import MARKUP_FORMAT

now = datetime.now(timezone.utc)
workdir = tempfile.mkdtemp(prefix="auditbench-demo-")
bench = Workbench(store=Store(workdir))
print("store:", workdir)

audit = bench.create_audit(
    "Recommendation engine audit", AuditKind.THIRD_PARTY, "demo system",
    audit_id="demo-audit", actor="demo",
)

# --- Planning -------------------------------------------------------------
for step in ("goals", "user_experience", "continuous_testing"):
    audit = bench.set_step_owner(audit.id, audit.revision, step, "ml-lead")
    audit = bench.assess_step(
        audit.id, audit.revision,
        StepAssessment(step_id=step, status=StepStatus.IN_SCOPE,
                       rationale="selected for this iteration", assessed_by="demo",
                       timestamp=now, expected_revision=audit.model.revision),
    )
    audit = bench.declare_evidence_source(
        audit.id, audit.revision,
        EvidenceSourceDeclaration(step_id=step, description="design docs",
                                  access_basis=AccessBasis.DISCLOSED),
    )

_, db = bench.import_question_db(
    sample_question_csv(), audit_id=audit.id, expected_revision=audit.revision
)
audit = bench.get_audit(audit.id)
audit = bench.add_trigger(
    audit.id, audit.revision,
    ReauditTrigger(id="feedback", kind=TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD, threshold=3),
)

gate = bench.check_auditability(audit.id)
print("auditability:", "Auditable" if gate.auditable else gate.blockers)
audit = bench.advance_phase(audit.id, audit.revision, actor="demo", at=now)
print("phase:", audit.open_iteration().phase.value)

# --- Fieldwork --------------------------------------------------------------
content = b"architecture overview (demo)"
audit = bench.register_evidence(
    audit.id, audit.revision,
    EvidenceItem(id="ev-arch", kind=EvidenceKind.TRANSPARENCY, artifact_type="document",
                 step_tags=frozenset({"goals"}), content_digest=sha256_hex(content),
                 collected_by="demo", timestamp=now, access_basis=AccessBasis.DISCLOSED),
    content,
)

for q in bench.filter_questions(audit.id):
    flagged = q.id == "altai-t-01"
    audit = bench.record_response(
        audit.id, audit.revision,
        QuestionResponse(
            question_id=q.id,
            answer=Answer.NO if flagged else Answer.YES,
            justification="uncertainty not shown to users" if flagged else "",
            evidence_refs=("ev-arch",) if flagged else (),
            answered_by="demo", timestamp=now,
        ),
    )

audit = bench.advance_phase(audit.id, audit.revision, actor="demo", at=now)

# --- Reporting ----------------------------------------------------------------
audit = bench.attach_recommendation(
    audit.id, audit.revision,
    MitigationRecommendation(id="rec-uncertainty", mandatory=True,
                             text="Display output uncertainty next to each recommendation"),
    requirement=Requirement.TRANSPARENCY,
)
audit, concerns = bench.derive_concerns(audit.id, audit.revision)
print("concerns:", [(c["requirement"], c["severity"]) for c in concerns])

audit, report = bench.compile_report(audit.id, audit.revision, at=now)
print("report digest:", report["content_digest"][:16])
audit = bench.advance_phase(audit.id, audit.revision, actor="demo", at=now)
audit = bench.carry_over_mitigations(audit.id, audit.revision)
print("carried mitigations:", audit.carried_mitigations)

# --- Continuous phase: negative feedback accumulates ----------------------------
for i in range(3):
    audit, fired = bench.record_event(
        audit.id, EventKind.NEGATIVE_FEEDBACK, at=now, note=f"user complaint {i}"
    )
print("trigger fired, new iteration open:", audit.open_iteration().index,
      "| cause:", audit.open_iteration().opened_cause)

print("\n--- human-readable report preview (first 25 lines) ---")
preview = bench.render_report(audit.id, MARKUP_FORMAT).decode()
print("\n".join(preview.splitlines()[:25]))
