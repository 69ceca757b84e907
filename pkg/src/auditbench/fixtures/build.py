"""Deterministic builders for the two shipped pilot fixtures.

Run ``python -m auditbench.fixtures.build`` to regenerate the bundle files
and golden expectation files in this directory. Every id and timestamp is
fixed, so rebuilding produces byte-identical bundles.

The golden values in ``*_golden.json`` are hand-derived from the assessment
tables encoded here (coverage tallies counted manually), not recomputed by
the library, so the tests that assert them stay independent of the code
under test. All quantitative log data is synthetic.
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .. import lifecycle as lc
from .. import workflow as wf
from ..bundle import export_bundle
from ..canonical import canonical_json_bytes, sha256_hex
from ..fieldwork import (
    AccessBasis,
    AssuranceNode,
    EvidenceItem,
    EvidenceKind,
    NodeKind,
    TestCategory,
    TestRecord,
    TestVerdict,
)
from ..monitoring import MetricKind, MonitorSpec, PredictionRecord, run_monitor
from ..risk_assessment import (
    Answer,
    MitigationRecommendation,
    QuestionResponse,
    Requirement,
    import_questions,
)
from ..store import Store
from ..workflow import AuditKind, EvidenceSourceDeclaration, ReauditTrigger, TriggerKind

FIXTURE_DIR = Path(__file__).parent
BASE_TIME = datetime(2024, 5, 14, 9, 0, tzinfo=timezone.utc)

CALIBRATION_ID = "pilot-calibration"
GARMI_ID = "pilot-garmi"


class _Builder:
    """Applies aggregate mutations and persists each one as a store revision
    with a fixed, strictly increasing clock."""

    def __init__(self, audit: wf.Audit) -> None:
        self.store = Store()
        self.audit = audit
        self._tick = 0
        self._persist()

    def now(self) -> datetime:
        self._tick += 1
        return BASE_TIME + timedelta(minutes=self._tick)

    def _persist(self) -> None:
        entity = f"audit:{self.audit.id}"
        self.store.append(
            entity,
            self.store.current_revision(entity),
            self.audit.to_doc(),
            actor="fixture-builder",
            at=self.now(),
        )

    def apply(self, audit: wf.Audit) -> None:
        self.audit = audit
        self._persist()

    def assess(self, step_id: str, status: lc.StepStatus, rationale: str, actor: str) -> None:
        self.apply(
            wf.assess_step(
                self.audit,
                lc.StepAssessment(
                    step_id=step_id,
                    status=status,
                    rationale=rationale,
                    assessed_by=actor,
                    timestamp=self.now(),
                    expected_revision=self.audit.model.revision,
                ),
            )
        )

    def set_owner(self, step_id: str, owner: str) -> None:
        self.apply(wf.replace_model(self.audit, lc.set_step_owner(self.audit.model, step_id, owner)))

    def declare_source(self, step_id: str, description: str, basis: AccessBasis) -> None:
        self.apply(
            wf.declare_evidence_source(
                self.audit,
                EvidenceSourceDeclaration(
                    step_id=step_id,
                    description=description,
                    access_basis=basis,
                    declared_by="auditor",
                ),
            )
        )

    def answer(self, question_id: str, answer: Answer, justification: str = "") -> None:
        self.apply(
            wf.record_response(
                self.audit,
                QuestionResponse(
                    question_id=question_id,
                    answer=answer,
                    justification=justification,
                    answered_by="auditor",
                    timestamp=self.now(),
                ),
            )
        )


def sample_questions_text() -> str:
    return (FIXTURE_DIR / "sample_questions.csv").read_text(encoding="utf-8")


def calibration_monitor_log() -> list[PredictionRecord]:
    """Synthetic operator-acceptance log: three batches of 40 decisions.

    Batch 0: both sites accept 16/20 (parity). Batch 1: site A 18/20 versus
    site B 12/20 (ratio 2/3, planted failure). Batch 2: both 16/20 again.
    """
    plan = [
        (("site-a", 16, 20), ("site-b", 16, 20)),
        (("site-a", 18, 20), ("site-b", 12, 20)),
        (("site-a", 16, 20), ("site-b", 16, 20)),
    ]
    records: list[PredictionRecord] = []
    counter = 0
    for batch in plan:
        for site, positives, total in batch:
            for i in range(total):
                counter += 1
                stamp = BASE_TIME + timedelta(hours=8, seconds=counter)
                records.append(
                    PredictionRecord(
                        record_id=f"cal-{counter:04d}",
                        outcome=1 if i < positives else 0,
                        protected=site,
                        timestamp=stamp.isoformat().replace("+00:00", "Z"),
                    )
                )
    return records


_CALIBRATION_ASSESSMENTS: list[tuple[str, lc.StepStatus, str]] = [
    ("goals", lc.StepStatus.IN_SCOPE,
     "Calibration of a complex safety component that must be fully operational "
     "under a variety of environmental conditions."),
    ("legacy_systems", lc.StepStatus.NOT_RELEVANT, "Not applicable for this use case."),
    ("evaluation_metrics", lc.StepStatus.NOT_AUDITABLE, "Not known."),
    ("system_subjects", lc.StepStatus.IN_SCOPE, "The safety component being calibrated."),
    ("system_users", lc.StepStatus.IN_SCOPE,
     "Domain experts choose one recommended parametrisation and apply it manually."),
    ("societal_context", lc.StepStatus.NOT_RELEVANT,
     "Not relevant: a local expert tool whose usage is not intended to be scaled up."),
    ("user_experience", lc.StepStatus.IN_SCOPE,
     "Straightforward as the system is used by domain experts."),
    ("security_assessment", lc.StepStatus.NOT_RELEVANT, "Not relevant for this use case."),
    ("impact_assessment", lc.StepStatus.IN_SCOPE,
     "Non-safety-critical context; privacy, transparency, explainability and human "
     "autonomy considered."),
    ("data_specification", lc.StepStatus.NOT_RELEVANT,
     "Part of the legacy infrastructure, already subject to substantial scrutiny."),
    ("data_collection", lc.StepStatus.NOT_RELEVANT,
     "Part of the legacy infrastructure; the system does not collect new data."),
    ("curation", lc.StepStatus.NOT_RELEVANT, "Part of the legacy infrastructure."),
    ("processing", lc.StepStatus.NOT_RELEVANT, "Part of the legacy infrastructure."),
    ("extraction", lc.StepStatus.NOT_RELEVANT, "Part of the legacy infrastructure."),
    ("data_quality_assessment", lc.StepStatus.NOT_RELEVANT,
     "Part of the legacy infrastructure and already GDPR-compliant."),
    ("model_specification", lc.StepStatus.NOT_AUDITABLE, "Not accessible anymore."),
    ("feature_engineering", lc.StepStatus.NOT_AUDITABLE, "Not accessible anymore."),
    ("training_optimisation", lc.StepStatus.NOT_AUDITABLE, "Not accessible anymore."),
    ("validation_interpretation", lc.StepStatus.NOT_AUDITABLE, "Not accessible anymore."),
    ("model_quality_assessment", lc.StepStatus.NOT_AUDITABLE, "Not accessible anymore."),
    ("sandboxing", lc.StepStatus.IN_SCOPE, "To be conducted to test mitigation measures."),
    ("operational_logging", lc.StepStatus.NOT_AUDITABLE, "Missing."),
    ("continuous_testing", lc.StepStatus.IN_SCOPE,
     "Conducted to assess the quality of the recommendations."),
    ("reliability_assessment", lc.StepStatus.IN_SCOPE,
     "Potential over-reliance mitigation measures to be adopted."),
    ("black_box_auditing", lc.StepStatus.IN_SCOPE,
     "Randomised display of parameters proposed to detect over-reliance."),
    ("post_market_analysis", lc.StepStatus.NOT_AUDITABLE,
     "To be conducted once the system is launched on the market."),
]

_CALIBRATION_OWNERS = {
    "goals": "product-owner",
    "system_subjects": "product-owner",
    "system_users": "lead-ux-designer",
    "user_experience": "lead-ux-designer",
    "impact_assessment": "product-owner",
    "sandboxing": "lead-ml-developer",
    "continuous_testing": "lead-ml-developer",
    "reliability_assessment": "lead-ml-developer",
    "black_box_auditing": "lead-ml-developer",
}

_CALIBRATION_ANSWERS: list[tuple[str, Answer, str]] = [
    ("altai-t-01", Answer.NO,
     "The interface does not clearly convey the possible uncertainty about the outputs, "
     "nor that their usage should remain subject to the expert's supervision."),
    ("altai-t-02", Answer.NO,
     "No continuous user survey is in place; understanding of the ranking is not assessed."),
    ("altai-t-03", Answer.YES,
     "Users are trained domain experts and procedure documentation is available."),
    ("wb-t-04", Answer.NO,
     "Over-reliance has not been assessed; a randomised-display dry-run experiment was "
     "proposed to detect it."),
    ("altai-h-01", Answer.YES,
     "Engineers choose one recommendation and apply it manually; the system never acts "
     "autonomously."),
    ("wb-h-02", Answer.NOT_APPLICABLE,
     "The system subject is a physical safety component, not a person."),
    ("wb-r-01", Answer.NO,
     "Acceptable performance thresholds per operating circumstance are not documented."),
    ("wb-r-02", Answer.PARTIAL,
     "Continuous testing assesses recommendation quality, but adversarial edge-case "
     "testing is only planned for the beta version."),
    ("wb-p-01", Answer.PARTIAL,
     "The legacy dataset contains identifying records; no new data is collected and "
     "GDPR compliance is established."),
    ("wb-d-01", Answer.NOT_APPLICABLE,
     "All users are trained calibration engineers; no protected user groups are "
     "distinguished."),
    ("wb-s-01", Answer.YES,
     "The impact assessment covered the non-safety-critical usage context."),
    ("wb-a-01", Answer.YES,
     "Roles and ownership were attributed for each in-scope step during planning."),
]

RECOMMENDATION_LOG_PARAMS = (
    "Log the parameters chosen by the operator and validate the selection offline, "
    "either by re-running the optimisation or by a manual check by other operators."
)
RECOMMENDATION_RANDOMISED_DISPLAY = (
    "Run dry-run experiments that randomise or slightly re-order the displayed "
    "parametrisations to detect whether operators over-rely on the system's output."
)
RECOMMENDATION_THRESHOLDS = (
    "Document acceptable performance thresholds for each operating circumstance and "
    "the risks considered acceptable; add adversarial edge-case testing in the beta."
)


def build_calibration() -> tuple[Store, wf.Audit]:
    """Pilot 1: a third-party audit of an expert-in-the-loop calibration
    recommender, built up to the Reporting phase with concerns derived."""
    builder = _Builder(
        wf.create_audit(
            "AI-assisted calibration recommender",
            AuditKind.THIRD_PARTY,
            "Supplier calibration system for a safety component",
            audit_id=CALIBRATION_ID,
        )
    )

    for step_id, owner in _CALIBRATION_OWNERS.items():
        builder.set_owner(step_id, owner)
    for step_id, status, rationale in _CALIBRATION_ASSESSMENTS:
        builder.assess(step_id, status, rationale, actor="auditor")

    db = import_questions(sample_questions_text(), builder.audit.model)
    builder.apply(wf.attach_question_db(builder.audit, db))

    for step_id in _CALIBRATION_OWNERS:
        builder.declare_source(
            step_id,
            "Formalisation and operations documentation disclosed by the supplier.",
            AccessBasis.DISCLOSED,
        )
    builder.declare_source(
        "user_experience", "Guided walkthrough of the operator interface.", AccessBasis.GRANTED_ACCESS
    )

    builder.apply(
        wf.add_trigger(
            builder.audit,
            ReauditTrigger(id="trig-periodic", kind=TriggerKind.PERIODIC, interval=12),
        )
    )
    builder.apply(
        wf.add_trigger(
            builder.audit,
            ReauditTrigger(
                id="trig-feedback",
                kind=TriggerKind.NEGATIVE_FEEDBACK_THRESHOLD,
                threshold=5,
            ),
        )
    )
    builder.apply(
        wf.add_trigger(
            builder.audit,
            ReauditTrigger(id="trig-context", kind=TriggerKind.NEW_DEPLOYMENT_CONTEXT),
        )
    )

    builder.apply(wf.advance_phase(builder.audit, actor="auditor", at=builder.now()))

    # Fieldwork: evidence, tests, questionnaire answers, monitoring.
    procedure_doc = (
        "Calibration procedure handbook (synthetic fixture content): describes the "
        "recommendation ranking, the manual application step and the operator's role."
    ).encode("utf-8")
    walkthrough_notes = (
        "Interface walkthrough notes (synthetic fixture content): ranked list shown "
        "without uncertainty indication; operator confirms selection manually."
    ).encode("utf-8")
    ev_doc = EvidenceItem(
        id="ev-procedure-doc",
        kind=EvidenceKind.TRANSPARENCY,
        artifact_type="document",
        step_tags=frozenset({"goals", "user_experience"}),
        content_digest=sha256_hex(procedure_doc),
        collected_by="auditor",
        timestamp=builder.now(),
        access_basis=AccessBasis.DISCLOSED,
        description="Disclosed calibration procedure handbook.",
    )
    builder.apply(wf.register_evidence(builder.audit, ev_doc, procedure_doc))
    builder.store.put_blob(procedure_doc)
    ev_walkthrough = EvidenceItem(
        id="ev-interface-walkthrough",
        kind=EvidenceKind.EXAMINABILITY,
        artifact_type="query_result",
        step_tags=frozenset({"user_experience", "reliability_assessment"}),
        content_digest=sha256_hex(walkthrough_notes),
        collected_by="auditor",
        timestamp=builder.now(),
        access_basis=AccessBasis.GRANTED_ACCESS,
        description="Notes from a granted-access walkthrough of the operator interface.",
    )
    builder.apply(wf.register_evidence(builder.audit, ev_walkthrough, walkthrough_notes))
    builder.store.put_blob(walkthrough_notes)

    builder.apply(
        wf.record_test(
            builder.audit,
            TestRecord(
                id="ct-eval-metrics",
                category=TestCategory.COMPLIANCE,
                procedure="Compare the quality-assessment metric in use against the "
                "formalisation-phase evaluation-metric specification.",
                verdict=TestVerdict.FAIL,
                timestamp=builder.now(),
                spec_ref="evaluation_metrics",
                evidence_refs=("ev-procedure-doc",),
            ),
        )
    )
    builder.apply(
        wf.record_test(
            builder.audit,
            TestRecord(
                id="xt-reorder-probe",
                category=TestCategory.CUSTOM,
                procedure="Present two manually re-ordered recommendation lists and compare "
                "the operator's choices against the original ranking.",
                verdict=TestVerdict.INCONCLUSIVE,
                timestamp=builder.now(),
                rationale="Probe over-reliance in a way the developers did not test.",
                evidence_refs=("ev-interface-walkthrough",),
            ),
        )
    )

    for question_id, answer, justification in _CALIBRATION_ANSWERS:
        builder.answer(question_id, answer, justification)

    spec = MonitorSpec(
        id="rec-acceptance-parity",
        metric=MetricKind.CONDITIONAL_INDEPENDENCE_RATIO,
        batch_size=40,
        threshold=0.95,
        min_group_size=10,
        document_failures_only=True,
    )
    builder.apply(wf.add_monitor_spec(builder.audit, spec))
    builder.apply(
        wf.record_monitor_run(builder.audit, run_monitor(spec, calibration_monitor_log()))
    )

    nodes = [
        AssuranceNode(
            id="as-claim",
            node_kind=NodeKind.CLAIM,
            text="The calibration recommender is fit for expert-in-the-loop use.",
            children=("as-arg-quality", "as-challenge-reliance"),
            author="lead-ml-developer",
        ),
        AssuranceNode(
            id="as-arg-quality",
            node_kind=NodeKind.ARGUMENT,
            text="Recommendation quality is continuously tested against operator outcomes.",
            children=("as-ev-walkthrough",),
            author="lead-ml-developer",
        ),
        AssuranceNode(
            id="as-ev-walkthrough",
            node_kind=NodeKind.EVIDENCE_LINK,
            text="Interface walkthrough confirming the manual confirmation step.",
            evidence_ref="ev-interface-walkthrough",
            author="auditor",
        ),
        AssuranceNode(
            id="as-challenge-reliance",
            node_kind=NodeKind.CHALLENGE,
            text="Operator over-reliance on the top-ranked output has not been ruled out.",
            author="auditor",
        ),
    ]
    builder.apply(wf.build_assurance_argument(builder.audit, nodes)[0])

    builder.apply(wf.advance_phase(builder.audit, actor="auditor", at=builder.now()))

    builder.apply(
        wf.attach_recommendation(
            builder.audit,
            MitigationRecommendation(
                id="rec-log-params", text=RECOMMENDATION_LOG_PARAMS, mandatory=True
            ),
            requirement=Requirement.TRANSPARENCY,
        )
    )
    builder.apply(
        wf.attach_recommendation(
            builder.audit,
            MitigationRecommendation(
                id="rec-randomised-display",
                text=RECOMMENDATION_RANDOMISED_DISPLAY,
                mandatory=False,
            ),
            requirement=Requirement.TRANSPARENCY,
        )
    )
    builder.apply(
        wf.attach_recommendation(
            builder.audit,
            MitigationRecommendation(
                id="rec-performance-thresholds",
                text=RECOMMENDATION_THRESHOLDS,
                mandatory=False,
            ),
            requirement=Requirement.TECHNICAL_ROBUSTNESS_SAFETY,
        )
    )
    builder.apply(wf.derive_and_store_concerns(builder.audit)[0])

    return builder.store, builder.audit


_GARMI_ASSESSMENTS: list[tuple[str, lc.StepStatus, str]] = [
    ("goals", lc.StepStatus.IN_SCOPE,
     "Recognising an elderly patient's facial expression, gestures and skeleton are "
     "crucial features for coherent and safe human robot interaction."),
    ("legacy_systems", lc.StepStatus.IN_SCOPE,
     "Reviewed with the project lead: no legacy system applies to this module."),
    ("evaluation_metrics", lc.StepStatus.IN_SCOPE,
     "Success rates recorded during the testing and validation phase."),
    ("system_subjects", lc.StepStatus.IN_SCOPE, "The elderly patient or person."),
    ("system_users", lc.StepStatus.IN_SCOPE,
     "Health-care professionals and the elderly patient or person."),
    ("societal_context", lc.StepStatus.IN_SCOPE,
     "The elderly person's home and professional healthcare environments."),
    ("user_experience", lc.StepStatus.IN_SCOPE,
     "User studies are being and will be conducted to improve the system based on "
     "stakeholder experience and feedback."),
    ("security_assessment", lc.StepStatus.IN_SCOPE,
     "The software and hardware platform is examined for security vulnerabilities "
     "along with project progress, supervised by the security partners."),
    ("impact_assessment", lc.StepStatus.IN_SCOPE,
     "Input from the ethics group accompanying the project."),
    ("data_specification", lc.StepStatus.IN_SCOPE,
     "Specified after each stage of the learning, validation and test phases."),
    ("data_collection", lc.StepStatus.IN_SCOPE,
     "Participants' facial expressions and skeleton data, used for medical observation "
     "and for engaging safety features during interaction."),
    ("curation", lc.StepStatus.NOT_AUDITABLE, "Not yet applied."),
    ("processing", lc.StepStatus.IN_SCOPE,
     "Data are processed offline and online depending on the application."),
    ("extraction", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("data_quality_assessment", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("model_specification", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("feature_engineering", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("training_optimisation", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("validation_interpretation", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("model_quality_assessment", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("sandboxing", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("operational_logging", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("continuous_testing", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("reliability_assessment", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("black_box_auditing", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
    ("post_market_analysis", lc.StepStatus.NOT_AUDITABLE, "Not applicable at this stage."),
]

_GARMI_OWNER_DEFAULT = "project-lead"
_GARMI_OWNERS = {
    "user_experience": "robotics-researcher",
    "impact_assessment": "ethics-team",
    "societal_context": "ethics-team",
    "data_specification": "robotics-researcher",
    "data_collection": "robotics-researcher",
    "processing": "robotics-researcher",
}


def build_garmi() -> tuple[Store, wf.Audit]:
    """Pilot 2: an early-stage audit of a care-robot vision module, left in
    Planning with scope set and auditability prepared."""
    builder = _Builder(
        wf.create_audit(
            "GARMI vision module",
            AuditKind.SECOND_PARTY,
            "Perception module of a service robotics platform for elderly care",
            audit_id=GARMI_ID,
        )
    )

    in_scope_steps = [s for s, status, _ in _GARMI_ASSESSMENTS if status == lc.StepStatus.IN_SCOPE]
    for step_id in in_scope_steps:
        builder.set_owner(step_id, _GARMI_OWNERS.get(step_id, _GARMI_OWNER_DEFAULT))
    for step_id, status, rationale in _GARMI_ASSESSMENTS:
        builder.assess(step_id, status, rationale, actor="auditor")

    db = import_questions(sample_questions_text(), builder.audit.model)
    builder.apply(wf.attach_question_db(builder.audit, db))

    for step_id in in_scope_steps:
        builder.declare_source(
            step_id,
            "Project documentation and ethics reports disclosed by the project team.",
            AccessBasis.DISCLOSED,
        )
    builder.declare_source(
        "data_collection", "Supervised access to the capture pipeline in the lab.",
        AccessBasis.GRANTED_ACCESS,
    )

    builder.apply(
        wf.add_trigger(
            builder.audit,
            ReauditTrigger(id="trig-periodic", kind=TriggerKind.PERIODIC, interval=6),
        )
    )
    builder.apply(
        wf.add_trigger(
            builder.audit,
            ReauditTrigger(id="trig-context", kind=TriggerKind.NEW_DEPLOYMENT_CONTEXT),
        )
    )

    return builder.store, builder.audit


# Hand-derived expectations (counted from the assessment tables above).
_CALIBRATION_GOLDEN = {
    "audit_id": CALIBRATION_ID,
    "phase": "Reporting",
    "coverage": {
        "overall": "9/17",
        "per_phase": {"formulation": "5/6", "data": None, "model": "0/1", "deployment": "2/3"},
    },
    "in_scope": [
        "goals", "system_subjects", "system_users", "user_experience", "impact_assessment",
        "sandboxing", "continuous_testing", "reliability_assessment", "black_box_auditing",
    ],
    "retained_questions": [
        "altai-h-01", "wb-h-02",
        "wb-r-01", "wb-r-02",
        "wb-p-01",
        "altai-t-01", "altai-t-02", "altai-t-03", "wb-t-04",
        "wb-d-01",
        "wb-s-01",
        "wb-a-01",
    ],
    "ux_questions_verbatim": [
        "Did you explain the decision(s) of the AI system to the users?",
        "Do you continuously survey the users to assess whether they understand the "
        "decision(s) of the AI system?",
        "Did you provide appropriate training material and disclaimers to users on how "
        "to adequately use the AI system?",
    ],
    "concerns": [
        {"requirement": "TechnicalRobustnessSafety", "severity": "Major"},
        {"requirement": "PrivacyDataGovernance", "severity": "Advisory"},
        {"requirement": "Transparency", "severity": "Info"},
    ],
    "recommendation_texts": [RECOMMENDATION_LOG_PARAMS, RECOMMENDATION_RANDOMISED_DISPLAY],
    "monitor": {
        "spec_id": "rec-acceptance-parity",
        "batch_count": 3,
        "pass_count": 2,
        "fail_count": 1,
        "failing_batch_index": 1,
        "failing_value": "2/3",
    },
}

_GARMI_GOLDEN = {
    "audit_id": GARMI_ID,
    "phase": "Planning",
    "coverage": {
        "overall": "6/13",
        "per_phase": {"formulation": "1/1", "data": "1/2", "model": "0/1", "deployment": "0/1"},
    },
    "in_scope": [
        "goals", "legacy_systems", "evaluation_metrics", "system_subjects", "system_users",
        "societal_context", "user_experience", "security_assessment", "impact_assessment",
        "data_specification", "data_collection", "processing",
    ],
    "retained_questions": [
        "altai-h-01", "wb-h-02",
        "wb-r-01",
        "wb-p-01", "wb-p-02",
        "altai-t-01", "altai-t-02", "altai-t-03",
        "wb-s-01",
        "wb-a-01",
    ],
    "goals_text_fragment": "an elderly patient's facial expression",
}


def write_fixtures() -> None:
    calibration_store, _ = build_calibration()
    garmi_store, _ = build_garmi()
    (FIXTURE_DIR / "pilot_calibration.zip").write_bytes(
        export_bundle(calibration_store, CALIBRATION_ID)
    )
    (FIXTURE_DIR / "pilot_garmi.zip").write_bytes(export_bundle(garmi_store, GARMI_ID))
    (FIXTURE_DIR / "pilot_calibration_golden.json").write_bytes(
        canonical_json_bytes(_CALIBRATION_GOLDEN) + b"\n"
    )
    (FIXTURE_DIR / "pilot_garmi_golden.json").write_bytes(
        canonical_json_bytes(_GARMI_GOLDEN) + b"\n"
    )
    log_lines = [
        json.dumps(record.to_doc(), sort_keys=True) for record in calibration_monitor_log()
    ]
    (FIXTURE_DIR / "calibration_monitor_log.ndjson").write_text(
        "\n".join(log_lines) + "\n", encoding="utf-8"
    )


if __name__ == "__main__":
    write_fixtures()
    print(f"fixtures written to {FIXTURE_DIR}")
