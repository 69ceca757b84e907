"""auditbench: a self-hostable workbench for lifecycle-scoped ML audits.

Scope an audit on the four-phase lifecycle map, filter a step-tagged risk
question database down to that scope, collect evidence and test records,
monitor prediction logs in batches between iterations, and compile
deterministic, digest-stamped audit reports with re-audit triggers.
"""

from .bundle import export_bundle, import_bundle, verify_bundle
from .canonical import canonical_json_bytes, digest_doc, sha256_hex
from .errors import (
    AuditbenchError,
    BundleError,
    ConflictError,
    DigestMismatchError,
    GateError,
    NotFoundError,
    ValidationError,
)
from .fieldwork import (
    AccessBasis,
    AssuranceNode,
    AssuranceTree,
    AssuranceValidation,
    EvidenceItem,
    EvidenceKind,
    NodeKind,
    TestCategory,
    TestRecord,
    TestVerdict,
    validate_assurance_nodes,
)
from .lifecycle import (
    CoverageReport,
    LifecycleModel,
    Phase,
    Step,
    StepAssessment,
    StepStatus,
    add_step,
    coverage,
    instantiate_template,
    remove_step,
    set_step_owner,
    status_color,
)
from .lifecycle import assess_step as assess_model_step
from .monitoring import (
    BatchVerdict,
    MetricKind,
    MonitorBatchResult,
    MonitorRun,
    MonitorSpec,
    PredictionRecord,
    conditional_independence_ratio,
    error_rate,
    parse_prediction_log,
    run_monitor,
)
from .reporting import build_report_doc, compile_report, carry_over_mitigations, render
from .risk_assessment import (
    Answer,
    EthicalConcern,
    MitigationRecommendation,
    MitigationStatus,
    QuestionDB,
    QuestionResponse,
    Requirement,
    RiskQuestion,
    Severity,
    derive_concerns,
    export_questions,
    filter_questions,
    import_questions,
)
from .risk_register import (
    EntrySource,
    RiskRegister,
    RiskRegisterEntry,
    add_entry,
    ingest_external_feed,
    query_entries,
)
from .service import Job, Workbench, WorkbenchConfig
from .store import Store, StoredRevision
from .workflow import (
    Audit,
    AuditIteration,
    AuditKind,
    AuditabilityReport,
    EventKind,
    EvidenceSourceDeclaration,
    IterationPhase,
    ReauditTrigger,
    ScopeSnapshot,
    TriggerKind,
    advance_phase,
    assess_step,
    attach_question_db,
    attach_recommendation,
    build_assurance_argument,
    check_auditability,
    create_audit,
    declare_evidence_source,
    defer_question,
    derive_and_store_concerns,
    open_iteration,
    record_event,
    record_response,
    record_test,
    register_evidence,
    update_mitigation,
    waive_auditability,
)

__version__ = "0.1.0"
