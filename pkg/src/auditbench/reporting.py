"""Deterministic audit report compilation and rendering.

A report is a pure function of the iteration state and a supplied clock
instant: no ambient time, no randomness. Compiling twice with the same
inputs yields byte-identical canonical output and therefore the same
content digest. Failures are never summarized away: every failing test
record and every failing or indeterminate monitor batch appears in full,
while healthy results stay as counters so reports remain bounded.

Section order is fixed: metadata, scope & coverage, auditability & waivers,
risk assessment, fieldwork, monitoring, recommendations, next-round criteria.
"""

from __future__ import annotations

from dataclasses import replace
from datetime import datetime
from typing import Any, Mapping

from .canonical import canonical_json_bytes, digest_doc, format_timestamp
from .errors import ValidationError
from .fieldwork import TestVerdict, test_summary
from .lifecycle import StepStatus, status_color
from .monitoring import BatchVerdict
from .risk_assessment import Answer, MitigationStatus, Requirement
from .workflow import Audit, AuditIteration, IterationPhase, store_report

#: Fixed report section order (also the markdown heading order).
REPORT_SECTIONS: tuple[str, ...] = (
    "metadata",
    "scope_coverage",
    "auditability",
    "risk_assessment",
    "fieldwork",
    "monitoring",
    "recommendations",
    "next_round",
)

_SECTION_HEADINGS: Mapping[str, str] = {
    "metadata": "Metadata",
    "scope_coverage": "Scope & Coverage",
    "auditability": "Auditability & Waivers",
    "risk_assessment": "Risk Assessment",
    "fieldwork": "Fieldwork",
    "monitoring": "Monitoring",
    "recommendations": "Recommendations",
    "next_round": "Next Round Criteria",
}

CANONICAL_FORMAT = "canonical-document"
MARKUP_FORMAT = "human-readable-markup"


def _question_summary(audit: Audit, iteration: AuditIteration) -> dict[str, Any]:
    retained = audit.retained_questions(iteration)
    current = iteration.current_responses()
    counts: dict[str, dict[str, int]] = {}
    for requirement in Requirement:
        row = {answer.value: 0 for answer in Answer}
        row["Deferred"] = 0
        row["Unanswered"] = 0
        counts[requirement.value] = row
    deferred = iteration.deferred_ids()
    for question in retained:
        row = counts[question.requirement.value]
        response = current.get(question.id)
        if response is not None:
            row[response.answer.value] += 1
        elif question.id in deferred:
            row["Deferred"] += 1
        else:
            row["Unanswered"] += 1
    return {
        "retained": len(retained),
        "answered": len([q for q in retained if q.id in current]),
        "deferred": sorted(deferred),
        "per_requirement": counts,
    }


def _fieldwork_section(iteration: AuditIteration) -> dict[str, Any]:
    evidence_counts: dict[str, int] = {}
    for item in iteration.evidence:
        key = f"{item.kind.value}/{item.access_basis.value}"
        evidence_counts[key] = evidence_counts.get(key, 0) + 1
    failed_tests = [t.to_doc() for t in iteration.tests if t.verdict == TestVerdict.FAIL]
    warnings = sorted(
        {w for t in iteration.tests for w in t.warnings}
    )
    return {
        "evidence_count": len(iteration.evidence),
        "evidence_by_kind": evidence_counts,
        "evidence_manifest": [
            {
                "id": item.id,
                "kind": item.kind.value,
                "artifact_type": item.artifact_type,
                "step_tags": sorted(item.step_tags),
                "digest": item.content_digest,
                "access_basis": item.access_basis.value,
            }
            for item in iteration.evidence
        ],
        "test_summary": test_summary(iteration.tests),
        "failed_tests": failed_tests,
        "test_warnings": warnings,
        "assurance_validation": (
            iteration.assurance_validation.to_doc() if iteration.assurance_validation else None
        ),
    }


def _monitoring_section(iteration: AuditIteration) -> dict[str, Any]:
    per_spec: list[dict[str, Any]] = []
    for run in iteration.monitor_runs:
        flagged = [
            r.to_doc()
            for r in run.results
            if r.verdict in (BatchVerdict.FAIL, BatchVerdict.INDETERMINATE)
        ]
        per_spec.append(
            {
                "spec_id": run.spec_id,
                "batch_count": run.batch_count,
                "pass_count": run.pass_count,
                "fail_count": run.fail_count,
                "indeterminate_count": run.indeterminate_count,
                "malformed_total": run.malformed_total,
                "flagged_batches": flagged,
            }
        )
    return {
        "specs": [s.to_doc() for s in iteration.monitor_specs],
        "runs": per_spec,
    }


def _scope_section(iteration: AuditIteration) -> dict[str, Any]:
    assert iteration.scope is not None
    scope = iteration.scope
    statuses = scope.status_map()
    steps: list[dict[str, Any]] = []
    for phase_id, phase_title, step_ids in scope.phases:
        for step_id in step_ids:
            assessment = scope.statuses.get(step_id)
            meta = scope.step_meta.get(step_id, {})
            steps.append(
                {
                    "phase": phase_id,
                    "phase_title": phase_title,
                    "step": step_id,
                    "title": meta.get("title", step_id),
                    "owner": meta.get("owner"),
                    "status": statuses[step_id].value,
                    "color": status_color(statuses[step_id]),
                    "rationale": assessment.rationale if assessment else "",
                }
            )
    return {
        "coverage": scope.coverage().to_doc(),
        "steps": steps,
        "in_scope": list(scope.in_scope),
        "retained_questions": list(scope.retained_questions),
        "questionnaire_digest": scope.questionnaire_digest,
    }


def _validate_expected_artifacts(iteration: AuditIteration) -> None:
    assert iteration.scope is not None
    scope = iteration.scope
    statuses = scope.status_map()
    offenders = [
        step_id
        for step_id, meta in scope.step_meta.items()
        if not meta.get("expected_artifacts")
        and statuses.get(step_id, StepStatus.PENDING) != StepStatus.NOT_RELEVANT
    ]
    if offenders:
        raise ValidationError(
            "steps without expected artifacts must be assessed NotRelevant by reporting time",
            sorted(offenders),
        )


def build_report_doc(audit: Audit, iteration: AuditIteration, at: datetime) -> dict[str, Any]:
    """Assemble the report document (without storing it)."""
    if iteration.phase != IterationPhase.REPORTING:
        raise ValidationError(
            f"report compilation requires the Reporting phase; iteration "
            f"{iteration.index} is in {iteration.phase.value}"
        )
    if iteration.scope is None:
        raise ValidationError("iteration has no frozen scope snapshot")
    if iteration.concerns is None:
        raise ValidationError("concerns have not been derived for this iteration")
    _validate_expected_artifacts(iteration)

    registry = audit.mitigation_by_id()
    recommendations = []
    for link in iteration.recommendation_links:
        mitigation = registry[link.recommendation_id]
        recommendations.append(
            {
                "recommendation": mitigation.to_doc(),
                "requirement": link.requirement.value if link.requirement else None,
                "note": link.note,
            }
        )

    doc: dict[str, Any] = {
        "format": "auditbench-report/1",
        "metadata": {
            "audit_id": audit.id,
            "audit_title": audit.title,
            "audit_kind": audit.kind.value,
            "target_system": audit.target_system,
            "iteration": iteration.index,
            "generated_at": format_timestamp(at),
        },
        "scope_coverage": _scope_section(iteration),
        "auditability": {
            "result": (
                iteration.auditability_result.to_doc()
                if iteration.auditability_result
                else None
            ),
            "waiver": (
                iteration.auditability_waiver.to_doc()
                if iteration.auditability_waiver
                else None
            ),
        },
        "risk_assessment": {
            "concerns": [c.to_doc() for c in iteration.concerns],
            "question_summary": _question_summary(audit, iteration),
        },
        "fieldwork": _fieldwork_section(iteration),
        "monitoring": _monitoring_section(iteration),
        "recommendations": recommendations,
        "next_round": {
            "triggers": [
                {"id": t.id, "kind": t.kind.value, "description": t.describe()}
                for t in audit.triggers
            ],
            "carried_mitigations": list(audit.carried_mitigations),
        },
    }
    doc["content_digest"] = digest_doc(doc)
    return doc


def compile_report(audit: Audit, *, at: datetime) -> tuple[Audit, dict[str, Any]]:
    """Compile and store the open iteration's report.

    The clock instant is an explicit argument so identical iteration state
    always compiles to identical bytes.
    """
    iteration = audit.require_open_iteration()
    doc = build_report_doc(audit, iteration, at)
    return store_report(audit, doc), doc


def verify_report_digest(doc: Mapping[str, Any]) -> bool:
    body = {k: v for k, v in doc.items() if k != "content_digest"}
    return digest_doc(body) == doc.get("content_digest")


def render(report: Mapping[str, Any], fmt: str) -> bytes:
    """Render a compiled report.

    ``canonical-document`` is the bit-exact, digest-stable form;
    ``human-readable-markup`` is markdown with every section present in
    fixed order.
    """
    if fmt == CANONICAL_FORMAT:
        return canonical_json_bytes(report)
    if fmt == MARKUP_FORMAT:
        return _render_markdown(report).encode("utf-8")
    raise ValidationError(f"unknown report format: {fmt!r}")


def _render_markdown(report: Mapping[str, Any]) -> str:
    meta = report["metadata"]
    lines: list[str] = [
        f"# Audit report: {meta['audit_title']} (iteration {meta['iteration']})",
        "",
    ]
    for section in REPORT_SECTIONS:
        lines.append(f"## {_SECTION_HEADINGS[section]}")
        lines.append("")
        lines.extend(_SECTION_RENDERERS[section](report))
        lines.append("")
    lines.append(f"Content digest: `{report.get('content_digest', '')}`")
    lines.append("")
    return "\n".join(lines)


def _render_metadata(report: Mapping[str, Any]) -> list[str]:
    meta = report["metadata"]
    return [
        f"- Audit: {meta['audit_title']} (`{meta['audit_id']}`)",
        f"- Kind: {meta['audit_kind']}",
        f"- Target system: {meta['target_system']}",
        f"- Iteration: {meta['iteration']}",
        f"- Generated at: {meta['generated_at']}",
    ]


def _render_scope(report: Mapping[str, Any]) -> list[str]:
    section = report["scope_coverage"]
    coverage = section["coverage"]
    overall = coverage["overall"] if coverage["overall"] is not None else "undefined"
    lines = [f"Overall coverage: {overall}", ""]
    lines.append("| Phase | Step | Status | Color | Rationale |")
    lines.append("| --- | --- | --- | --- | --- |")
    for step in section["steps"]:
        lines.append(
            f"| {step['phase_title']} | {step['title']} | {step['status']} "
            f"| {step['color']} | {step['rationale']} |"
        )
    return lines


def _render_auditability(report: Mapping[str, Any]) -> list[str]:
    section = report["auditability"]
    lines: list[str] = []
    result = section.get("result")
    if result is not None:
        lines.append(f"Verdict: {result['verdict']}")
        for blocker in result.get("blockers", []):
            lines.append(f"- blocker: {blocker}")
    waiver = section.get("waiver")
    if waiver is not None:
        lines.append(f"Waived by {waiver['actor']}: {waiver['rationale']}")
    if not lines:
        lines.append("No auditability record.")
    return lines


def _render_risk(report: Mapping[str, Any]) -> list[str]:
    section = report["risk_assessment"]
    lines: list[str] = []
    concerns = section["concerns"]
    if concerns:
        for concern in concerns:
            lines.append(
                f"- **{concern['requirement']}** ({concern['severity']}): triggered by "
                f"{', '.join(concern['triggering_responses'])}"
            )
    else:
        lines.append("No ethical concerns derived.")
    summary = section["question_summary"]
    lines.append("")
    lines.append(
        f"Questions retained: {summary['retained']}, answered: {summary['answered']}, "
        f"deferred: {len(summary['deferred'])}"
    )
    return lines


def _render_fieldwork(report: Mapping[str, Any]) -> list[str]:
    section = report["fieldwork"]
    lines = [f"Evidence items: {section['evidence_count']}"]
    for key, count in sorted(section["evidence_by_kind"].items()):
        lines.append(f"- {key}: {count}")
    lines.append("")
    lines.append("| Category | Pass | Fail | Inconclusive |")
    lines.append("| --- | --- | --- | --- |")
    for category, verdicts in sorted(section["test_summary"].items()):
        lines.append(
            f"| {category} | {verdicts['Pass']} | {verdicts['Fail']} "
            f"| {verdicts['Inconclusive']} |"
        )
    for test in section["failed_tests"]:
        lines.append(f"- FAILED {test['id']} ({test['category']}): {test['procedure']}")
    for warning in section["test_warnings"]:
        lines.append(f"- warning: {warning}")
    return lines


def _render_monitoring(report: Mapping[str, Any]) -> list[str]:
    section = report["monitoring"]
    if not section["runs"]:
        return ["No monitor runs recorded."]
    lines: list[str] = []
    for run in section["runs"]:
        lines.append(
            f"- {run['spec_id']}: {run['batch_count']} batch(es) — "
            f"{run['pass_count']} pass, {run['fail_count']} fail, "
            f"{run['indeterminate_count']} indeterminate"
        )
        for batch in run["flagged_batches"]:
            value = (
                f"{batch['value']:.6f}" if batch["value"] is not None else "indeterminate"
            )
            lines.append(
                f"  - batch {batch['batch_index']} [{batch['verdict']}]: value {value}, "
                f"window {batch['window']['first']}..{batch['window']['last']} "
                f"({batch['window']['count']} records)"
            )
    return lines


def _render_recommendations(report: Mapping[str, Any]) -> list[str]:
    recommendations = report["recommendations"]
    if not recommendations:
        return ["No recommendations."]
    lines: list[str] = []
    for item in recommendations:
        rec = item["recommendation"]
        target = item["requirement"] or f"auditor note: {item['note']}"
        flag = "mandatory" if rec["mandatory"] else "optional"
        lines.append(f"- [{rec['status']}] ({flag}) {rec['text']} — {target}")
    return lines


def _render_next_round(report: Mapping[str, Any]) -> list[str]:
    section = report["next_round"]
    lines = [f"- {t['description']}" for t in section["triggers"]]
    if not lines:
        lines.append("No re-audit triggers configured.")
    if section["carried_mitigations"]:
        lines.append(
            f"Carried mitigations: {', '.join(section['carried_mitigations'])}"
        )
    return lines


_SECTION_RENDERERS = {
    "metadata": _render_metadata,
    "scope_coverage": _render_scope,
    "auditability": _render_auditability,
    "risk_assessment": _render_risk,
    "fieldwork": _render_fieldwork,
    "monitoring": _render_monitoring,
    "recommendations": _render_recommendations,
    "next_round": _render_next_round,
}


def carry_over_mitigations(audit: Audit, report: Mapping[str, Any]) -> Audit:
    """Copy the report's still-open mandatory recommendations onto the audit
    so the next iteration cannot reach Reported until they are resolved.

    Only the latest reported iteration's report may be carried over.
    """
    reported = [it for it in audit.iterations if it.phase == IterationPhase.REPORTED]
    if not reported:
        raise ValidationError("audit has no reported iteration to carry over from")
    latest = reported[-1]
    if latest.report is None or latest.report.get("content_digest") != report.get(
        "content_digest"
    ):
        raise ValidationError(
            "carry-over requires the latest reported iteration's report"
        )
    open_mandatory = [
        item["recommendation"]["id"]
        for item in report.get("recommendations", [])
        if item["recommendation"]["mandatory"]
        and item["recommendation"]["status"] == MitigationStatus.OPEN.value
    ]
    merged = tuple(dict.fromkeys(audit.carried_mitigations + tuple(open_mandatory)))
    if merged == audit.carried_mitigations:
        return audit
    return replace(audit, carried_mitigations=merged, revision=audit.revision + 1)
