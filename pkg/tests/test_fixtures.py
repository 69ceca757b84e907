from __future__ import annotations

import pytest

from auditbench import lifecycle as lc
from auditbench import reporting
from auditbench import workflow as wf
from auditbench.bundle import verify_bundle
from auditbench.canonical import format_fraction
from auditbench.errors import NotFoundError
from auditbench.fixtures import (
    load_pilot,
    pilot_bundle_bytes,
    pilot_golden,
    sample_question_csv,
)
from auditbench.risk_assessment import Answer, QuestionResponse, import_questions

from conftest import ts


class TestBundleValidity:
    @pytest.mark.parametrize("name", ["calibration", "garmi"])
    def test_fixture_is_valid_bundle(self, name):
        manifest = verify_bundle(pilot_bundle_bytes(name))
        assert manifest["format_version"] == 1

    def test_unknown_pilot_rejected(self):
        with pytest.raises(NotFoundError):
            load_pilot("nonexistent")

    @pytest.mark.parametrize("name", ["calibration", "garmi"])
    def test_rebuild_is_deterministic(self, name):
        from auditbench.bundle import export_bundle
        from auditbench.fixtures.build import build_calibration, build_garmi

        build = build_calibration if name == "calibration" else build_garmi
        store, audit = build()
        assert export_bundle(store, audit.id) == pilot_bundle_bytes(name)


class TestCalibrationPilot:
    def test_documented_phase_and_statuses(self):
        audit = load_pilot("calibration")
        golden = pilot_golden("calibration")
        iteration = audit.require_open_iteration()
        assert iteration.phase.value == golden["phase"]
        statuses = audit.model.status_map()
        # data management ruled not relevant; model history not auditable
        for step in ("data_specification", "data_collection", "curation",
                     "processing", "extraction", "data_quality_assessment"):
            assert statuses[step] == lc.StepStatus.NOT_RELEVANT
        for step in ("model_specification", "feature_engineering", "training_optimisation",
                     "validation_interpretation", "model_quality_assessment"):
            assert statuses[step] == lc.StepStatus.NOT_AUDITABLE
        rationales = {
            a.step_id: a.rationale for a in audit.model.current_assessments().values()
        }
        assert rationales["training_optimisation"] == "Not accessible anymore."
        assert "legacy infrastructure" in rationales["curation"]
        assert rationales["operational_logging"] == "Missing."

    def test_golden_coverage(self):
        audit = load_pilot("calibration")
        golden = pilot_golden("calibration")
        report = lc.coverage(audit.model)
        assert format_fraction(report.overall) == golden["coverage"]["overall"]
        for phase_id, expected in golden["coverage"]["per_phase"].items():
            assert format_fraction(report.per_phase[phase_id].fraction) == expected

    def test_golden_scope_and_questions(self):
        audit = load_pilot("calibration")
        golden = pilot_golden("calibration")
        iteration = audit.require_open_iteration()
        assert list(iteration.scope.in_scope) == golden["in_scope"]
        assert list(iteration.scope.retained_questions) == golden["retained_questions"]

    def test_golden_concerns(self):
        audit = load_pilot("calibration")
        golden = pilot_golden("calibration")
        iteration = audit.require_open_iteration()
        got = [
            {"requirement": c.requirement.value, "severity": c.severity.value}
            for c in iteration.concerns
        ]
        assert got == golden["concerns"]

    def test_golden_monitor_run(self):
        audit = load_pilot("calibration")
        golden = pilot_golden("calibration")["monitor"]
        run = audit.require_open_iteration().monitor_runs[0]
        assert run.spec_id == golden["spec_id"]
        assert run.batch_count == golden["batch_count"]
        assert run.pass_count == golden["pass_count"]
        assert run.fail_count == golden["fail_count"]
        failing = [r for r in run.results if r.verdict.value == "Fail"]
        assert [r.batch_index for r in failing] == [golden["failing_batch_index"]]
        num, den = golden["failing_value"].split("/")
        assert abs(failing[0].value - int(num) / int(den)) < 1e-12


class TestGarmiPilot:
    def test_documented_phase_and_statuses(self):
        audit = load_pilot("garmi")
        golden = pilot_golden("garmi")
        iteration = audit.require_open_iteration()
        assert iteration.phase.value == golden["phase"]
        statuses = audit.model.status_map()
        formulation = audit.model.phases[0]
        assert all(statuses[s.id] == lc.StepStatus.IN_SCOPE for s in formulation.steps)
        for step in ("model_specification", "sandboxing", "post_market_analysis"):
            assert statuses[step] == lc.StepStatus.NOT_AUDITABLE

    def test_goals_text_present(self):
        audit = load_pilot("garmi")
        golden = pilot_golden("garmi")
        goals = audit.model.current_assessments()["goals"]
        assert golden["goals_text_fragment"] in goals.rationale

    def test_golden_coverage(self):
        audit = load_pilot("garmi")
        golden = pilot_golden("garmi")
        report = lc.coverage(audit.model)
        assert format_fraction(report.overall) == golden["coverage"]["overall"]
        for phase_id, expected in golden["coverage"]["per_phase"].items():
            assert format_fraction(report.per_phase[phase_id].fraction) == expected

    def test_full_legal_walk_to_reported(self):
        audit = load_pilot("garmi")
        golden = pilot_golden("garmi")
        audit = wf.advance_phase(audit, actor="auditor", at=ts())
        iteration = audit.require_open_iteration()
        assert list(iteration.scope.retained_questions) == golden["retained_questions"]
        for qid in iteration.scope.retained_questions:
            audit = wf.record_response(
                audit,
                QuestionResponse(
                    question_id=qid, answer=Answer.YES, justification="",
                    answered_by="auditor", timestamp=ts(),
                ),
            )
        audit = wf.advance_phase(audit, actor="auditor", at=ts())
        audit = wf.derive_and_store_concerns(audit)[0]
        audit, report = reporting.compile_report(audit, at=ts(100))
        audit = wf.advance_phase(audit, actor="auditor", at=ts())
        assert audit.open_iteration() is None
        assert report["scope_coverage"]["coverage"]["overall"] == "6/13"


class TestSampleQuestions:
    def test_sample_csv_resolves_against_default_template(self):
        db = import_questions(sample_question_csv(), lc.instantiate_template())
        assert len(db) == 15
        assert db.by_id()["wb-r-01"].mandatory


class TestDocumentationTemplates:
    def test_templates_load(self):
        from auditbench.fixtures import DOCUMENTATION_TEMPLATES, documentation_template

        for name in DOCUMENTATION_TEMPLATES:
            text = documentation_template(name)
            assert text.startswith("#")
            assert "##" in text

    def test_unknown_template_rejected(self):
        from auditbench.fixtures import documentation_template

        with pytest.raises(NotFoundError):
            documentation_template("runbook")
