from __future__ import annotations

import base64
import json
import time

import pytest
from fastapi.testclient import TestClient

from auditbench import lifecycle as lc
from auditbench.api import create_app
from auditbench.canonical import sha256_hex
from auditbench.errors import ConflictError
from auditbench.fixtures import (
    calibration_monitor_log_text,
    pilot_bundle_bytes,
    sample_question_csv,
)
from auditbench.service import Workbench, WorkbenchConfig
from auditbench.store import Store
from auditbench.workflow import AuditKind

from conftest import ts


@pytest.fixture
def bench(tmp_path):
    return Workbench(store=Store(tmp_path / "store"))


@pytest.fixture
def client(bench):
    return TestClient(create_app(workbench=bench))


class TestWorkbench:
    def test_create_and_reload_from_disk(self, tmp_path):
        bench = Workbench(store=Store(tmp_path / "store"))
        audit = bench.create_audit("a", AuditKind.THIRD_PARTY, "sys", audit_id="x1")
        assert audit.revision == 1
        # a new workbench over the same path sees the audit
        again = Workbench(store=Store(tmp_path / "store"))
        assert again.get_audit("x1").title == "a"

    def test_revision_protocol_rejects_stale_writer(self, bench):
        audit = bench.create_audit("a", AuditKind.THIRD_PARTY, "sys", audit_id="x1")
        assessment = lc.StepAssessment(
            step_id="goals", status=lc.StepStatus.IN_SCOPE, rationale="r",
            assessed_by="t", timestamp=ts(), expected_revision=audit.model.revision,
        )
        bench.assess_step("x1", audit.revision, assessment)
        with pytest.raises(ConflictError):
            bench.assess_step("x1", audit.revision, assessment)  # stale

    def test_import_question_db_standalone(self, bench):
        db_id, db = bench.import_question_db(sample_question_csv())
        assert db_id.startswith("questiondb:")
        assert bench.get_question_db(db_id).digest == db.digest

    def test_monitor_job_lifecycle(self, bench):
        bench.import_bundle(pilot_bundle_bytes("calibration"))
        job = bench.submit_monitor_job(
            "pilot-calibration", "rec-acceptance-parity", calibration_monitor_log_text()
        )
        for _ in range(100):
            if bench.get_job(job.id).status in ("done", "error"):
                break
            time.sleep(0.05)
        finished = bench.get_job(job.id)
        assert finished.status == "done"
        assert finished.result["fail_count"] == 1

    def test_verify_evidence_reports_tamper(self, bench):
        bench.import_bundle(pilot_bundle_bytes("calibration"))
        clean = bench.verify_evidence("pilot-calibration")
        assert clean["failed"] == []
        assert len(clean["verified"]) == 2
        victim = bench.get_audit("pilot-calibration").iterations[0].evidence[0]
        bench.store.overwrite_blob_unchecked(victim.content_digest, b"evil")
        tampered = bench.verify_evidence("pilot-calibration")
        assert [f["id"] for f in tampered["failed"]] == [victim.id]


class TestApiWalkthrough:
    def test_full_walkthrough(self, client):
        # create
        created = client.post(
            "/audits",
            json={"title": "walk", "kind": "ThirdParty", "target_system": "sys",
                  "audit_id": "walk-1", "actor": "t"},
        )
        assert created.status_code == 201
        revision = created.json()["revision"]
        model_revision = created.json()["model"]["revision"]

        # scope two steps with owners and sources
        for step in ("goals", "user_experience"):
            r = client.put(
                f"/audits/walk-1/steps/{step}/owner",
                json={"expected_revision": revision, "owner": "owner"},
            )
            assert r.status_code == 200, r.text
            revision = r.json()["revision"]
            model_revision = r.json()["model"]["revision"]
            r = client.post(
                "/audits/walk-1/assessments",
                json={
                    "expected_revision": revision,
                    "assessment": {
                        "step_id": step, "status": "InScope", "rationale": "needed",
                        "assessed_by": "t", "expected_revision": model_revision,
                    },
                },
            )
            assert r.status_code == 200, r.text
            revision = r.json()["revision"]
            model_revision = r.json()["model"]["revision"]
            r = client.post(
                "/audits/walk-1/evidence-sources",
                json={
                    "expected_revision": revision,
                    "declaration": {"step_id": step, "description": "docs",
                                    "access_basis": "Disclosed"},
                },
            )
            assert r.status_code == 200, r.text
            revision = r.json()["revision"]

        # coverage endpoint serves the wire fractions (reduced form)
        coverage = client.get("/audits/walk-1/coverage").json()
        assert coverage["overall"] == "1/13"  # 2 of 26
        assert coverage["per_phase"]["formulation"]["blue"] == 2

        # question db
        r = client.post(
            "/audits/walk-1/question-db",
            json={"expected_revision": revision, "document": sample_question_csv()},
        )
        assert r.status_code == 200, r.text
        revision = client.get("/audits/walk-1").json()["revision"]

        # auditability + advance to fieldwork
        gate = client.get("/audits/walk-1/auditability").json()
        assert gate["verdict"] == "Auditable"
        r = client.post(
            "/audits/walk-1/advance",
            json={"expected_revision": revision, "actor": "t",
                  "at": "2024-06-02T08:00:00Z"},
        )
        assert r.status_code == 200, r.text
        revision = r.json()["revision"]

        # filtered questions grouped by scope
        questions = client.get("/audits/walk-1/questions").json()
        assert {q["id"] for q in questions} >= {"altai-t-01", "altai-t-02", "altai-t-03"}

        # answer everything
        for q in questions:
            r = client.post(
                "/audits/walk-1/responses",
                json={
                    "expected_revision": revision,
                    "response": {
                        "question_id": q["id"], "answer": "Yes",
                        "justification": "", "answered_by": "t",
                    },
                },
            )
            assert r.status_code == 200, r.text
            revision = r.json()["revision"]

        # evidence with inline content
        content = b"api evidence blob"
        r = client.post(
            "/audits/walk-1/evidence",
            json={
                "expected_revision": revision,
                "item": {
                    "id": "ev-api", "kind": "Transparency", "artifact_type": "document",
                    "step_tags": ["goals"], "content_digest": sha256_hex(content),
                    "collected_by": "t", "timestamp": "2024-06-02T09:00:00Z",
                    "access_basis": "Disclosed",
                },
                "content_base64": base64.b64encode(content).decode(),
            },
        )
        assert r.status_code == 200, r.text
        revision = r.json()["revision"]
        verify = client.get("/audits/walk-1/evidence/verify").json()
        assert verify["verified"] == ["ev-api"]

        # advance to reporting, derive concerns, compile
        r = client.post(
            "/audits/walk-1/advance",
            json={"expected_revision": revision, "actor": "t"},
        )
        assert r.status_code == 200, r.text
        revision = r.json()["revision"]
        r = client.post("/audits/walk-1/concerns", json={"expected_revision": revision})
        assert r.status_code == 200, r.text
        assert r.json()["concerns"] == []  # everything answered Yes
        revision = r.json()["revision"]
        r = client.post(
            "/audits/walk-1/report",
            json={"expected_revision": revision, "at": "2024-06-03T08:00:00Z"},
        )
        assert r.status_code == 200, r.text
        report = r.json()
        assert report["metadata"]["audit_id"] == "walk-1"

        # rendered report matches the digest
        canonical = client.get("/audits/walk-1/report?format=canonical")
        assert canonical.status_code == 200
        parsed = json.loads(canonical.content)
        assert parsed["content_digest"] == report["content_digest"]
        markdown = client.get("/audits/walk-1/report?format=markdown")
        assert markdown.text.startswith("# Audit report")

        # advance to Reported
        revision = client.get("/audits/walk-1").json()["revision"]
        r = client.post(
            "/audits/walk-1/advance", json={"expected_revision": revision, "actor": "t"}
        )
        assert r.status_code == 200, r.text

    def test_conflict_returns_409(self, client):
        client.post(
            "/audits",
            json={"title": "c", "kind": "ThirdParty", "target_system": "s",
                  "audit_id": "c-1"},
        )
        r = client.put(
            "/audits/c-1/steps/goals/owner",
            json={"expected_revision": 999, "owner": "x"},
        )
        assert r.status_code == 409
        assert r.json()["detail"]["actual"] == 1

    def test_gate_violation_returns_409_with_conditions(self, client):
        client.post(
            "/audits",
            json={"title": "g", "kind": "ThirdParty", "target_system": "s",
                  "audit_id": "g-1"},
        )
        r = client.post("/audits/g-1/advance", json={"expected_revision": 1, "actor": "t"})
        assert r.status_code == 409
        assert any("empty scope" in u for u in r.json()["detail"]["unmet"])

    def test_unknown_audit_404(self, client):
        assert client.get("/audits/nope").status_code == 404

    def test_bad_enum_400(self, client):
        r = client.post(
            "/audits", json={"title": "x", "kind": "FourthParty", "target_system": "s"}
        )
        assert r.status_code == 400

    def test_bundle_roundtrip_over_http(self, client):
        client.post("/bundles", content=pilot_bundle_bytes("garmi"))
        exported = client.get("/audits/pilot-garmi/bundle")
        assert exported.status_code == 200
        again = client.post("/bundles?rename_to=garmi-2", content=exported.content)
        assert again.status_code == 201
        assert again.json()["audit_id"] == "garmi-2"
        assert client.get("/audits/garmi-2").status_code == 200

    def test_corrupt_bundle_rejected_over_http(self, client):
        data = bytearray(pilot_bundle_bytes("garmi"))
        data[len(data) // 2] ^= 0xFF
        r = client.post("/bundles", content=bytes(data))
        assert r.status_code == 400

    def test_events_fire_triggers(self, client):
        client.post("/bundles", content=pilot_bundle_bytes("garmi"))
        revision = client.get("/audits/pilot-garmi").json()["revision"]
        # garmi is still Planning; context events only count
        r = client.post(
            "/audits/pilot-garmi/events",
            json={"kind": "DeploymentContextChange", "note": "new ward"},
        )
        assert r.status_code == 200
        assert r.json()["fired"] == []

    def test_monitor_job_over_http(self, client):
        client.post("/bundles", content=pilot_bundle_bytes("calibration"))
        r = client.post(
            "/audits/pilot-calibration/monitors/rec-acceptance-parity/jobs",
            json={"log": calibration_monitor_log_text()},
        )
        assert r.status_code == 202
        job_id = r.json()["id"]
        for _ in range(100):
            status = client.get(f"/jobs/{job_id}").json()
            if status["status"] in ("done", "error"):
                break
            time.sleep(0.05)
        assert status["status"] == "done"
        assert status["result"]["fail_count"] == 1

    def test_register_endpoints(self, client):
        from auditbench.fixtures import sample_register_entries

        for entry in sample_register_entries():
            r = client.post("/register/entries", json={"entry": entry.to_doc()})
            assert r.status_code == 201, r.text
        found = client.get("/register/entries?steps=user_experience").json()
        assert any(e["id"] == "risk-over-reliance" for e in found)
        filtered = client.get(
            "/register/entries?steps=user_experience&requirement=Accountability"
        ).json()
        assert filtered == []

    def test_register_feed_endpoint(self, client):
        csv_text = (
            "id,title,description,steps,feed\n"
            "ext-9,reported incident,needs detail,operational_logging,aiaaic\n"
        )
        r = client.post("/register/feed", json={"csv": csv_text})
        assert r.status_code == 201, r.text
        found = client.get("/register/entries?steps=operational_logging").json()
        assert found[0]["id"] == "ext-9"
        assert found[0]["needs_enrichment"] is True


class TestTokenAuth:
    def test_token_required_when_configured(self, tmp_path):
        config = WorkbenchConfig(token="secret")
        bench = Workbench(store=Store(tmp_path / "s"), config=config)
        client = TestClient(create_app(workbench=bench, config=config))
        assert client.get("/audits").status_code == 401
        assert client.get("/health").status_code == 200  # health stays open
        ok = client.get("/audits", headers={"Authorization": "Bearer secret"})
        assert ok.status_code == 200

    def test_no_token_means_open(self, client):
        assert client.get("/audits").status_code == 200
