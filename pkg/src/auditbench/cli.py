"""Command-line interface mirroring the workbench API.

Every command accepts ``--store <path>`` (or ``AUDITBENCH_STORE``) and can
emit machine-readable canonical JSON with ``--format canonical``.
"""

from __future__ import annotations

import functools
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import click

from . import lifecycle as lc
from .canonical import canonical_json_bytes, parse_timestamp, sha256_hex
from .errors import AuditbenchError
from .fieldwork import AccessBasis, EvidenceItem, EvidenceKind
from .monitoring import MonitorSpec, parse_prediction_log, run_monitor
from .reporting import CANONICAL_FORMAT, MARKUP_FORMAT
from .risk_assessment import Answer, Requirement, export_questions
from .risk_register import RiskRegisterEntry
from .service import Workbench, WorkbenchConfig
from .store import Store
from .workflow import AuditKind, EventKind, EvidenceSourceDeclaration

_FORMATS = click.Choice(["text", "canonical"])


def shared_options(fn: Callable) -> Callable:
    fn = click.option(
        "--store",
        "store_path",
        envvar="AUDITBENCH_STORE",
        default=".auditbench",
        show_default=True,
        help="Store directory.",
    )(fn)
    fn = click.option(
        "--format", "output_format", type=_FORMATS, default="text", show_default=True
    )(fn)

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except AuditbenchError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _bench(store_path: str) -> Workbench:
    return Workbench(store=Store(store_path))


def _emit(output_format: str, doc: Any, text: str) -> None:
    if output_format == "canonical":
        click.echo(canonical_json_bytes(doc).decode("utf-8"))
    else:
        click.echo(text)


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _at(value: str | None) -> datetime:
    return parse_timestamp(value) if value else _now()


@click.group()
def main() -> None:
    """auditbench: lifecycle-scoped ML audit workbench."""


# -- audit ------------------------------------------------------------------


@main.group()
def audit() -> None:
    """Create, scope, gate and advance audits."""


@audit.command("new")
@click.option("--title", required=True)
@click.option("--kind", type=click.Choice([k.value for k in AuditKind]), required=True)
@click.option("--target", default="")
@click.option("--id", "audit_id", default=None, help="Explicit audit id.")
@click.option("--actor", default="")
@shared_options
def audit_new(title: str, kind: str, target: str, audit_id: str | None, actor: str,
              store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    created = bench.create_audit(
        title, AuditKind(kind), target, audit_id=audit_id, actor=actor
    )
    _emit(output_format, created.to_doc(),
          f"created audit {created.id} (revision {created.revision})")


@audit.command("list")
@shared_options
def audit_list(store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    audits = bench.list_audits()
    lines = [
        f"{a['id']}  [{a['kind']}]  {a['title']}  "
        f"(iterations: {a['iterations']}, open: {a['open_phase'] or '-'})"
        for a in audits
    ]
    _emit(output_format, audits, "\n".join(lines) if lines else "no audits")


@audit.command("show")
@click.argument("audit_id")
@shared_options
def audit_show(audit_id: str, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    loaded = bench.get_audit(audit_id)
    iteration = loaded.open_iteration()
    summary = (
        f"{loaded.id}: {loaded.title} [{loaded.kind.value}] revision {loaded.revision}\n"
        f"open iteration: "
        f"{iteration.index if iteration else '-'} "
        f"({iteration.phase.value if iteration else 'all reported'})"
    )
    _emit(output_format, loaded.to_doc(), summary)


@audit.command("scope")
@click.argument("audit_id")
@click.option("--step", required=True)
@click.option("--status", type=click.Choice([s.value for s in lc.StepStatus]), required=True)
@click.option("--rationale", default="")
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None,
              help="Audit revision you last saw (defaults to current).")
@shared_options
def audit_scope(audit_id: str, step: str, status: str, rationale: str, actor: str,
                expected_revision: int | None, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    assessment = lc.StepAssessment(
        step_id=step,
        status=lc.StepStatus(status),
        rationale=rationale,
        assessed_by=actor,
        timestamp=_now(),
        expected_revision=current.model.revision,
    )
    updated = bench.assess_step(audit_id, expected, assessment, actor=actor)
    _emit(output_format, updated.model.to_doc(include_history=False),
          f"{step} -> {status} (audit revision {updated.revision})")


@audit.command("own")
@click.argument("audit_id")
@click.option("--step", required=True)
@click.option("--owner", required=True)
@click.option("--expected-revision", type=int, default=None)
@shared_options
def audit_own(audit_id: str, step: str, owner: str, expected_revision: int | None,
              store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    updated = bench.set_step_owner(audit_id, expected, step, owner)
    _emit(output_format, {"step": step, "owner": owner, "revision": updated.revision},
          f"{step} owned by {owner}")


@audit.command("source")
@click.argument("audit_id")
@click.option("--step", required=True)
@click.option("--description", required=True)
@click.option("--basis", type=click.Choice([b.value for b in AccessBasis]), required=True)
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def audit_source(audit_id: str, step: str, description: str, basis: str, actor: str,
                 expected_revision: int | None, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    declaration = EvidenceSourceDeclaration(
        step_id=step, description=description, access_basis=AccessBasis(basis), declared_by=actor
    )
    updated = bench.declare_evidence_source(audit_id, expected, declaration, actor=actor)
    _emit(output_format, declaration.to_doc(),
          f"declared {basis} source for {step} (revision {updated.revision})")


@audit.command("gate")
@click.argument("audit_id")
@shared_options
def audit_gate(audit_id: str, store_path: str, output_format: str) -> None:
    """Run the pre-fieldwork auditability check."""
    bench = _bench(store_path)
    report = bench.check_auditability(audit_id)
    doc = report.to_doc()
    lines = [f"verdict: {doc['verdict']}"]
    lines.extend(f"  {b}" for b in doc["blockers"])
    _emit(output_format, doc, "\n".join(lines))


@audit.command("waive")
@click.argument("audit_id")
@click.option("--rationale", required=True)
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def audit_waive(audit_id: str, rationale: str, actor: str, expected_revision: int | None,
                store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    updated = bench.waive_auditability(audit_id, expected, rationale, actor=actor, at=_now())
    _emit(output_format, {"revision": updated.revision}, "auditability waived")


@audit.command("advance")
@click.argument("audit_id")
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def audit_advance(audit_id: str, actor: str, expected_revision: int | None,
                  store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    updated = bench.advance_phase(audit_id, expected, actor=actor, at=_now())
    iteration = updated.open_iteration()
    phase = iteration.phase.value if iteration else "Reported"
    _emit(output_format, updated.to_doc(), f"advanced to {phase}")


@audit.command("event")
@click.argument("audit_id")
@click.option("--kind", type=click.Choice([k.value for k in EventKind]), required=True)
@click.option("--note", default="")
@shared_options
def audit_event(audit_id: str, kind: str, note: str, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    updated, fired = bench.record_event(audit_id, EventKind(kind), at=_now(), note=note)
    _emit(output_format, {"fired": fired, "revision": updated.revision},
          f"event recorded; fired: {', '.join(fired) if fired else 'none'}")


@audit.command("coverage")
@click.argument("audit_id")
@shared_options
def audit_coverage(audit_id: str, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    doc = bench.coverage(audit_id).to_doc()
    lines = [f"overall: {doc['overall'] or 'undefined'}"]
    for phase_id, pc in doc["per_phase"].items():
        lines.append(
            f"  {phase_id}: {pc['fraction'] or 'undefined'} "
            f"(blue {pc['blue']}, yellow {pc['yellow']}, white {pc['white']}, "
            f"grey {pc['pending']})"
        )
    _emit(output_format, doc, "\n".join(lines))


# -- questions ------------------------------------------------------------


@main.group()
def questions() -> None:
    """Import, filter and answer risk questions."""


@questions.command("import")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@click.option("--audit", "audit_id", default=None, help="Attach to this audit.")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def questions_import(file: Path, audit_id: str | None, expected_revision: int | None,
                     store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    document = file.read_text(encoding="utf-8")
    if audit_id is not None:
        current = bench.get_audit(audit_id)
        expected = expected_revision if expected_revision is not None else current.revision
        db_id, db = bench.import_question_db(
            document, audit_id=audit_id, expected_revision=expected
        )
    else:
        db_id, db = bench.import_question_db(document)
    _emit(output_format, {"id": db_id, "digest": db.digest, "count": len(db)},
          f"imported {len(db)} questions (digest {db.digest[:12]})")


@questions.command("filter")
@click.option("--audit", "audit_id", required=True)
@click.option("--requirement", "requirements", multiple=True,
              type=click.Choice([r.value for r in Requirement]))
@click.option("--steps", default=None, help="Comma-separated step ids (default: audit scope).")
@click.option("--out", "out_format", type=click.Choice(["csv", "json"]), default=None)
@shared_options
def questions_filter(audit_id: str, requirements: tuple[str, ...], steps: str | None,
                     out_format: str | None, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    step_set = {s.strip() for s in steps.split(",") if s.strip()} if steps else None
    matched = bench.filter_questions(
        audit_id,
        steps=step_set,
        requirements=[Requirement(r) for r in requirements] or None,
    )
    if out_format:
        click.echo(export_questions(matched, out_format), nl=False)
        return
    doc = [q.to_doc() for q in matched]
    lines = [f"{q.id} [{q.requirement.value}] {q.text}" for q in matched]
    _emit(output_format, doc, "\n".join(lines) if lines else "no questions in scope")


@questions.command("answer")
@click.option("--audit", "audit_id", required=True)
@click.option("--question", "question_id", required=True)
@click.option("--answer", "answer_value", type=click.Choice([a.value for a in Answer]),
              required=True)
@click.option("--justification", default="")
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def questions_answer(audit_id: str, question_id: str, answer_value: str, justification: str,
                     actor: str, expected_revision: int | None,
                     store_path: str, output_format: str) -> None:
    from .risk_assessment import QuestionResponse

    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    response = QuestionResponse(
        question_id=question_id,
        answer=Answer(answer_value),
        justification=justification,
        answered_by=actor,
        timestamp=_now(),
    )
    updated = bench.record_response(audit_id, expected, response, actor=actor)
    _emit(output_format, response.to_doc(),
          f"{question_id} answered {answer_value} (revision {updated.revision})")


@questions.command("defer")
@click.option("--audit", "audit_id", required=True)
@click.option("--question", "question_id", required=True)
@click.option("--rationale", required=True)
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def questions_defer(audit_id: str, question_id: str, rationale: str, actor: str,
                    expected_revision: int | None, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    updated = bench.defer_question(audit_id, expected, question_id, rationale, actor=actor)
    _emit(output_format, {"question_id": question_id, "revision": updated.revision},
          f"{question_id} deferred")


# -- evidence ---------------------------------------------------------------


@main.group()
def evidence() -> None:
    """Register and verify audit evidence."""


@evidence.command("add")
@click.argument("audit_id")
@click.option("--id", "evidence_id", required=True)
@click.option("--kind", type=click.Choice([k.value for k in EvidenceKind]), required=True)
@click.option("--artifact-type", required=True)
@click.option("--steps", required=True, help="Comma-separated step tags.")
@click.option("--basis", type=click.Choice([b.value for b in AccessBasis]), required=True)
@click.option("--file", "content_file", type=click.Path(exists=True, path_type=Path),
              default=None, help="Inline content to store (digest computed).")
@click.option("--uri", default=None)
@click.option("--digest", default=None, help="Digest for uri-only evidence.")
@click.option("--description", default="")
@click.option("--actor", default="auditor")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def evidence_add(audit_id: str, evidence_id: str, kind: str, artifact_type: str, steps: str,
                 basis: str, content_file: Path | None, uri: str | None, digest: str | None,
                 description: str, actor: str, expected_revision: int | None,
                 store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    content = content_file.read_bytes() if content_file else None
    if content is not None:
        digest = sha256_hex(content)
    if digest is None:
        raise click.ClickException("either --file or --uri with --digest is required")
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    item = EvidenceItem(
        id=evidence_id,
        kind=EvidenceKind(kind),
        artifact_type=artifact_type,
        step_tags=frozenset(s.strip() for s in steps.split(",") if s.strip()),
        content_digest=digest,
        collected_by=actor,
        timestamp=_now(),
        access_basis=AccessBasis(basis),
        uri=uri,
        description=description,
    )
    updated = bench.register_evidence(audit_id, expected, item, content, actor=actor)
    _emit(output_format, item.to_doc(),
          f"registered {evidence_id} (digest {digest[:12]}, revision {updated.revision})")


@evidence.command("verify")
@click.argument("audit_id")
@click.option("--id", "evidence_id", default=None)
@shared_options
def evidence_verify(audit_id: str, evidence_id: str | None,
                    store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    result = bench.verify_evidence(audit_id, evidence_id)
    text = (
        f"verified: {len(result['verified'])}, failed: {len(result['failed'])}, "
        f"skipped (no stored blob): {len(result['skipped'])}"
    )
    for failure in result["failed"]:
        text += f"\n  FAILED {failure['id']}: {failure['error']}"
    _emit(output_format, result, text)
    if result["failed"]:
        sys.exit(1)


# -- monitor ------------------------------------------------------------------


@main.group()
def monitor() -> None:
    """Define and run batch monitors over prediction logs."""


@monitor.command("add")
@click.argument("audit_id")
@click.option("--spec-file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--expected-revision", type=int, default=None)
@shared_options
def monitor_add(audit_id: str, spec_file: Path, expected_revision: int | None,
                store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    spec = MonitorSpec.from_doc(json.loads(spec_file.read_text(encoding="utf-8")))
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    updated = bench.add_monitor_spec(audit_id, expected, spec)
    _emit(output_format, spec.to_doc(), f"monitor {spec.id} added (revision {updated.revision})")


@monitor.command("run")
@click.option("--log", "log_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--audit", "audit_id", default=None)
@click.option("--spec", "spec_id", default=None, help="Spec id on the audit.")
@click.option("--spec-file", type=click.Path(exists=True, path_type=Path), default=None,
              help="Standalone spec document (no audit).")
@shared_options
def monitor_run_cmd(log_file: Path, audit_id: str | None, spec_id: str | None,
                    spec_file: Path | None, store_path: str, output_format: str) -> None:
    records = parse_prediction_log(log_file.read_text(encoding="utf-8"))
    if audit_id is not None:
        if spec_id is None:
            raise click.ClickException("--spec is required with --audit")
        bench = _bench(store_path)
        run = bench.run_monitor(audit_id, spec_id, records)
    elif spec_file is not None:
        spec = MonitorSpec.from_doc(json.loads(spec_file.read_text(encoding="utf-8")))
        run = run_monitor(spec, records)
    else:
        raise click.ClickException("provide --audit/--spec or --spec-file")
    text = (
        f"{run.spec_id}: {run.batch_count} batch(es) — {run.pass_count} pass, "
        f"{run.fail_count} fail, {run.indeterminate_count} indeterminate"
    )
    for result in run.results:
        value = "indeterminate" if result.value is None else f"{result.value:.6f}"
        text += f"\n  batch {result.batch_index}: {result.verdict.value} (value {value})"
    _emit(output_format, run.to_doc(), text)


# -- report -------------------------------------------------------------------


@main.group()
def report() -> None:
    """Derive concerns, compile and render reports."""


@report.command("concerns")
@click.argument("audit_id")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def report_concerns(audit_id: str, expected_revision: int | None,
                    store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    _, concerns = bench.derive_concerns(audit_id, expected)
    lines = [
        f"{c['requirement']} [{c['severity']}]: {', '.join(c['triggering_responses'])}"
        for c in concerns
    ]
    _emit(output_format, concerns, "\n".join(lines) if lines else "no concerns")


@report.command("compile")
@click.argument("audit_id")
@click.option("--at", "at_text", default=None, help="Report clock (RFC 3339).")
@click.option("--expected-revision", type=int, default=None)
@shared_options
def report_compile(audit_id: str, at_text: str | None, expected_revision: int | None,
                   store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    current = bench.get_audit(audit_id)
    expected = expected_revision if expected_revision is not None else current.revision
    _, doc = bench.compile_report(audit_id, expected, at=_at(at_text))
    _emit(output_format, doc, f"report compiled; digest {doc['content_digest']}")


@report.command("render")
@click.argument("audit_id")
@click.option("--out-format", type=click.Choice(["canonical", "markdown"]), default="markdown")
@click.option("--iteration", type=int, default=None)
@shared_options
def report_render(audit_id: str, out_format: str, iteration: int | None,
                  store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    fmt = CANONICAL_FORMAT if out_format == "canonical" else MARKUP_FORMAT
    data = bench.render_report(audit_id, fmt, iteration)
    click.echo(data.decode("utf-8"), nl=False)


# -- bundle --------------------------------------------------------------------


@main.group()
def bundle() -> None:
    """Export and import self-contained audit bundles."""


@bundle.command("export")
@click.argument("audit_id")
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
@shared_options
def bundle_export(audit_id: str, out_file: Path, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    data = bench.export_bundle(audit_id)
    out_file.write_bytes(data)
    _emit(output_format, {"audit_id": audit_id, "bytes": len(data), "file": str(out_file)},
          f"exported {len(data)} bytes to {out_file}")


@bundle.command("import")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@click.option("--rename", "rename_to", default=None)
@shared_options
def bundle_import(file: Path, rename_to: str | None, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    audit_id = bench.import_bundle(file.read_bytes(), rename_to=rename_to)
    _emit(output_format, {"audit_id": audit_id}, f"imported audit {audit_id}")


# -- register --------------------------------------------------------------------


@main.group()
def register() -> None:
    """Cross-audit risk register."""


@register.command("add")
@click.option("--file", "entry_file", type=click.Path(exists=True, path_type=Path), required=True)
@shared_options
def register_add(entry_file: Path, store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    raw = json.loads(entry_file.read_text(encoding="utf-8"))
    entries = raw if isinstance(raw, list) else [raw]
    for doc in entries:
        bench.add_register_entry(RiskRegisterEntry.from_doc(doc))
    _emit(output_format, {"added": len(entries)}, f"added {len(entries)} entr(ies)")


@register.command("ingest")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@shared_options
def register_ingest(file: Path, store_path: str, output_format: str) -> None:
    """Ingest an external incident feed (CSV: id,title,description,steps,feed)."""
    import csv

    bench = _bench(store_path)
    with file.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    updated = bench.ingest_register_feed(rows)
    flagged = sum(1 for e in updated.entries if e.needs_enrichment)
    _emit(output_format, {"count": len(updated.entries), "needs_enrichment": flagged},
          f"register now holds {len(updated.entries)} entr(ies); "
          f"{flagged} flagged needs-enrichment")


@register.command("query")
@click.option("--steps", required=True, help="Comma-separated step ids.")
@click.option("--requirement", type=click.Choice([r.value for r in Requirement]), default=None)
@shared_options
def register_query(steps: str, requirement: str | None,
                   store_path: str, output_format: str) -> None:
    bench = _bench(store_path)
    step_set = {s.strip() for s in steps.split(",") if s.strip()}
    entries = bench.query_register(step_set, Requirement(requirement) if requirement else None)
    doc = [e.to_doc() for e in entries]
    lines = [f"{e.id}: {e.title}" for e in entries]
    _emit(output_format, doc, "\n".join(lines) if lines else "no matching entries")


# -- fixtures and server -----------------------------------------------------------


@main.group()
def fixtures() -> None:
    """Shipped pilot fixtures."""


@fixtures.command("load")
@click.argument("name", type=click.Choice(["calibration", "garmi"]))
@click.option("--rename", "rename_to", default=None)
@shared_options
def fixtures_load(name: str, rename_to: str | None, store_path: str, output_format: str) -> None:
    from .fixtures import pilot_bundle_bytes

    bench = _bench(store_path)
    audit_id = bench.import_bundle(pilot_bundle_bytes(name), rename_to=rename_to)
    _emit(output_format, {"audit_id": audit_id}, f"loaded pilot fixture as {audit_id}")


@main.command("serve")
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--store", "store_path", envvar="AUDITBENCH_STORE", default=None)
def serve(config_file: Path | None, host: str | None, port: int | None,
          store_path: str | None) -> None:
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app

    config = WorkbenchConfig.load(config_file)
    if store_path is not None:
        config.store_path = store_path
    if host is not None:
        config.bind_host = host
    if port is not None:
        config.bind_port = port
    app = create_app(config=config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port)


if __name__ == "__main__":
    main()
