"""Shipped pilot fixtures: two worked audits as importable bundles.

``calibration`` is a third-party audit of an expert-in-the-loop calibration
recommender, materialized in the Reporting phase with its questionnaire
answered and concerns derived. ``garmi`` is an early-stage audit of a
care-robot vision module, still in Planning with data and model steps not
yet auditable.

Golden expectation files sit beside each bundle; tests assert against them
instead of recomputing. All quantitative log data is synthetic.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..bundle import import_bundle
from ..errors import BundleError, NotFoundError
from ..risk_register import RiskRegisterEntry
from ..store import Store
from ..workflow import Audit

_FIXTURE_DIR = Path(__file__).parent

PILOT_NAMES = ("calibration", "garmi")

_BUNDLES = {
    "calibration": "pilot_calibration.zip",
    "garmi": "pilot_garmi.zip",
}
_GOLDENS = {
    "calibration": "pilot_calibration_golden.json",
    "garmi": "pilot_garmi_golden.json",
}


def fixture_path(filename: str) -> Path:
    return _FIXTURE_DIR / filename


def pilot_bundle_bytes(name: str) -> bytes:
    if name not in _BUNDLES:
        raise NotFoundError(f"unknown pilot fixture: {name!r} (expected one of {PILOT_NAMES})")
    path = _FIXTURE_DIR / _BUNDLES[name]
    if not path.exists():
        raise BundleError(
            f"fixture bundle missing: {path.name}; regenerate with "
            "'python -m auditbench.fixtures.build'"
        )
    return path.read_bytes()


def pilot_golden(name: str) -> dict:
    if name not in _GOLDENS:
        raise NotFoundError(f"unknown pilot fixture: {name!r} (expected one of {PILOT_NAMES})")
    return json.loads((_FIXTURE_DIR / _GOLDENS[name]).read_text(encoding="utf-8"))


def load_pilot(name: str, store: Store | None = None) -> Audit:
    """Materialize a pilot fixture and return the audit.

    Imports the bundle into ``store`` (a fresh in-memory store when omitted),
    verifying every digest on the way in.
    """
    if store is None:
        store = Store()
    audit_id = import_bundle(store, pilot_bundle_bytes(name))
    from ..bundle import audit_entity_id

    return Audit.from_doc(store.get(audit_entity_id(audit_id)).payload)


def sample_question_csv() -> str:
    return (_FIXTURE_DIR / "sample_questions.csv").read_text(encoding="utf-8")


def sample_register_entries() -> list[RiskRegisterEntry]:
    raw = json.loads((_FIXTURE_DIR / "sample_register.json").read_text(encoding="utf-8"))
    return [RiskRegisterEntry.from_doc(doc) for doc in raw]


def calibration_monitor_log_text() -> str:
    path = _FIXTURE_DIR / "calibration_monitor_log.ndjson"
    if not path.exists():
        raise BundleError(
            "fixture log missing; regenerate with 'python -m auditbench.fixtures.build'"
        )
    return path.read_text(encoding="utf-8")


DOCUMENTATION_TEMPLATES = ("datasheet", "model_card")


def documentation_template(name: str) -> str:
    """Optional documentation skeletons an auditor can hand to the auditee
    when the expected artifacts do not exist yet."""
    if name not in DOCUMENTATION_TEMPLATES:
        raise NotFoundError(
            f"unknown documentation template: {name!r} "
            f"(expected one of {DOCUMENTATION_TEMPLATES})"
        )
    return (_FIXTURE_DIR / f"{name}_template.md").read_text(encoding="utf-8")
