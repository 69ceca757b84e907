"""Cross-audit risk register: documented incidents keyed to lifecycle steps.

The register is an append-only log. Entries are immutable; corrections
register a superseding entry that names the one it replaces. Keying the
conditions of occurrence to lifecycle steps is what makes the knowledge
transferable: any audit scoped to those steps can query for relevant
incidents during planning.

Entries ingested from external incident feeds usually arrive without the
control-measure detail an audit needs; they are kept but flagged
``needs_enrichment`` until the remaining fields are filled in.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Mapping

from .canonical import format_timestamp, parse_timestamp
from .errors import ValidationError
from .lifecycle import LifecycleModel
from .risk_assessment import Requirement


class EntrySource(str, Enum):
    INTERNAL = "Internal"
    EXTERNAL = "External"


@dataclass(frozen=True)
class RiskRegisterEntry:
    id: str
    title: str
    description: str
    failed_controls: tuple[str, ...]
    successful_controls: tuple[str, ...]
    conditions_of_occurrence: frozenset[str]  # lifecycle step ids
    conditions_notes: str = ""
    related_literature: tuple[str, ...] = ()
    actual_impact: str = ""
    estimated_cost: tuple[str, str] | None = None  # (amount, currency), free-form
    similar_occurrences: tuple[str, ...] = ()
    requirement: Requirement | None = None
    source: EntrySource = EntrySource.INTERNAL
    feed_name: str = ""
    recorded_at: datetime | None = None
    supersedes: str | None = None

    @property
    def needs_enrichment(self) -> bool:
        """External entries missing audit-grade documentation fields."""
        if self.source != EntrySource.EXTERNAL:
            return False
        return not (
            self.failed_controls
            and self.successful_controls
            and self.actual_impact.strip()
            and self.conditions_of_occurrence
        )

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "failed_controls": list(self.failed_controls),
            "successful_controls": list(self.successful_controls),
            "conditions_of_occurrence": sorted(self.conditions_of_occurrence),
            "conditions_notes": self.conditions_notes,
            "related_literature": list(self.related_literature),
            "actual_impact": self.actual_impact,
            "estimated_cost": (
                {"amount": self.estimated_cost[0], "currency": self.estimated_cost[1]}
                if self.estimated_cost
                else None
            ),
            "similar_occurrences": list(self.similar_occurrences),
            "requirement": self.requirement.value if self.requirement else None,
            "source": self.source.value,
            "feed_name": self.feed_name,
            "recorded_at": format_timestamp(self.recorded_at) if self.recorded_at else None,
            "supersedes": self.supersedes,
            "needs_enrichment": self.needs_enrichment,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "RiskRegisterEntry":
        cost = doc.get("estimated_cost")
        requirement = doc.get("requirement")
        recorded = doc.get("recorded_at")
        return RiskRegisterEntry(
            id=doc["id"],
            title=doc["title"],
            description=doc.get("description", ""),
            failed_controls=tuple(doc["failed_controls"]),
            successful_controls=tuple(doc["successful_controls"]),
            conditions_of_occurrence=frozenset(doc["conditions_of_occurrence"]),
            conditions_notes=doc.get("conditions_notes", ""),
            related_literature=tuple(doc.get("related_literature", ())),
            actual_impact=doc.get("actual_impact", ""),
            estimated_cost=(cost["amount"], cost["currency"]) if cost else None,
            similar_occurrences=tuple(doc.get("similar_occurrences", ())),
            requirement=Requirement(requirement) if requirement else None,
            source=EntrySource(doc.get("source", "Internal")),
            feed_name=doc.get("feed_name", ""),
            recorded_at=parse_timestamp(recorded) if recorded else None,
            supersedes=doc.get("supersedes"),
        )


@dataclass(frozen=True)
class RiskRegister:
    """Append-only register; ``template`` names the lifecycle template the
    step keys resolve against."""

    template: str
    entries: tuple[RiskRegisterEntry, ...] = ()
    revision: int = 0

    def by_id(self) -> dict[str, RiskRegisterEntry]:
        return {e.id: e for e in self.entries}

    def to_doc(self) -> dict[str, Any]:
        return {
            "template": self.template,
            "revision": self.revision,
            "entries": [e.to_doc() for e in self.entries],
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "RiskRegister":
        return RiskRegister(
            template=doc["template"],
            revision=doc.get("revision", 0),
            entries=tuple(RiskRegisterEntry.from_doc(e) for e in doc.get("entries", ())),
        )


def new_register(model: LifecycleModel) -> RiskRegister:
    return RiskRegister(template=model.template)


def add_entry(
    register: RiskRegister, entry: RiskRegisterEntry, model: LifecycleModel
) -> RiskRegister:
    """Append one immutable entry after resolving its step and cross-entry
    references. Corrections append a superseding entry; nothing is edited."""
    problems: list[str] = []
    if entry.id in register.by_id():
        problems.append(f"duplicate entry id: {entry.id!r}")
    if entry.failed_controls is None or entry.successful_controls is None:
        problems.append("failed_controls and successful_controls must be present (may be empty)")
    unknown_steps = sorted(s for s in entry.conditions_of_occurrence if not model.has_step(s))
    if unknown_steps:
        problems.append(f"unresolvable step id(s): {', '.join(unknown_steps)}")
    known = register.by_id()
    for ref in entry.similar_occurrences:
        if ref not in known and not ref.startswith("external:"):
            problems.append(
                f"similar occurrence {ref!r} does not resolve (use an 'external:' "
                "prefix for occurrences outside this register)"
            )
    if entry.supersedes is not None and entry.supersedes not in known:
        problems.append(f"superseded entry {entry.supersedes!r} does not exist")
    if problems:
        raise ValidationError(f"cannot add register entry {entry.id!r}", problems)
    return RiskRegister(
        template=register.template,
        entries=register.entries + (entry,),
        revision=register.revision + 1,
    )


def query_entries(
    register: RiskRegister,
    steps: Iterable[str],
    requirement: Requirement | None = None,
) -> list[RiskRegisterEntry]:
    """Entries whose conditions of occurrence intersect ``steps``, newest
    first, then by id."""
    step_set = set(steps)
    if not step_set:
        raise ValidationError("query requires at least one step id")
    matched = [
        e
        for e in register.entries
        if e.conditions_of_occurrence & step_set
        and (requirement is None or e.requirement == requirement)
    ]
    # Newest first, ties broken by id: stable sorts, innermost key first.
    matched.sort(key=lambda e: e.id)
    matched.sort(
        key=lambda e: format_timestamp(e.recorded_at) if e.recorded_at else "",
        reverse=True,
    )
    return matched


CSV_FEED_COLUMNS = [
    "id",
    "title",
    "description",
    "steps",
    "feed",
]


def ingest_external_feed(
    register: RiskRegister, rows: Iterable[Mapping[str, str]], model: LifecycleModel
) -> RiskRegister:
    """Ingest partially filled entries from an external incident feed.

    Column mapping: ``id``, ``title``, ``description``, ``steps``
    (``;``-separated lifecycle step ids) and ``feed`` (feed name). Control
    and impact fields arrive empty, so the entries come in flagged
    ``needs_enrichment``.
    """
    for row in rows:
        steps = frozenset(s.strip() for s in (row.get("steps") or "").split(";") if s.strip())
        entry = RiskRegisterEntry(
            id=row["id"],
            title=row.get("title", ""),
            description=row.get("description", ""),
            failed_controls=(),
            successful_controls=(),
            conditions_of_occurrence=steps,
            source=EntrySource.EXTERNAL,
            feed_name=row.get("feed", ""),
        )
        register = add_entry(register, entry, model)
    return register
