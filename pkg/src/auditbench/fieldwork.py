"""Fieldwork artifacts: evidence items, test records, assurance arguments.

Evidence comes in two kinds with a fixed legality table against its access
basis: transparency evidence is disclosed material, examinability evidence is
obtained through granted access or a public interface. Black-box audits are
barred from granted-access evidence entirely.

Evidence is append-only. An item is never edited after registration;
corrections register a new item that names the one it supersedes. Content is
stored by SHA-256 digest so tampering is detectable on every re-read.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .canonical import format_timestamp, parse_timestamp, sha256_hex
from .errors import ValidationError

#: Conventional artifact-type tags. Any non-empty tag is accepted; these are
#: the ones the default lifecycle template expects.
KNOWN_ARTIFACT_TYPES = (
    "datasheet",
    "factsheet",
    "model_card",
    "log_extract",
    "query_result",
    "document",
    "other",
)


class EvidenceKind(str, Enum):
    TRANSPARENCY = "Transparency"
    EXAMINABILITY = "Examinability"


class AccessBasis(str, Enum):
    DISCLOSED = "Disclosed"
    GRANTED_ACCESS = "GrantedAccess"
    PUBLIC_INTERFACE = "PublicInterface"


#: kind -> legal access bases (the whole legality table).
LEGAL_ACCESS_BASES: Mapping[EvidenceKind, frozenset[AccessBasis]] = {
    EvidenceKind.TRANSPARENCY: frozenset({AccessBasis.DISCLOSED}),
    EvidenceKind.EXAMINABILITY: frozenset(
        {AccessBasis.GRANTED_ACCESS, AccessBasis.PUBLIC_INTERFACE}
    ),
}


class TestCategory(str, Enum):
    COMPLIANCE = "Compliance"
    CUSTOM = "Custom"


class TestVerdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


COMPARABILITY_WARNING = (
    "custom test: results may not be comparable across audits of other systems"
)


@dataclass(frozen=True)
class EvidenceItem:
    """One registered piece of audit evidence, content-addressed by digest."""

    id: str
    kind: EvidenceKind
    artifact_type: str
    step_tags: frozenset[str]
    content_digest: str
    collected_by: str
    timestamp: datetime
    access_basis: AccessBasis
    uri: str | None = None
    description: str = ""
    supersedes: str | None = None

    def validate(self) -> None:
        problems: list[str] = []
        if not self.artifact_type.strip():
            problems.append("artifact_type must be a non-empty tag")
        if self.access_basis not in LEGAL_ACCESS_BASES[self.kind]:
            legal = ", ".join(sorted(b.value for b in LEGAL_ACCESS_BASES[self.kind]))
            problems.append(
                f"{self.kind.value} evidence requires access basis in {{{legal}}}, "
                f"got {self.access_basis.value}"
            )
        if not self.content_digest.strip():
            problems.append("content_digest is required")
        if problems:
            raise ValidationError(f"invalid evidence item {self.id!r}", problems)

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "artifact_type": self.artifact_type,
            "step_tags": sorted(self.step_tags),
            "content_digest": self.content_digest,
            "collected_by": self.collected_by,
            "timestamp": format_timestamp(self.timestamp),
            "access_basis": self.access_basis.value,
            "uri": self.uri,
            "description": self.description,
            "supersedes": self.supersedes,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "EvidenceItem":
        return EvidenceItem(
            id=doc["id"],
            kind=EvidenceKind(doc["kind"]),
            artifact_type=doc["artifact_type"],
            step_tags=frozenset(doc["step_tags"]),
            content_digest=doc["content_digest"],
            collected_by=doc["collected_by"],
            timestamp=parse_timestamp(doc["timestamp"]),
            access_basis=AccessBasis(doc["access_basis"]),
            uri=doc.get("uri"),
            description=doc.get("description", ""),
            supersedes=doc.get("supersedes"),
        )


def validate_evidence_registration(
    item: EvidenceItem,
    *,
    known_step_ids: Iterable[str],
    black_box: bool,
    content: bytes | None = None,
) -> None:
    """Full pre-registration check for one evidence item.

    Verifies the legality table, resolves step tags, enforces the black-box
    access restriction, and (for inline content) that the declared digest
    matches the bytes being stored.
    """
    item.validate()
    known = set(known_step_ids)
    unresolved = sorted(item.step_tags - known)
    if unresolved:
        raise ValidationError(
            f"evidence {item.id!r} has unresolvable step tag(s): {', '.join(unresolved)}"
        )
    if black_box and item.access_basis == AccessBasis.GRANTED_ACCESS:
        raise ValidationError(
            f"evidence {item.id!r}: black-box audits may only use disclosed material "
            "or public-interface examination, not granted access"
        )
    if content is not None:
        actual = sha256_hex(content)
        if actual != item.content_digest:
            raise ValidationError(
                f"evidence {item.id!r}: declared digest {item.content_digest} does not "
                f"match content digest {actual}"
            )


@dataclass(frozen=True)
class TestRecord:
    id: str
    category: TestCategory
    procedure: str
    verdict: TestVerdict
    timestamp: datetime
    spec_ref: str | None = None
    rationale: str = ""
    evidence_refs: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def validate(self) -> None:
        problems: list[str] = []
        if self.category == TestCategory.COMPLIANCE and not (self.spec_ref or "").strip():
            problems.append("compliance tests must reference a formalisation specification item")
        if self.category == TestCategory.CUSTOM and not self.rationale.strip():
            problems.append("custom tests must carry the auditor's rationale")
        if problems:
            raise ValidationError(f"invalid test record {self.id!r}", problems)

    def with_category_warnings(self) -> "TestRecord":
        if self.category == TestCategory.CUSTOM and COMPARABILITY_WARNING not in self.warnings:
            return TestRecord(
                id=self.id,
                category=self.category,
                procedure=self.procedure,
                verdict=self.verdict,
                timestamp=self.timestamp,
                spec_ref=self.spec_ref,
                rationale=self.rationale,
                evidence_refs=self.evidence_refs,
                warnings=self.warnings + (COMPARABILITY_WARNING,),
            )
        return self

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "category": self.category.value,
            "procedure": self.procedure,
            "verdict": self.verdict.value,
            "timestamp": format_timestamp(self.timestamp),
            "spec_ref": self.spec_ref,
            "rationale": self.rationale,
            "evidence_refs": list(self.evidence_refs),
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "TestRecord":
        return TestRecord(
            id=doc["id"],
            category=TestCategory(doc["category"]),
            procedure=doc["procedure"],
            verdict=TestVerdict(doc["verdict"]),
            timestamp=parse_timestamp(doc["timestamp"]),
            spec_ref=doc.get("spec_ref"),
            rationale=doc.get("rationale", ""),
            evidence_refs=tuple(doc.get("evidence_refs", ())),
            warnings=tuple(doc.get("warnings", ())),
        )


def test_summary(records: Sequence[TestRecord]) -> dict[str, dict[str, int]]:
    """Counts per category x verdict."""
    summary = {
        category.value: {verdict.value: 0 for verdict in TestVerdict}
        for category in TestCategory
    }
    for record in records:
        summary[record.category.value][record.verdict.value] += 1
    return summary


# ---------------------------------------------------------------------------
# Assurance argumentation
# ---------------------------------------------------------------------------


class NodeKind(str, Enum):
    CLAIM = "Claim"
    ARGUMENT = "Argument"
    ASSUMPTION = "Assumption"
    EVIDENCE_LINK = "EvidenceLink"
    CHALLENGE = "Challenge"


#: Node kinds a Challenge may attach to.
CHALLENGEABLE = frozenset({NodeKind.CLAIM, NodeKind.ARGUMENT, NodeKind.ASSUMPTION})


@dataclass(frozen=True)
class AssuranceNode:
    id: str
    node_kind: NodeKind
    text: str
    children: tuple[str, ...] = ()
    evidence_ref: str | None = None
    author: str = ""

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "node_kind": self.node_kind.value,
            "text": self.text,
            "children": list(self.children),
            "evidence_ref": self.evidence_ref,
            "author": self.author,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "AssuranceNode":
        return AssuranceNode(
            id=doc["id"],
            node_kind=NodeKind(doc["node_kind"]),
            text=doc["text"],
            children=tuple(doc.get("children", ())),
            evidence_ref=doc.get("evidence_ref"),
            author=doc.get("author", ""),
        )


@dataclass(frozen=True)
class AssuranceValidation:
    """What a reviewer should look at: weak spots in an otherwise valid tree."""

    root_id: str
    unsupported_leaves: tuple[str, ...]
    open_challenges: tuple[str, ...]
    unreferenced_evidence: tuple[str, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "root_id": self.root_id,
            "unsupported_leaves": list(self.unsupported_leaves),
            "open_challenges": list(self.open_challenges),
            "unreferenced_evidence": list(self.unreferenced_evidence),
        }


@dataclass(frozen=True)
class AssuranceTree:
    nodes: tuple[AssuranceNode, ...]
    root_id: str

    def by_id(self) -> dict[str, AssuranceNode]:
        return {n.id: n for n in self.nodes}

    def to_doc(self) -> dict[str, Any]:
        return {"nodes": [n.to_doc() for n in self.nodes], "root_id": self.root_id}

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "AssuranceTree":
        return AssuranceTree(
            nodes=tuple(AssuranceNode.from_doc(n) for n in doc["nodes"]),
            root_id=doc["root_id"],
        )


def validate_assurance_nodes(
    nodes: Sequence[AssuranceNode],
    *,
    registered_evidence: Iterable[str] = (),
) -> tuple[AssuranceTree, AssuranceValidation]:
    """Check that ``nodes`` form a single well-formed argument tree.

    Structural violations (cycles, multiple roots, dangling children,
    misplaced challenges, evidence links without a reference) raise; weak
    spots that an auditor should challenge (claims or arguments with no
    support, unused registered evidence, unanswered challenges) come back in
    the validation report. The result is independent of input order.
    """
    if not nodes:
        raise ValidationError("assurance argument must contain at least one node")
    ordered = sorted(nodes, key=lambda n: n.id)
    by_id: dict[str, AssuranceNode] = {}
    problems: list[str] = []
    for node in ordered:
        if node.id in by_id:
            problems.append(f"duplicate node id: {node.id!r}")
        by_id[node.id] = node

    child_ids: set[str] = set()
    for node in ordered:
        seen_children: set[str] = set()
        for child_id in node.children:
            if child_id not in by_id:
                problems.append(f"node {node.id!r} references unknown child {child_id!r}")
                continue
            if child_id in seen_children:
                problems.append(f"node {node.id!r} lists child {child_id!r} twice")
            seen_children.add(child_id)
            if child_id in child_ids:
                problems.append(f"node {child_id!r} has more than one parent")
            child_ids.add(child_id)
        if node.node_kind == NodeKind.EVIDENCE_LINK and not node.evidence_ref:
            problems.append(f"evidence-link node {node.id!r} has no evidence_ref")

    registered = set(registered_evidence)
    if registered:
        for node in ordered:
            if (
                node.node_kind == NodeKind.EVIDENCE_LINK
                and node.evidence_ref
                and node.evidence_ref not in registered
            ):
                problems.append(
                    f"evidence-link node {node.id!r} references unregistered "
                    f"evidence {node.evidence_ref!r}"
                )

    roots = [n for n in ordered if n.id not in child_ids]
    if len(roots) != 1:
        root_list = ", ".join(repr(n.id) for n in roots) or "<none>"
        problems.append(f"argument must have exactly one root, found: {root_list}")
    elif roots[0].node_kind != NodeKind.CLAIM:
        problems.append(f"root node {roots[0].id!r} must be a Claim")

    for node in ordered:
        if node.node_kind != NodeKind.CHALLENGE:
            continue
        parents = [p for p in ordered if node.id in p.children]
        for parent in parents:
            if parent.node_kind not in CHALLENGEABLE:
                problems.append(
                    f"challenge {node.id!r} attaches to {parent.node_kind.value} node "
                    f"{parent.id!r}; challenges may only attach to Claim, Argument or Assumption"
                )

    if problems:
        raise ValidationError("invalid assurance argument", sorted(set(problems)))

    root = roots[0]
    # Cycle check: walk from the root; with unique parents, any cycle is
    # unreachable from the root and shows up as an uncovered node.
    reachable: set[str] = set()
    stack = [root.id]
    while stack:
        node_id = stack.pop()
        if node_id in reachable:
            raise ValidationError(f"cycle detected at node {node_id!r}")
        reachable.add(node_id)
        stack.extend(by_id[node_id].children)
    if reachable != set(by_id):
        orphaned = sorted(set(by_id) - reachable)
        raise ValidationError(
            "cycle detected: node(s) not reachable from the root", orphaned
        )

    unsupported = tuple(
        n.id
        for n in ordered
        if not n.children and n.node_kind in (NodeKind.CLAIM, NodeKind.ARGUMENT)
    )
    # A challenge is open until it has at least one child node answering it.
    open_challenges = tuple(
        n.id for n in ordered if n.node_kind == NodeKind.CHALLENGE and not n.children
    )
    cited = {
        n.evidence_ref for n in ordered if n.node_kind == NodeKind.EVIDENCE_LINK and n.evidence_ref
    }
    unreferenced = tuple(sorted(registered - cited)) if registered else ()

    tree = AssuranceTree(nodes=tuple(ordered), root_id=root.id)
    report = AssuranceValidation(
        root_id=root.id,
        unsupported_leaves=unsupported,
        open_challenges=open_challenges,
        unreferenced_evidence=unreferenced,
    )
    return tree, report
