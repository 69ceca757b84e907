"""Fieldwork artifacts: evidence with digests, tests, assurance arguments.

Transparency evidence is disclosed material; examinability evidence comes
from granted access or a public interface, and black-box audits may not use
granted access at all. Assurance arguments are claim trees that the auditor
can challenge node by node.
"""

from datetime import datetime, timezone

from auditbench import (
    AccessBasis,
    AssuranceNode,
    EvidenceItem,
    EvidenceKind,
    NodeKind,
    ValidationError,
    sha256_hex,
    validate_assurance_nodes,
)
from auditbench.fieldwork import validate_evidence_registration

now = datetime.now(timezone.utc)
content = b"model card: intended use, metrics, caveats (demo content)"

item = EvidenceItem(
    id="ev-model-card",
    kind=EvidenceKind.TRANSPARENCY,
    artifact_type="model_card",
    step_tags=frozenset({"model_specification"}),
    content_digest=sha256_hex(content),
    collected_by="demo-auditor",
    timestamp=now,
    access_basis=AccessBasis.DISCLOSED,
)
validate_evidence_registration(
    item, known_step_ids=["model_specification"], black_box=False, content=content
)
print("transparency model card accepted, digest", item.content_digest[:12])

probe = EvidenceItem(
    id="ev-db-dump",
    kind=EvidenceKind.EXAMINABILITY,
    artifact_type="query_result",
    step_tags=frozenset({"model_specification"}),
    content_digest=sha256_hex(b"rows"),
    collected_by="demo-auditor",
    timestamp=now,
    access_basis=AccessBasis.GRANTED_ACCESS,
)
try:
    validate_evidence_registration(
        probe, known_step_ids=["model_specification"], black_box=True, content=b"rows"
    )
except ValidationError as exc:
    print("black-box audit refused granted access:", exc)

# An assurance argument with one answered and one open challenge.
nodes = [
    AssuranceNode(id="claim", node_kind=NodeKind.CLAIM,
                  text="The system is fit for expert-supervised use",
                  children=("arg", "challenge-open")),
    AssuranceNode(id="arg", node_kind=NodeKind.ARGUMENT,
                  text="Quality is continuously tested", children=("ev",)),
    AssuranceNode(id="ev", node_kind=NodeKind.EVIDENCE_LINK,
                  text="test logs", evidence_ref="ev-model-card"),
    AssuranceNode(id="challenge-open", node_kind=NodeKind.CHALLENGE,
                  text="Over-reliance not ruled out"),
]
tree, report = validate_assurance_nodes(nodes, registered_evidence=["ev-model-card"])
print("\nassurance tree rooted at:", tree.root_id)
print("unsupported leaves:", report.unsupported_leaves)
print("open challenges:", report.open_challenges)
