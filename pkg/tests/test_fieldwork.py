from __future__ import annotations

import random

import pytest

from auditbench import fieldwork as fw
from auditbench.canonical import sha256_hex
from auditbench.errors import ValidationError

from conftest import ts

KNOWN_STEPS = ("goals", "user_experience", "operational_logging")


def evidence_item(eid: str = "ev-1", *, kind=fw.EvidenceKind.TRANSPARENCY,
                  basis=fw.AccessBasis.DISCLOSED, digest: str = "",
                  content: bytes | None = b"payload",
                  steps: set[str] = frozenset({"goals"})) -> fw.EvidenceItem:
    if not digest and content is not None:
        digest = sha256_hex(content)
    return fw.EvidenceItem(
        id=eid,
        kind=kind,
        artifact_type="document",
        step_tags=frozenset(steps),
        content_digest=digest,
        collected_by="tester",
        timestamp=ts(),
        access_basis=basis,
    )


class TestEvidenceLegality:
    # The full kind x basis legality table.
    LEGAL = {
        (fw.EvidenceKind.TRANSPARENCY, fw.AccessBasis.DISCLOSED): True,
        (fw.EvidenceKind.TRANSPARENCY, fw.AccessBasis.GRANTED_ACCESS): False,
        (fw.EvidenceKind.TRANSPARENCY, fw.AccessBasis.PUBLIC_INTERFACE): False,
        (fw.EvidenceKind.EXAMINABILITY, fw.AccessBasis.DISCLOSED): False,
        (fw.EvidenceKind.EXAMINABILITY, fw.AccessBasis.GRANTED_ACCESS): True,
        (fw.EvidenceKind.EXAMINABILITY, fw.AccessBasis.PUBLIC_INTERFACE): True,
    }

    @pytest.mark.parametrize("kind,basis", list(LEGAL))
    def test_legality_table(self, kind, basis):
        item = evidence_item(kind=kind, basis=basis)
        if self.LEGAL[(kind, basis)]:
            item.validate()
        else:
            with pytest.raises(ValidationError):
                item.validate()

    def test_model_card_disclosure_accepted(self):
        item = evidence_item(kind=fw.EvidenceKind.TRANSPARENCY, basis=fw.AccessBasis.DISCLOSED)
        fw.validate_evidence_registration(
            item, known_step_ids=KNOWN_STEPS, black_box=False, content=b"payload"
        )

    def test_black_box_rejects_granted_access(self):
        item = evidence_item(
            kind=fw.EvidenceKind.EXAMINABILITY, basis=fw.AccessBasis.GRANTED_ACCESS
        )
        with pytest.raises(ValidationError, match="black-box"):
            fw.validate_evidence_registration(
                item, known_step_ids=KNOWN_STEPS, black_box=True, content=b"payload"
            )

    def test_black_box_allows_public_interface(self):
        item = evidence_item(
            kind=fw.EvidenceKind.EXAMINABILITY, basis=fw.AccessBasis.PUBLIC_INTERFACE
        )
        fw.validate_evidence_registration(
            item, known_step_ids=KNOWN_STEPS, black_box=True, content=b"payload"
        )

    def test_unresolvable_step_tag(self):
        item = evidence_item(steps={"no_such_step"})
        with pytest.raises(ValidationError, match="no_such_step"):
            fw.validate_evidence_registration(
                item, known_step_ids=KNOWN_STEPS, black_box=False, content=b"payload"
            )

    def test_declared_digest_must_match_content(self):
        item = evidence_item(digest=sha256_hex(b"other"), content=None)
        with pytest.raises(ValidationError, match="digest"):
            fw.validate_evidence_registration(
                item, known_step_ids=KNOWN_STEPS, black_box=False, content=b"payload"
            )


class TestTestRecords:
    def _record(self, category=fw.TestCategory.COMPLIANCE, *, spec_ref="evaluation_metrics",
                rationale="", verdict=fw.TestVerdict.PASS, rid="t-1") -> fw.TestRecord:
        return fw.TestRecord(
            id=rid,
            category=category,
            procedure="check something",
            verdict=verdict,
            timestamp=ts(),
            spec_ref=spec_ref if category == fw.TestCategory.COMPLIANCE else None,
            rationale=rationale,
        )

    def test_compliance_requires_spec_ref(self):
        with pytest.raises(ValidationError):
            self._record(spec_ref="").validate()

    def test_custom_requires_rationale(self):
        with pytest.raises(ValidationError):
            self._record(fw.TestCategory.CUSTOM).validate()

    def test_custom_gets_comparability_warning(self):
        record = self._record(fw.TestCategory.CUSTOM, rationale="probe blind spots")
        stamped = record.with_category_warnings()
        assert fw.COMPARABILITY_WARNING in stamped.warnings
        # idempotent
        assert stamped.with_category_warnings().warnings == stamped.warnings

    def test_compliance_gets_no_warning(self):
        assert self._record().with_category_warnings().warnings == ()

    def test_summary_counts_match_recount_oracle(self):
        rng = random.Random(5)
        records = []
        for i in range(30):
            category = rng.choice(list(fw.TestCategory))
            records.append(
                self._record(
                    category,
                    spec_ref="evaluation_metrics",
                    rationale="probe",
                    verdict=rng.choice(list(fw.TestVerdict)),
                    rid=f"t-{i}",
                )
            )
        summary = fw.test_summary(records)
        for category in fw.TestCategory:
            for verdict in fw.TestVerdict:
                expected = sum(
                    1 for r in records if r.category == category and r.verdict == verdict
                )
                assert summary[category.value][verdict.value] == expected


def node(nid: str, kind: fw.NodeKind, children: tuple[str, ...] = (),
         evidence_ref: str | None = None) -> fw.AssuranceNode:
    return fw.AssuranceNode(
        id=nid, node_kind=kind, text=f"node {nid}", children=children,
        evidence_ref=evidence_ref, author="tester",
    )


def oracle_validate(nodes: list[fw.AssuranceNode]) -> dict:
    """Independent DFS check of tree shape: single Claim root, unique parents,
    all nodes reachable, no cycles."""
    by_id: dict[str, fw.AssuranceNode] = {}
    ok = True
    for n in nodes:
        if n.id in by_id:
            ok = False
        by_id[n.id] = n
    parents: dict[str, list[str]] = {}
    for n in nodes:
        for c in n.children:
            parents.setdefault(c, []).append(n.id)
            if c not in by_id:
                ok = False
    if any(len(p) > 1 for p in parents.values()):
        ok = False
    roots = [n for n in by_id.values() if n.id not in parents]
    if len(roots) != 1 or (roots and roots[0].node_kind != fw.NodeKind.CLAIM):
        ok = False
    for n in nodes:
        if n.node_kind == fw.NodeKind.EVIDENCE_LINK and not n.evidence_ref:
            ok = False
        if n.node_kind == fw.NodeKind.CHALLENGE:
            for p in parents.get(n.id, []):
                if by_id[p].node_kind not in (
                    fw.NodeKind.CLAIM, fw.NodeKind.ARGUMENT, fw.NodeKind.ASSUMPTION
                ):
                    ok = False
    if ok and roots:
        # iterative DFS with recursion-stack cycle detection
        visited: set[str] = set()
        in_stack: set[str] = set()

        def dfs(nid: str) -> bool:
            if nid in in_stack:
                return False
            if nid in visited:
                return True
            visited.add(nid)
            in_stack.add(nid)
            for child in by_id[nid].children:
                if not dfs(child):
                    return False
            in_stack.discard(nid)
            return True

        if not dfs(roots[0].id) or visited != set(by_id):
            ok = False
    return {"ok": ok}


class TestAssuranceTree:
    def test_minimal_tree_valid(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("a",)),
            node("a", fw.NodeKind.ARGUMENT, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK, evidence_ref="ev-model-card"),
        ]
        tree, report = fw.validate_assurance_nodes(nodes)
        assert tree.root_id == "c"
        assert report.unsupported_leaves == ()
        assert report.open_challenges == ()

    def test_argument_leaf_reported_unsupported(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("a",)),
            node("a", fw.NodeKind.ARGUMENT),
        ]
        _, report = fw.validate_assurance_nodes(nodes)
        assert report.unsupported_leaves == ("a",)

    def test_open_and_answered_challenges(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("ch1", "ch2")),
            node("ch1", fw.NodeKind.CHALLENGE),
            node("ch2", fw.NodeKind.CHALLENGE, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK, evidence_ref="ev-1"),
        ]
        _, report = fw.validate_assurance_nodes(nodes)
        assert report.open_challenges == ("ch1",)

    def test_challenge_on_evidence_link_rejected(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK, ("ch",), evidence_ref="ev-1"),
            node("ch", fw.NodeKind.CHALLENGE),
        ]
        with pytest.raises(ValidationError, match="[Cc]hallenge"):
            fw.validate_assurance_nodes(nodes)

    def test_cycle_detected(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("a",)),
            node("a", fw.NodeKind.ARGUMENT, ("b",)),
            node("b", fw.NodeKind.ARGUMENT, ("a",)),
        ]
        with pytest.raises(ValidationError):
            fw.validate_assurance_nodes(nodes)

    def test_multiple_roots_rejected(self):
        nodes = [node("c1", fw.NodeKind.CLAIM), node("c2", fw.NodeKind.CLAIM)]
        with pytest.raises(ValidationError, match="root"):
            fw.validate_assurance_nodes(nodes)

    def test_evidence_link_without_ref_rejected(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK),
        ]
        with pytest.raises(ValidationError, match="evidence_ref"):
            fw.validate_assurance_nodes(nodes)

    def test_non_claim_root_rejected(self):
        nodes = [node("a", fw.NodeKind.ARGUMENT, ())]
        with pytest.raises(ValidationError, match="Claim"):
            fw.validate_assurance_nodes(nodes)

    def test_unreferenced_evidence_reported(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK, evidence_ref="ev-1"),
        ]
        _, report = fw.validate_assurance_nodes(
            nodes, registered_evidence=["ev-1", "ev-2"]
        )
        assert report.unreferenced_evidence == ("ev-2",)

    def test_validation_independent_of_order(self):
        nodes = [
            node("c", fw.NodeKind.CLAIM, ("a", "ch")),
            node("a", fw.NodeKind.ARGUMENT, ("e",)),
            node("e", fw.NodeKind.EVIDENCE_LINK, evidence_ref="ev-1"),
            node("ch", fw.NodeKind.CHALLENGE),
        ]
        tree1, report1 = fw.validate_assurance_nodes(nodes)
        shuffled = list(reversed(nodes))
        tree2, report2 = fw.validate_assurance_nodes(shuffled)
        assert tree1 == tree2
        assert report1 == report2

    def _random_nodes(self, rng: random.Random) -> list[fw.AssuranceNode]:
        count = rng.randint(1, 50)
        kinds = list(fw.NodeKind)
        nodes = []
        for i in range(count):
            kind = fw.NodeKind.CLAIM if i == 0 and rng.random() < 0.7 else rng.choice(kinds)
            children = tuple(
                f"n{rng.randrange(count)}" for _ in range(rng.randint(0, 3))
            )
            nodes.append(
                node(
                    f"n{i}", kind, children,
                    evidence_ref="ev-x" if kind == fw.NodeKind.EVIDENCE_LINK and rng.random() < 0.9 else None,
                )
            )
        return nodes

    def test_random_graphs_match_dfs_oracle(self):
        rng = random.Random(31)
        for _ in range(200):
            nodes = self._random_nodes(rng)
            oracle_ok = oracle_validate(nodes)["ok"]
            try:
                fw.validate_assurance_nodes(nodes)
                validated = True
            except ValidationError:
                validated = False
            assert validated == oracle_ok
